//! Compare the gridding NUFFT with a brute-force non-uniform DFT on a
//! random image, for a few grid sizes.
//!
//!     cargo run --release --example nufft_accuracy

use std::time::Instant;

use dmri::acquisition::golden_angle_trajectory;
use dmri::acquisition::nufft::{direct_nudft, NufftPlan, KERNEL_WIDTH};
use dmri::numerics::{random_complex_tensor, RngSeed, C64};

fn main() -> dmri::Result<()> {
    println!("kernel width {KERNEL_WIDTH}, oversampling 2");
    let mut rng = RngSeed(1).rng();
    for n in [16, 32, 64] {
        let traj = golden_angle_trajectory(1, 16, 2 * n)?;
        let coords = traj.frame_coords(0);
        let img = random_complex_tensor(vec![n * n], &mut rng).data().to_vec();

        let plan = NufftPlan::new(n, n);
        let stencils = plan.stencils(&coords)?;
        let t = Instant::now();
        let mut fast = vec![C64::new(0.0, 0.0); coords.len()];
        plan.forward(&img, &stencils, &mut fast);
        let t_fast = t.elapsed();

        let t = Instant::now();
        let exact = direct_nudft(&img, n, n, &coords);
        let t_exact = t.elapsed();

        let peak = exact.iter().map(|z| z.norm()).fold(0.0, f64::max);
        let err = exact.iter().zip(&fast).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        println!(
            "{n:>3}x{n:<3} {} samples: max error / peak {:.2e}, nufft {:.2?}, direct {:.2?}",
            coords.len(),
            err / peak,
            t_fast,
            t_exact
        );
    }
    Ok(())
}
