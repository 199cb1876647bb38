//! Image quality metrics on a phantom frame against progressively
//! degraded copies.
//!
//!     cargo run --release --example metrics

use rand::Rng;
use rand_distr::StandardNormal;

use dmri::metrics::{hfen, ser_db, ssim};
use dmri::numerics::{RngSeed, C64};
use dmri::phantom::{generate_phantom, PhantomConfig};

fn main() -> dmri::Result<()> {
    let cfg = PhantomConfig {
        height: 96,
        width: 96,
        n_frames: 1,
        ..PhantomConfig::default()
    };
    let x = generate_phantom(&cfg)?;
    let reference = x.frame(0).to_vec();
    let (h, w) = (96, 96);
    let mut rng = RngSeed(2).rng();

    println!("{:>8} {:>10} {:>8} {:>8}", "noise", "SER (dB)", "SSIM", "HFEN");
    for sigma in [0.0, 0.01, 0.03, 0.1, 0.3] {
        let noisy: Vec<C64> = reference
            .iter()
            .map(|v| v + C64::new(sigma * rng.sample::<f64, _>(StandardNormal), 0.0))
            .collect();
        println!(
            "{sigma:>8} {:>10.2} {:>8.4} {:>8.4}",
            ser_db(&reference, &noisy)?,
            ssim(&reference, &noisy, h, w)?,
            hfen(&reference, &noisy, h, w)?
        );
    }
    let doubled: Vec<C64> = reference.iter().map(|v| v * 2.0).collect();
    println!("doubling the image: HFEN {}", hfen(&reference, &doubled, h, w)?);
    Ok(())
}
