//! Acquire golden-angle radial data with two navigator spokes per frame
//! and look at the navigator matrix it yields.
//!
//!     cargo run --release --example navigators

use dmri::acquisition::{acquire, extract_navigators, golden_angle_trajectory, NAVIGATOR_ANGLES};
use dmri::numerics::RngSeed;
use dmri::phantom::{generate_coil_maps, generate_phantom, PhantomConfig};
use dmri::priors::estimate_basis;

fn main() -> dmri::Result<()> {
    let cfg = PhantomConfig {
        height: 64,
        width: 64,
        n_frames: 100,
        ..PhantomConfig::default()
    };
    let x = generate_phantom(&cfg)?;
    let maps = generate_coil_maps(64, 64, 4, RngSeed(1))?;
    let traj = golden_angle_trajectory(cfg.n_frames, 10, 128)?;
    println!(
        "navigator angles {:.1}° and {:.1}°, first imaging angles {:.3}° {:.3}°",
        NAVIGATOR_ANGLES[0].to_degrees(),
        NAVIGATOR_ANGLES[1].to_degrees(),
        traj.angle(0, 2).to_degrees(),
        traj.angle(0, 3).to_degrees()
    );

    let y = acquire(&x, &maps, &traj, 0.005, RngSeed(1))?;
    let z = extract_navigators(&y)?;
    let per_spoke = |s| z.rows.iter().filter(|r| r.spoke == s).count();
    println!(
        "{} navigator rows x {} frames ({} from the 0° spoke, {} from the 90° spoke)",
        z.n_rows(),
        z.n_frames(),
        per_spoke(0),
        per_spoke(1)
    );

    let basis = estimate_basis(&z, 20)?;
    let total: f64 = z.data.data().iter().map(|c| c.norm_sqr()).sum();
    let mut acc = 0.0;
    for (k, s) in basis.singular_values.iter().enumerate() {
        acc += s * s;
        if [1, 3, 5, 10, 20].contains(&(k + 1)) {
            println!("  top {:>2} temporal components: {:.5} of navigator energy", k + 1, acc / total);
        }
    }
    Ok(())
}
