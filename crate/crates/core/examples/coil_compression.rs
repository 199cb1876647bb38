//! PCA coil compression: how much k-space energy survives when 8 physical
//! coils are merged into fewer virtual ones.
//!
//!     cargo run --release --example coil_compression

use dmri::acquisition::{acquire, golden_angle_trajectory, CoilCompression};
use dmri::numerics::RngSeed;
use dmri::phantom::{generate_coil_maps, generate_phantom, PhantomConfig};

fn main() -> dmri::Result<()> {
    let cfg = PhantomConfig {
        height: 64,
        width: 64,
        n_frames: 40,
        ..PhantomConfig::default()
    };
    let x = generate_phantom(&cfg)?;
    let maps = generate_coil_maps(64, 64, 8, RngSeed(1))?;
    let traj = golden_angle_trajectory(cfg.n_frames, 10, 128)?;
    let y = acquire(&x, &maps, &traj, 0.005, RngSeed(1))?;

    for target in 1..=8 {
        let cc = CoilCompression::fit(&y, target)?;
        println!("{target} virtual coils keep {:.5} of the energy", cc.retained_energy_fraction());
    }
    Ok(())
}
