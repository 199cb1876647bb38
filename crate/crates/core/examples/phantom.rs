//! Generate a small dynamic phantom, report how much of its energy a few
//! temporal components hold, and render a frame and an x-t profile.
//!
//!     cargo run --release --example phantom -- /tmp/phantom-demo

use std::path::PathBuf;

use dmri::io::{render_frame, render_profile};
use dmri::numerics::{truncated_svd, ComplexTensor};
use dmri::phantom::{generate_coil_maps, generate_phantom, PhantomConfig};

fn main() -> dmri::Result<()> {
    let out = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "phantom-demo".into()));
    std::fs::create_dir_all(&out)?;

    let cfg = PhantomConfig {
        height: 64,
        width: 64,
        n_frames: 120,
        ..PhantomConfig::default()
    };
    let x = generate_phantom(&cfg)?;
    println!("phantom: {} pixels x {} frames", x.pixels(), x.frames());

    let casorati = ComplexTensor::new(vec![x.pixels(), x.frames()], x.data().to_vec())?;
    let svd = truncated_svd(&casorati, 30)?;
    let total = x.norm().powi(2);
    let mut acc = 0.0;
    for (k, s) in svd.s.iter().enumerate() {
        acc += s * s;
        if [1, 2, 5, 10, 20, 30].contains(&(k + 1)) {
            println!("  rank {:>2}: {:.4} of the energy", k + 1, acc / total);
        }
    }

    let maps = generate_coil_maps(64, 64, 8, cfg.seed)?;
    let sos = maps.sum_of_squares();
    println!(
        "8 coils, sum of squares in [{:.3}, {:.3}]",
        sos.iter().cloned().fold(f64::INFINITY, f64::min),
        sos.iter().cloned().fold(0.0, f64::max)
    );

    render_frame(&x, 0)?.write(&out.join("frame0.pgm"))?;
    render_profile(&x, 32)?.write(&out.join("profile-row32.pgm"))?;
    println!("wrote {}/frame0.pgm and profile-row32.pgm", out.display());
    Ok(())
}
