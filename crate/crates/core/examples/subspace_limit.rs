//! The penalized subspace reconstruction approaches the hard subspace
//! reconstruction as λ grows.
//!
//!     cargo run --release --example subspace_limit

use dmri::numerics::CgOptions;
use dmri::phantom::PhantomConfig;
use dmri::pipeline::{mean_ser, simulate, SimulationConfig};
use dmri::priors::{estimate_basis, penalized_subspace_recon, subspace_recon};

fn main() -> dmri::Result<()> {
    let sim = SimulationConfig {
        phantom: PhantomConfig {
            height: 48,
            width: 48,
            n_frames: 60,
            ..PhantomConfig::default()
        },
        ..SimulationConfig::default()
    };
    let d = simulate(&sim)?;
    let op = d.operator()?;
    let basis = estimate_basis(&d.navigators, 10)?;
    let opts = CgOptions {
        tol: 1e-8,
        max_iter: 200,
    };
    let hard = subspace_recon(&op, &d.kspace.samples, &basis, opts)?;
    println!(
        "hard subspace (rank 10): mean SER {:.2} dB, {} iterations",
        mean_ser(&d.truth, &hard.x)?,
        hard.iterations
    );
    for lambda in [1e-2, 1e0, 1e2, 1e4, 1e6] {
        let soft = penalized_subspace_recon(&op, &d.kspace.samples, &basis, lambda, opts, None)?;
        println!(
            "λ = {lambda:>7.0e}: mean SER {:6.2} dB, distance to hard {:.2e}, {} iterations",
            mean_ser(&d.truth, &soft.x)?,
            soft.x.relative_distance(&hard.x),
            soft.iterations
        );
    }
    Ok(())
}
