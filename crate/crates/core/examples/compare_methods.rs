//! Reconstruct one simulated acquisition with every method and print a
//! score table. λ for the two regularized methods is picked by a small
//! sweep against the ground truth.
//!
//! The default is a reduced 64x64x100 problem that finishes in a few
//! minutes; pass `full` for the 128x128x200 configuration.
//!
//!     cargo run --release --example compare_methods [full]

use dmri::dae::TrainConfig;
use dmri::phantom::PhantomConfig;
use dmri::pipeline::{
    mean_ser, run_method, score_table, simulate, sweep_lambda, train_on_navigators, Method, MethodScore, Problem,
    SimulationConfig,
};
use dmri::priors::estimate_basis;
use dmri::recon::ReconConfig;

fn main() -> dmri::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let full = std::env::args().nth(1).as_deref() == Some("full");
    let sim = if full {
        SimulationConfig::default()
    } else {
        SimulationConfig {
            phantom: PhantomConfig {
                height: 64,
                width: 64,
                n_frames: 100,
                ..PhantomConfig::default()
            },
            ..SimulationConfig::default()
        }
    };
    let d = simulate(&sim)?;
    let op = d.operator()?;
    let dae = train_on_navigators(&d.navigators, &TrainConfig::default())?;
    let rank = if full { 30 } else { 20 };
    let basis = estimate_basis(&d.navigators, rank)?;
    let rc = ReconConfig::default();
    let p = Problem {
        op: &op,
        y: &d.kspace.samples,
        basis: Some(&basis),
        dae: Some(&dae),
        recon: &rc,
    };

    let mut scores = Vec::new();
    for m in [Method::Gridding, Method::CgSense, Method::Subspace] {
        scores.push(MethodScore::of(&run_method(&p, m, None)?, &d.truth)?);
    }
    let (pen, _) = sweep_lambda(&p, Method::PenalizedSubspace, &[1.0, 10.0, 100.0], &d.truth)?;
    scores.push(MethodScore::of(&pen, &d.truth)?);
    let (best, _) = sweep_lambda(&p, Method::Dae, &[0.03, 0.1, 0.3], &d.truth)?;
    scores.push(MethodScore::of(&best, &d.truth)?);

    // How well each prior represents the true profiles on its own.
    let projected = basis.project(&d.truth)?;
    let denoised = dae.apply(&d.truth)?;
    println!(
        "prior fidelity on the truth: rank-{rank} projection {:.2} dB, autoencoder {:.2} dB",
        mean_ser(&d.truth, &projected)?,
        mean_ser(&d.truth, &denoised)?
    );
    print!("{}", score_table(&scores));
    Ok(())
}
