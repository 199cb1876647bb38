//! Train the denoising autoencoder on phantom navigators, then measure how
//! much noise it removes and how its residual separates navigator-like
//! vectors from random ones.
//!
//!     cargo run --release --example train_dae

use ndarray::Array2;
use rand::Rng;
use rand_distr::StandardNormal;

use dmri::dae::TrainConfig;
use dmri::numerics::RngSeed;
use dmri::pipeline::{simulate, train_on_navigators, SimulationConfig};
use dmri::dae::prepare_training_vectors;
use dmri::phantom::PhantomConfig;

fn main() -> dmri::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let sim = SimulationConfig {
        phantom: PhantomConfig {
            height: 64,
            width: 64,
            n_frames: 100,
            ..PhantomConfig::default()
        },
        ..SimulationConfig::default()
    };
    let data = simulate(&sim)?;
    let cfg = TrainConfig {
        epochs: 300,
        ..TrainConfig::default()
    };
    let t = std::time::Instant::now();
    let dae = train_on_navigators(&data.navigators, &cfg)?;
    println!(
        "layers {:?}, {} parameters, trained in {:.1?}",
        dae.params.dims,
        dae.params.n_params(),
        t.elapsed()
    );
    let h = &dae.history;
    for e in [0, 9, 49, 99, cfg.epochs - 1] {
        println!("  epoch {:>3}: train {:.3e}  validation {:.3e}", e + 1, h.train_loss[e], h.validation_loss[e]);
    }
    println!("kept epoch {}", h.best_epoch + 1);

    // Gain measured on the training navigators themselves; the acceptance
    // suite repeats this on held-out rows.
    let z = prepare_training_vectors(&data.navigators)?.vectors;
    let mut rng = RngSeed(3).rng();
    for sigma in [0.1, 0.03, 0.01] {
        let s = Array2::from_shape_fn(z.dim(), |_| sigma * rng.sample::<f64, _>(StandardNormal));
        let out = dae.params.forward_batch((&z + &s).view())?;
        let ratio = (&out - &z).mapv(|v| v * v).sum().sqrt() / s.mapv(|v| v * v).sum().sqrt();
        println!("σ = {sigma}: output error / noise = {ratio:.3} ({:.1} dB gain)", -20.0 * ratio.log10());
    }

    let g = Array2::from_shape_fn(z.dim(), |_| rng.sample::<f64, _>(StandardNormal));
    let scale = (z.mapv(|v| v * v).sum() / g.mapv(|v| v * v).sum()).sqrt();
    let g = g * scale;
    let res = |v: &Array2<f64>| -> dmri::Result<f64> {
        Ok((dae.params.forward_batch(v.view())? - v).mapv(|x| x * x).sum().sqrt())
    };
    println!("residual norm: navigators {:.3}, matched Gaussian {:.3}", res(&z)?, res(&g)?);
    Ok(())
}
