//! Training-level properties of the autoencoder on phantom navigators.

use ndarray::{Array2, Axis};
use rand::Rng;
use rand_distr::StandardNormal;

use dmri::dae::{dae_apply, dae_train, prepare_training_vectors, TrainConfig, TrainedDae, TrainingSet};
use dmri::numerics::RngSeed;
use dmri::pipeline::{simulate, SimulationConfig};

fn navigator_set() -> TrainingSet {
    let d = simulate(&SimulationConfig::default()).unwrap();
    prepare_training_vectors(&d.navigators).unwrap()
}

fn trained(ts: &TrainingSet, epochs: usize) -> TrainedDae {
    dae_train(
        ts,
        &TrainConfig {
            epochs,
            ..TrainConfig::default()
        },
    )
    .unwrap()
}

fn norm(v: ndarray::ArrayView1<f64>) -> f64 {
    v.dot(&v).sqrt()
}

#[test]
fn navigator_training_properties() {
    let ts = navigator_set();
    let dae = trained(&ts, 300);
    let h = &dae.history;
    assert!(h.train_loss[99] < h.train_loss[0]);

    // Training vectors are reproduced closely.
    let out = dae.params.forward_batch(ts.vectors.view()).unwrap();
    let rel = (&out - &ts.vectors).mapv(|v| v * v).sum().sqrt() / ts.vectors.mapv(|v| v * v).sum().sqrt();
    assert!(rel <= 0.05, "relative residual {rel}");

    // Denoising at σ = 0.10 gains at least 6 dB.
    let mut rng = RngSeed(5).rng();
    let s = Array2::from_shape_fn(ts.vectors.dim(), |_| 0.10 * rng.sample::<f64, _>(StandardNormal));
    let den = dae.params.forward_batch((&ts.vectors + &s).view()).unwrap();
    let gain = (&den - &ts.vectors).mapv(|v| v * v).sum().sqrt() / s.mapv(|v| v * v).sum().sqrt();
    assert!(gain <= 0.5, "error/noise {gain}");

    // Near-projection: a second application changes little.
    let twice = dae.params.forward_batch(out.view()).unwrap();
    for ((v, o), t) in ts.vectors.axis_iter(Axis(0)).zip(out.axis_iter(Axis(0))).zip(twice.axis_iter(Axis(0))) {
        let lhs = norm((&t - &o).view());
        let rhs = norm((&o - &v).view()) + 0.02 * norm(v);
        assert!(lhs <= rhs + 1e-12, "{lhs} > {rhs}");
    }

    // The origin maps close to itself.
    let n = ts.dim();
    let zero = dae_apply(&dae.params, &vec![0.0; n]).unwrap();
    let zero_norm = zero.iter().map(|v| v * v).sum::<f64>().sqrt();
    assert!(zero_norm <= 0.01 * (n as f64).sqrt(), "‖D(0)‖ = {zero_norm}");

    // Residuals are smaller on navigators than on matched Gaussian vectors.
    let g = Array2::from_shape_fn(ts.vectors.dim(), |_| rng.sample::<f64, _>(StandardNormal));
    let mut matched = g.clone();
    for (mut gr, vr) in matched.axis_iter_mut(Axis(0)).zip(ts.vectors.axis_iter(Axis(0))) {
        let scale = norm(vr) / norm(gr.view());
        gr.mapv_inplace(|x| x * scale);
    }
    let mean_res = |v: &Array2<f64>| {
        let d = dae.params.forward_batch(v.view()).unwrap() - v;
        d.axis_iter(Axis(0)).map(norm).sum::<f64>() / v.nrows() as f64
    };
    assert!(mean_res(&ts.vectors) < mean_res(&matched));
}

#[test]
fn training_is_reproducible() {
    let ts = navigator_set();
    let a = trained(&ts, 30);
    let b = trained(&ts, 30);
    let (la, lb) = (a.history.train_loss.last().unwrap(), b.history.train_loss.last().unwrap());
    assert!((la - lb).abs() <= 1e-12);
    assert_eq!(a.params, b.params);
}
