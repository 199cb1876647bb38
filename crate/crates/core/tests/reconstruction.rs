//! Reconstruction behaviour on small synthetic problems.

use dmri::acquisition::{forward, CartesianSense};
use dmri::dae::TrainConfig;
use dmri::numerics::{truncated_svd, CasoratiMatrix, ComplexTensor, RngSeed};
use dmri::phantom::{generate_coil_maps, generate_phantom, PhantomConfig};
use dmri::pipeline::{mean_ser, run_method, simulate, train_on_navigators, Dataset, Method, Problem, SimulationConfig};
use dmri::priors::estimate_basis;
use dmri::recon::{recon_dae, Init, ReconConfig};

fn small_sim(noise: f64) -> SimulationConfig {
    SimulationConfig {
        phantom: PhantomConfig {
            height: 48,
            width: 48,
            n_frames: 64,
            ..PhantomConfig::default()
        },
        noise_sigma: noise,
        ..SimulationConfig::default()
    }
}

fn low_rank(x: &CasoratiMatrix, rank: usize) -> CasoratiMatrix {
    let full = ComplexTensor::new(vec![x.pixels(), x.frames()], x.data().to_vec()).unwrap();
    let svd = truncated_svd(&full, rank).unwrap();
    let mut us = svd.u.clone();
    for (k, v) in us.data_mut().iter_mut().enumerate() {
        *v *= svd.s[k % rank];
    }
    CasoratiMatrix::from_tensor(us.matmul(&svd.v.adjoint().unwrap()).unwrap(), x.height(), x.width()).unwrap()
}

#[test]
fn fully_sampled_cartesian_is_exact() {
    let cfg = PhantomConfig {
        height: 32,
        width: 32,
        n_frames: 8,
        ..PhantomConfig::default()
    };
    let truth = generate_phantom(&cfg).unwrap();
    let op = CartesianSense::new(generate_coil_maps(32, 32, 4, RngSeed(3)).unwrap(), 8);
    let y = forward(&op, &truth).unwrap();
    let theta = dmri::dae::DaeParameters::init(&[8, 4, 1, 4, 8], RngSeed(1)).unwrap();
    let rc = ReconConfig {
        lambda: Some(0.0),
        cg_iters: 100,
        cg_tol: 1e-13,
        init: Init::Zeros,
        ..ReconConfig::default()
    };
    let res = recon_dae(&op, &y, &theta, 1.0, &rc).unwrap();
    assert_eq!(res.records.len(), 1);
    let ser = mean_ser(&truth, &res.x).unwrap();
    assert!(ser >= 80.0, "SER {ser:.1} dB");
}

#[test]
fn subspace_beats_unconstrained_on_low_rank_data() {
    let mut data: Dataset = simulate(&small_sim(0.0)).unwrap();
    // Re-acquire a rank-3 version of the phantom so the model is exact.
    let x3 = low_rank(&data.truth, 3);
    let op = data.operator().unwrap();
    data.kspace.samples = forward(&op, &x3).unwrap();
    let nav = dmri::acquisition::extract_navigators(&data.kspace).unwrap();
    let basis = estimate_basis(&nav, 3).unwrap();
    let rc = ReconConfig {
        cg_iters: 100,
        cg_tol: 1e-8,
        ..ReconConfig::default()
    };
    let problem = Problem {
        op: &op,
        y: &data.kspace.samples,
        basis: Some(&basis),
        dae: None,
        recon: &rc,
    };
    let score = |m| mean_ser(&x3, &run_method(&problem, m, None).unwrap().x).unwrap();
    let sub = score(Method::Subspace);
    let cgs = score(Method::CgSense);
    let grid = score(Method::Gridding);
    assert!(sub > cgs + 5.0 && cgs > grid, "subspace {sub:.1}, cg-sense {cgs:.1}, gridding {grid:.1}");
}

#[test]
fn dae_recon_improves_on_gridding_and_objective_settles() {
    let data = simulate(&small_sim(0.005)).unwrap();
    let dae = train_on_navigators(
        &data.navigators,
        &TrainConfig {
            epochs: 200,
            ..TrainConfig::default()
        },
    )
    .unwrap();
    let op = data.operator().unwrap();
    let rc = ReconConfig {
        lambda: Some(0.03),
        outer_iters: 8,
        early_stop: None,
        ..ReconConfig::default()
    };
    let res = recon_dae(&op, &data.kspace.samples, &dae.params, dae.gamma, &rc).unwrap();
    assert_eq!(res.records.len(), 8);
    let objective: Vec<f64> = res.records.iter().map(|r| r.data_term + r.prior_term).collect();
    for w in objective.windows(2) {
        assert!(w[1] <= w[0] * 1.01, "objective rose: {objective:?}");
    }
    let problem = Problem {
        op: &op,
        y: &data.kspace.samples,
        basis: None,
        dae: Some(&dae),
        recon: &rc,
    };
    let grid = mean_ser(&data.truth, &run_method(&problem, Method::Gridding, None).unwrap().x).unwrap();
    let ser = mean_ser(&data.truth, &res.x).unwrap();
    assert!(ser >= grid + 6.0, "dae {ser:.2} dB, gridding {grid:.2} dB");
}
