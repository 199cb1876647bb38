//! End-to-end experiment plumbing shared by the examples, the command-line
//! tool and the acceptance run: simulate a navigated radial acquisition of
//! the phantom, train the autoencoder on its navigators, and score every
//! reconstruction method against the ground truth.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::acquisition::{
    acquire, extract_navigators, golden_angle_trajectory, gridding, pca_compress_coils, KSpaceData, NavigatorMatrix,
    RadialSense,
};
use crate::dae::{dae_train, prepare_training_vectors, TrainConfig, TrainedDae};
use crate::error::{Error, Result};
use crate::metrics::{ser_db, MetricReport};
use crate::numerics::{CasoratiMatrix, RngSeed};
use crate::phantom::{generate_coil_maps, generate_phantom, CoilMapSet, PhantomConfig};
use crate::priors::{penalized_subspace_recon, subspace_recon, SubspaceBasis};
use crate::recon::{cg_sense, recon_dae, IterationRecord, ReconConfig};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimulationConfig {
    pub phantom: PhantomConfig,
    pub n_coils: usize,
    /// Including the two navigator spokes.
    pub spokes_per_frame: usize,
    /// Absolute standard deviation of the complex measurement noise.
    pub noise_sigma: f64,
    /// Virtual coil count after PCA compression; `None` keeps all coils.
    pub compress_to: Option<usize>,
    /// Seeds coil maps and measurement noise.
    pub seed: RngSeed,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self {
            phantom: PhantomConfig::default(),
            n_coils: 8,
            spokes_per_frame: 10,
            noise_sigma: 0.005,
            compress_to: Some(4),
            seed: RngSeed::default(),
        }
    }
}

/// Everything a reconstruction needs, plus the ground truth it is scored
/// against.
#[derive(Clone, Debug)]
pub struct Dataset {
    pub truth: CasoratiMatrix,
    /// Sensitivities matching `kspace` (virtual coils after compression).
    pub coils: CoilMapSet,
    pub kspace: KSpaceData,
    pub navigators: NavigatorMatrix,
}

impl Dataset {
    pub fn operator(&self) -> Result<RadialSense> {
        RadialSense::new(self.kspace.trajectory.clone(), self.coils.clone())
    }
}

pub fn simulate(cfg: &SimulationConfig) -> Result<Dataset> {
    let truth = generate_phantom(&cfg.phantom)?;
    let (h, w) = (cfg.phantom.height, cfg.phantom.width);
    let maps = generate_coil_maps(h, w, cfg.n_coils, cfg.seed)?;
    let traj = golden_angle_trajectory(cfg.phantom.n_frames, cfg.spokes_per_frame, 2 * h.max(w))?;
    let raw = acquire(&truth, &maps, &traj, cfg.noise_sigma, cfg.seed)?;
    let (kspace, coils) = match cfg.compress_to {
        Some(k) if k < cfg.n_coils => pca_compress_coils(&raw, &maps, k)?,
        _ => (raw, maps),
    };
    let navigators = extract_navigators(&kspace)?;
    Ok(Dataset {
        truth,
        coils,
        kspace,
        navigators,
    })
}

pub fn train_on_navigators(z: &NavigatorMatrix, cfg: &TrainConfig) -> Result<TrainedDae> {
    dae_train(&prepare_training_vectors(z)?, cfg)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Gridding,
    CgSense,
    Subspace,
    PenalizedSubspace,
    Dae,
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::Gridding,
        Method::CgSense,
        Method::Subspace,
        Method::PenalizedSubspace,
        Method::Dae,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Gridding => "gridding",
            Method::CgSense => "cg-sense",
            Method::Subspace => "subspace",
            Method::PenalizedSubspace => "penalized-subspace",
            Method::Dae => "dae",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown method '{s}'")))
    }
}

/// A finished reconstruction and how it was obtained.
#[derive(Clone, Debug)]
pub struct MethodRun {
    pub method: Method,
    pub lambda: Option<f64>,
    pub x: CasoratiMatrix,
    /// Outer-iteration trace for the alternating method; a single record
    /// for the linear solvers.
    pub records: Vec<IterationRecord>,
    pub seconds: f64,
}

/// Inputs shared by all methods.
pub struct Problem<'a> {
    pub op: &'a RadialSense,
    pub y: &'a [crate::numerics::C64],
    pub basis: Option<&'a SubspaceBasis>,
    pub dae: Option<&'a TrainedDae>,
    pub recon: &'a ReconConfig,
}

fn linear_record(
    op: &RadialSense,
    y: &[crate::numerics::C64],
    x: &CasoratiMatrix,
    iterations: usize,
    residual: f64,
) -> Result<IterationRecord> {
    Ok(IterationRecord {
        data_term: crate::recon::data_term(op, x, y)?,
        prior_term: 0.0,
        cg_iterations: iterations,
        cg_residual: residual,
        relative_change: f64::NAN,
    })
}

/// Run one method. `lambda` overrides the configured value where the
/// method has one.
pub fn run_method(p: &Problem<'_>, method: Method, lambda: Option<f64>) -> Result<MethodRun> {
    let start = Instant::now();
    let cg = p.recon.cg();
    let need_basis = || p.basis.ok_or_else(|| Error::Config(format!("{method} needs a subspace basis")));
    let (x, records, used_lambda) = match method {
        Method::Gridding => (gridding(p.op, p.y)?, Vec::new(), None),
        Method::CgSense => {
            let sol = cg_sense(p.op, p.y, cg, p.recon.init)?;
            let rec = linear_record(p.op, p.y, &sol.x, sol.iterations, sol.relative_residual)?;
            (sol.x, vec![rec], None)
        }
        Method::Subspace => {
            let sol = subspace_recon(p.op, p.y, need_basis()?, cg)?;
            let rec = linear_record(p.op, p.y, &sol.x, sol.iterations, sol.relative_residual)?;
            (sol.x, vec![rec], None)
        }
        Method::PenalizedSubspace => {
            let lambda = lambda
                .or(p.recon.lambda)
                .ok_or_else(|| Error::Config("penalized-subspace needs a lambda".into()))?;
            let sol = penalized_subspace_recon(p.op, p.y, need_basis()?, lambda, cg, None)?;
            let mut rec = linear_record(p.op, p.y, &sol.x, sol.iterations, sol.relative_residual)?;
            rec.prior_term = lambda * need_basis()?.nullspace().penalty(&sol.x)?;
            (sol.x, vec![rec], Some(lambda))
        }
        Method::Dae => {
            let dae = p.dae.ok_or_else(|| Error::Config("dae method needs a trained network".into()))?;
            let cfg = ReconConfig {
                lambda: lambda.or(p.recon.lambda),
                ..p.recon.clone()
            };
            let res = recon_dae(p.op, p.y, &dae.params, dae.gamma, &cfg)?;
            (res.x, res.records, Some(res.lambda))
        }
    };
    Ok(MethodRun {
        method,
        lambda: used_lambda,
        x,
        records,
        seconds: start.elapsed().as_secs_f64(),
    })
}

/// Mean per-frame SER against `truth`.
pub fn mean_ser(truth: &CasoratiMatrix, x: &CasoratiMatrix) -> Result<f64> {
    let mut total = 0.0;
    for t in 0..truth.frames() {
        total += ser_db(&truth.frame(t), &x.frame(t))?;
    }
    Ok(total / truth.frames() as f64)
}

/// One point of a regularization sweep.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub lambda: f64,
    pub mean_ser_db: f64,
}

/// Run `method` at each λ and keep the run with the best mean SER
/// against `truth` (oracle tuning, as for every compared method).
pub fn sweep_lambda(
    p: &Problem<'_>,
    method: Method,
    lambdas: &[f64],
    truth: &CasoratiMatrix,
) -> Result<(MethodRun, Vec<SweepPoint>)> {
    if lambdas.is_empty() {
        return Err(Error::Config("empty lambda sweep".into()));
    }
    let mut best: Option<(f64, MethodRun)> = None;
    let mut points = Vec::with_capacity(lambdas.len());
    for &l in lambdas {
        let run = run_method(p, method, Some(l))?;
        let s = mean_ser(truth, &run.x)?;
        log::info!("{method} lambda {l:.3e}: mean SER {s:.3} dB ({:.1} s)", run.seconds);
        points.push(SweepPoint {
            lambda: l,
            mean_ser_db: s,
        });
        if best.as_ref().is_none_or(|(b, _)| s > *b) {
            best = Some((s, run));
        }
    }
    Ok((best.expect("non-empty sweep").1, points))
}

/// Largest eigenvalue of `AᴴA`, by power iteration from a fixed start.
pub fn normal_operator_norm(op: &RadialSense, iters: usize) -> Result<f64> {
    use crate::acquisition::{normal, EncodingOperator};
    let (h, w) = op.image_shape();
    let mut rng = RngSeed(7).rng();
    let mut x = CasoratiMatrix::from_tensor(
        crate::numerics::random_complex_tensor(vec![h * w, op.n_frames()], &mut rng),
        h,
        w,
    )?;
    let mut est = 0.0;
    for _ in 0..iters.max(1) {
        let nx = x.norm();
        x.data_mut().iter_mut().for_each(|v| *v /= nx);
        let y = normal(op, &x)?;
        est = y.norm();
        x = y;
    }
    Ok(est)
}

/// Per-method summary row.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MethodScore {
    pub method: Method,
    pub lambda: Option<f64>,
    pub ser_db: (f64, f64),
    pub ssim: (f64, f64),
    pub hfen: (f64, f64),
    pub seconds: f64,
}

impl MethodScore {
    pub fn of(run: &MethodRun, truth: &CasoratiMatrix) -> Result<Self> {
        let rep = MetricReport::evaluate(truth, &run.x)?;
        let pair = |s: crate::metrics::Summary| (s.mean, s.std);
        Ok(Self {
            method: run.method,
            lambda: run.lambda,
            ser_db: pair(rep.ser_summary()),
            ssim: pair(rep.ssim_summary()),
            hfen: pair(rep.hfen_summary()),
            seconds: run.seconds,
        })
    }
}

/// Markdown table of method scores.
pub fn score_table(scores: &[MethodScore]) -> String {
    let mut out = String::from("| method | lambda | SER (dB) | SSIM | HFEN | time (s) |\n|---|---|---|---|---|---|\n");
    for s in scores {
        let lambda = s.lambda.map_or("-".to_string(), |l| format!("{l:.2e}"));
        out += &format!(
            "| {} | {} | {:.2} ± {:.2} | {:.4} ± {:.4} | {:.4} ± {:.4} | {:.1} |\n",
            s.method, lambda, s.ser_db.0, s.ser_db.1, s.ssim.0, s.ssim.1, s.hfen.0, s.hfen.1, s.seconds
        );
    }
    out
}
