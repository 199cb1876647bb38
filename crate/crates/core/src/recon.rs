//! Manifold-regularized reconstruction
//! `min_X ‖A(X) − Y‖² + λ‖X − D(X)‖²` by alternating a data-consistency
//! solve with a denoising step.

use serde::{Deserialize, Serialize};

use crate::acquisition::{adjoint, forward, gridding, normal_flat, EncodingOperator};
use crate::dae::{dae_apply_casorati, dae_residual, DaeParameters};
use crate::error::{dim_err, Error, Result};
use crate::numerics::{cg_solve, CasoratiMatrix, CgOptions, C64};
use crate::priors::LinearRecon;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Init {
    /// Density-compensated zero-filled gridding.
    #[default]
    Gridding,
    Zeros,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReconConfig {
    /// `None` selects [`default_lambda`].
    pub lambda: Option<f64>,
    pub outer_iters: usize,
    pub cg_iters: usize,
    pub cg_tol: f64,
    pub init: Init,
    /// Stop once `‖X_{k+1} − X_k‖ / ‖X_k‖` drops below this.
    pub early_stop: Option<f64>,
}

impl Default for ReconConfig {
    fn default() -> Self {
        Self {
            lambda: None,
            outer_iters: 10,
            cg_iters: 30,
            cg_tol: 1e-6,
            init: Init::Gridding,
            early_stop: Some(1e-4),
        }
    }
}

impl ReconConfig {
    pub fn validate(&self) -> Result<()> {
        if self.outer_iters == 0 || self.cg_iters == 0 {
            return Err(Error::Config("iteration counts must be at least 1".into()));
        }
        if let Some(l) = self.lambda {
            if !(l >= 0.0) || !l.is_finite() {
                return Err(Error::Config(format!("lambda must be finite and >= 0, got {l}")));
            }
        }
        if !(self.cg_tol > 0.0) {
            return Err(Error::Config("CG tolerance must be positive".into()));
        }
        Ok(())
    }

    pub fn cg(&self) -> CgOptions {
        CgOptions {
            tol: self.cg_tol,
            max_iter: self.cg_iters,
        }
    }
}

/// `0.1 · ‖Aᴴ Y‖∞ / n_frames`.
pub fn default_lambda(aty: &CasoratiMatrix) -> f64 {
    let peak = aty.data().iter().map(|z| z.norm()).fold(0.0, f64::max);
    0.1 * peak / aty.frames() as f64
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    /// `‖A(X) − Y‖²`
    pub data_term: f64,
    /// `λ‖X − D(X)‖²`
    pub prior_term: f64,
    pub cg_iterations: usize,
    pub cg_residual: f64,
    /// `‖X_{k+1} − X_k‖ / ‖X_k‖`
    pub relative_change: f64,
}

#[derive(Clone, Debug)]
pub struct ReconResult {
    pub x: CasoratiMatrix,
    pub lambda: f64,
    /// One record per outer iteration performed.
    pub records: Vec<IterationRecord>,
}

fn initial_guess<A: EncodingOperator + ?Sized>(op: &A, y: &[C64], init: Init) -> Result<CasoratiMatrix> {
    match init {
        Init::Gridding => gridding(op, y),
        Init::Zeros => {
            let (h, w) = op.image_shape();
            Ok(CasoratiMatrix::zeros(h, w, op.n_frames()))
        }
    }
}

/// Solve `(AᴴA + λI) X = AᴴY + λQ` from `x0`; `q = None` means `Q = 0`.
pub fn x_update_normal<A: EncodingOperator + ?Sized>(
    op: &A,
    aty: &CasoratiMatrix,
    q: Option<&CasoratiMatrix>,
    lambda: f64,
    x0: &CasoratiMatrix,
    cg: CgOptions,
) -> Result<LinearRecon> {
    if !x0.same_shape(aty) || q.is_some_and(|q| !q.same_shape(aty)) {
        return dim_err("x-update operands have mismatched shapes");
    }
    let mut rhs = aty.data().to_vec();
    if let Some(q) = q {
        rhs.iter_mut().zip(q.data()).for_each(|(r, qi)| *r += lambda * qi);
    }
    let apply = |x: &[C64], out: &mut [C64]| {
        normal_flat(op, x, out);
        if lambda != 0.0 {
            out.iter_mut().zip(x).for_each(|(o, xi)| *o += lambda * xi);
        }
    };
    let sol = cg_solve(apply, &rhs, Some(x0.data()), cg)?;
    Ok(LinearRecon {
        x: CasoratiMatrix::new(aty.height(), aty.width(), aty.frames(), sol.x)?,
        iterations: sol.iterations,
        relative_residual: sol.relative_residual,
        residual_history: sol.residual_history,
    })
}

/// `argmin_X ‖A(X) − Y‖² + λ‖X − Q‖²`, started from zero.
pub fn x_update<A: EncodingOperator + ?Sized>(
    op: &A,
    y: &[C64],
    q: &CasoratiMatrix,
    lambda: f64,
    cg: CgOptions,
) -> Result<CasoratiMatrix> {
    let aty = adjoint(op, y)?;
    let x0 = CasoratiMatrix::zeros(aty.height(), aty.width(), aty.frames());
    Ok(x_update_normal(op, &aty, Some(q), lambda, &x0, cg)?.x)
}

/// Unregularized least squares `AᴴA X = AᴴY` (CG-SENSE).
pub fn cg_sense<A: EncodingOperator + ?Sized>(op: &A, y: &[C64], cg: CgOptions, init: Init) -> Result<LinearRecon> {
    let aty = adjoint(op, y)?;
    let x0 = initial_guess(op, y, init)?;
    x_update_normal(op, &aty, None, 0.0, &x0, cg)
}

/// `‖A(X) − Y‖²`
pub fn data_term<A: EncodingOperator + ?Sized>(op: &A, x: &CasoratiMatrix, y: &[C64]) -> Result<f64> {
    let ax = forward(op, x)?;
    if ax.len() != y.len() {
        return dim_err("measurement length mismatch");
    }
    Ok(ax.iter().zip(y).map(|(a, b)| (a - b).norm_sqr()).sum())
}

/// `(‖A(X) − Y‖², λ‖X − D(X)‖²)`
pub fn objective_value<A: EncodingOperator + ?Sized>(
    op: &A,
    x: &CasoratiMatrix,
    y: &[C64],
    theta: &DaeParameters,
    gamma: f64,
    lambda: f64,
) -> Result<(f64, f64)> {
    let data = data_term(op, x, y)?;
    let prior = if lambda == 0.0 {
        0.0
    } else {
        lambda * dae_residual(theta, x, gamma)?.0
    };
    Ok((data, prior))
}

/// Alternate `X_{k+1} = argmin ‖A(X)−Y‖² + λ‖X − Q_k‖²` (warm-started CG)
/// with `Q_{k+1} = D(X_{k+1})`, starting from `Q_0 = D(X_0)`. With λ = 0
/// this is a single CG-SENSE solve and the network is never evaluated.
pub fn recon_dae<A: EncodingOperator + ?Sized>(
    op: &A,
    y: &[C64],
    theta: &DaeParameters,
    gamma: f64,
    cfg: &ReconConfig,
) -> Result<ReconResult> {
    cfg.validate()?;
    if theta.input_dim() != op.n_frames() {
        return dim_err(format!(
            "network input width {} differs from {} frames",
            theta.input_dim(),
            op.n_frames()
        ));
    }
    let aty = adjoint(op, y)?;
    let lambda = cfg.lambda.unwrap_or_else(|| default_lambda(&aty));
    let x0 = initial_guess(op, y, cfg.init)?;

    if lambda == 0.0 {
        let sol = x_update_normal(op, &aty, None, 0.0, &x0, cfg.cg())?;
        let record = IterationRecord {
            data_term: data_term(op, &sol.x, y)?,
            prior_term: 0.0,
            cg_iterations: sol.iterations,
            cg_residual: sol.relative_residual,
            relative_change: sol.x.relative_distance(&x0),
        };
        return Ok(ReconResult {
            x: sol.x,
            lambda,
            records: vec![record],
        });
    }

    let mut x = x0;
    let mut q = dae_apply_casorati(theta, &x, gamma)?;
    let mut records = Vec::with_capacity(cfg.outer_iters);
    for k in 0..cfg.outer_iters {
        let sol = match x_update_normal(op, &aty, Some(&q), lambda, &x, cfg.cg()) {
            Ok(s) => s,
            Err(e) => {
                return Err(Error::ReconDiverged {
                    outer_iter: k,
                    message: e.to_string(),
                    partial: Box::new(x),
                })
            }
        };
        let xnorm = x.norm();
        let change = if xnorm > 0.0 {
            sol.x.relative_distance(&x)
        } else {
            f64::INFINITY
        };
        x = sol.x;
        let (res, q_next) = dae_residual(theta, &x, gamma)?;
        q = q_next;
        let record = IterationRecord {
            data_term: data_term(op, &x, y)?,
            prior_term: lambda * res,
            cg_iterations: sol.iterations,
            cg_residual: sol.relative_residual,
            relative_change: change,
        };
        if !(record.data_term + record.prior_term).is_finite() {
            return Err(Error::ReconDiverged {
                outer_iter: k,
                message: "non-finite objective".into(),
                partial: Box::new(x),
            });
        }
        if let Some(prev) = records.last().map(|r: &IterationRecord| r.data_term + r.prior_term) {
            let now = record.data_term + record.prior_term;
            if now > prev * 1.01 {
                log::warn!("objective rose from {prev:.4e} to {now:.4e} at outer iteration {k}");
            }
        }
        log::debug!(
            "outer {k}: data {:.4e} prior {:.4e} cg {} ({:.1e}) change {:.2e}",
            record.data_term,
            record.prior_term,
            record.cg_iterations,
            record.cg_residual,
            change
        );
        records.push(record);
        if cfg.early_stop.is_some_and(|tol| change < tol) {
            break;
        }
    }
    Ok(ReconResult { x, lambda, records })
}
