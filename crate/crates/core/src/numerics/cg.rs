use super::{axpy, dot, norm, C64};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CgOptions {
    /// Stop once `‖b − A x‖ ≤ tol · ‖b‖`.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for CgOptions {
    fn default() -> Self {
        Self {
            tol: 1e-6,
            max_iter: 30,
        }
    }
}

#[derive(Clone, Debug)]
pub struct CgOutcome {
    pub x: Vec<C64>,
    pub iterations: usize,
    /// Final `‖b − A x‖ / ‖b‖`.
    pub relative_residual: f64,
    /// Relative residual before the first and after every iteration.
    pub residual_history: Vec<f64>,
    pub converged: bool,
}

/// Solve `A x = b` for Hermitian positive (semi-)definite `A`.
///
/// This is the conjugate-residual member of the CG family: each iterate
/// minimizes `‖b − A x‖` over the Krylov space, so the residual norm never
/// increases, and for HPD `A` the energy-norm error (and therefore the
/// quadratic `xᴴAx − 2 Re bᴴx`) decreases monotonically as well.
pub fn cg_solve<F>(apply: F, rhs: &[C64], x0: Option<&[C64]>, opts: CgOptions) -> Result<CgOutcome>
where
    F: FnMut(&[C64], &mut [C64]),
{
    krylov(apply, None::<fn(&[C64], &mut [C64])>, rhs, x0, opts)
}

/// Preconditioned variant. `precond` applies an HPD approximation of `A⁻¹`.
pub fn pcg_solve<F, P>(
    apply: F,
    precond: P,
    rhs: &[C64],
    x0: Option<&[C64]>,
    opts: CgOptions,
) -> Result<CgOutcome>
where
    F: FnMut(&[C64], &mut [C64]),
    P: FnMut(&[C64], &mut [C64]),
{
    krylov(apply, Some(precond), rhs, x0, opts)
}

fn finite(v: &[C64]) -> bool {
    v.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

fn krylov<F, P>(
    mut apply: F,
    mut precond: Option<P>,
    b: &[C64],
    x0: Option<&[C64]>,
    opts: CgOptions,
) -> Result<CgOutcome>
where
    F: FnMut(&[C64], &mut [C64]),
    P: FnMut(&[C64], &mut [C64]),
{
    let n = b.len();
    let zero = C64::new(0.0, 0.0);
    let bnorm = norm(b);
    let mut x = match x0 {
        Some(x0) => {
            if x0.len() != n {
                return Err(Error::Dimension(format!(
                    "initial guess has {} entries, rhs {n}",
                    x0.len()
                )));
            }
            x0.to_vec()
        }
        None => vec![zero; n],
    };
    if bnorm == 0.0 {
        // A is HPD on the rhs space, so the unique solution is zero.
        return Ok(CgOutcome {
            x: vec![zero; n],
            iterations: 0,
            relative_residual: 0.0,
            residual_history: vec![0.0],
            converged: true,
        });
    }

    let mut tmp = vec![zero; n];
    let mut r = b.to_vec();
    if x.iter().any(|z| *z != zero) {
        apply(&x, &mut tmp);
        r.iter_mut().zip(&tmp).for_each(|(ri, ai)| *ri -= ai);
    }
    let mut z = r.clone();
    if let Some(m) = precond.as_mut() {
        m(&r, &mut z);
    }
    let mut az = vec![zero; n];
    apply(&z, &mut az);
    let mut p = z.clone();
    let mut ap = az.clone();
    let mut q = vec![zero; n];
    let mut rho = dot(&z, &az).re;

    let mut rel = norm(&r) / bnorm;
    let mut history = vec![rel];
    let mut iterations = 0;

    while rel > opts.tol && iterations < opts.max_iter {
        if rho <= 0.0 {
            // Krylov space exhausted (z in the null space of A).
            break;
        }
        match precond.as_mut() {
            Some(m) => m(&ap, &mut q),
            None => q.copy_from_slice(&ap),
        }
        let denom = dot(&ap, &q).re;
        if !(denom > 0.0) || !denom.is_finite() {
            if denom == 0.0 {
                break;
            }
            return Err(Error::Numerical(format!(
                "conjugate residual breakdown at iteration {iterations} (denominator {denom})"
            )));
        }
        let alpha = C64::new(rho / denom, 0.0);
        axpy(alpha, &p, &mut x);
        axpy(-alpha, &ap, &mut r);
        if precond.is_some() {
            axpy(-alpha, &q, &mut z);
        } else {
            z.copy_from_slice(&r);
        }
        apply(&z, &mut az);
        let rho_new = dot(&z, &az).re;
        let beta = C64::new(rho_new / rho, 0.0);
        rho = rho_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
            ap[i] = az[i] + beta * ap[i];
        }
        iterations += 1;
        rel = norm(&r) / bnorm;
        history.push(rel);
        if !rel.is_finite() || !finite(&x) {
            return Err(Error::Numerical(format!(
                "non-finite iterate at iteration {iterations}"
            )));
        }
    }

    Ok(CgOutcome {
        x,
        iterations,
        relative_residual: rel,
        residual_history: history,
        converged: rel <= opts.tol,
    })
}
