//! Linear subspace baseline: temporal basis from navigators, hard-constrained
//! recovery `X = U Vᴴ`, and the penalized form `‖A(X)−Y‖² + λ‖X N‖²` with
//! null-space projector `N = I − V Vᴴ`.

use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::acquisition::{adjoint, normal_flat, EncodingOperator, NavigatorMatrix};
use crate::error::{dim_err, Error, Result};
use crate::numerics::{cg_solve, pcg_solve, truncated_svd, CasoratiMatrix, CgOptions, ComplexTensor, C64};

/// Rows handled per parallel task when multiplying row blocks by `V`.
const ROW_BLOCK: usize = 256;

/// Orthonormal temporal basis `V` (frames x r).
#[derive(Clone, Debug, PartialEq)]
pub struct SubspaceBasis {
    pub v: ComplexTensor,
    pub singular_values: Vec<f64>,
    /// SHA-256 of the navigator matrix the basis was estimated from, or
    /// empty when built directly.
    pub source: String,
}

impl SubspaceBasis {
    /// Wrap an existing frames x r matrix, checking `VᴴV = I`.
    pub fn from_columns(v: ComplexTensor, singular_values: Vec<f64>, source: String) -> Result<Self> {
        let (n, r) = v.shape2()?;
        if r == 0 || r > n {
            return dim_err(format!("basis must have 1..={n} columns, got {r}"));
        }
        if singular_values.len() != r {
            return dim_err("one singular value per basis vector required");
        }
        let gram = v.adjoint()?.matmul(&v)?;
        for i in 0..r {
            for j in 0..r {
                let target = if i == j { 1.0 } else { 0.0 };
                if (gram.get2(i, j) - target).norm() > 1e-8 {
                    return Err(Error::Numerical("basis columns are not orthonormal".into()));
                }
            }
        }
        Ok(Self {
            v,
            singular_values,
            source,
        })
    }

    pub fn n_frames(&self) -> usize {
        self.v.dims()[0]
    }

    pub fn rank(&self) -> usize {
        self.v.dims()[1]
    }

    /// `U = X V` for a flat row-major buffer with `n_frames` columns.
    pub fn coefficients(&self, x: &[C64]) -> Vec<C64> {
        let (n, r) = (self.n_frames(), self.rank());
        let rows = x.len() / n;
        let mut u = vec![C64::new(0.0, 0.0); rows * r];
        let v = self.v.data();
        u.par_chunks_mut(ROW_BLOCK * r)
            .zip(x.par_chunks(ROW_BLOCK * n))
            .for_each(|(ub, xb)| {
                for (ur, xr) in ub.chunks_mut(r).zip(xb.chunks(n)) {
                    for (j, xj) in xr.iter().enumerate() {
                        for (uk, vjk) in ur.iter_mut().zip(&v[j * r..(j + 1) * r]) {
                            *uk += xj * vjk;
                        }
                    }
                }
            });
        u
    }

    /// `U Vᴴ`, flat row-major with `n_frames` columns.
    pub fn synthesize(&self, u: &[C64]) -> Vec<C64> {
        let (n, r) = (self.n_frames(), self.rank());
        let rows = u.len() / r;
        let mut x = vec![C64::new(0.0, 0.0); rows * n];
        let v = self.v.data();
        x.par_chunks_mut(ROW_BLOCK * n)
            .zip(u.par_chunks(ROW_BLOCK * r))
            .for_each(|(xb, ub)| {
                for (xr, ur) in xb.chunks_mut(n).zip(ub.chunks(r)) {
                    for (j, xj) in xr.iter_mut().enumerate() {
                        let mut acc = C64::new(0.0, 0.0);
                        for (uk, vjk) in ur.iter().zip(&v[j * r..(j + 1) * r]) {
                            acc += uk * vjk.conj();
                        }
                        *xj = acc;
                    }
                }
            });
        x
    }

    /// `X V Vᴴ`.
    pub fn project(&self, x: &CasoratiMatrix) -> Result<CasoratiMatrix> {
        self.check(x)?;
        let p = self.synthesize(&self.coefficients(x.data()));
        CasoratiMatrix::new(x.height(), x.width(), x.frames(), p)
    }

    pub fn nullspace(&self) -> NullspaceProjector<'_> {
        NullspaceProjector { basis: self }
    }

    fn check(&self, x: &CasoratiMatrix) -> Result<()> {
        if x.frames() != self.n_frames() {
            return dim_err(format!(
                "basis spans {} frames, matrix has {}",
                self.n_frames(),
                x.frames()
            ));
        }
        Ok(())
    }
}

/// `N = I − V Vᴴ`, applied on the fly by right-multiplication.
#[derive(Clone, Copy, Debug)]
pub struct NullspaceProjector<'a> {
    basis: &'a SubspaceBasis,
}

impl NullspaceProjector<'_> {
    /// `out = x N` for a flat row-major buffer.
    pub fn apply_flat(&self, x: &[C64], out: &mut [C64]) {
        let p = self.basis.synthesize(&self.basis.coefficients(x));
        out.iter_mut()
            .zip(x.iter().zip(&p))
            .for_each(|(o, (a, b))| *o = a - b);
    }

    pub fn apply(&self, x: &CasoratiMatrix) -> Result<CasoratiMatrix> {
        self.basis.check(x)?;
        let mut out = CasoratiMatrix::zeros(x.height(), x.width(), x.frames());
        self.apply_flat(x.data(), out.data_mut());
        Ok(out)
    }

    /// `‖X N‖²_F`
    pub fn penalty(&self, x: &CasoratiMatrix) -> Result<f64> {
        Ok(self.apply(x)?.norm().powi(2))
    }

    /// Dense n x n matrix, for inspection at small sizes.
    pub fn to_dense(&self) -> ComplexTensor {
        let n = self.basis.n_frames();
        let mut eye = vec![C64::new(0.0, 0.0); n * n];
        for i in 0..n {
            eye[i * n + i] = C64::new(1.0, 0.0);
        }
        let mut out = vec![C64::new(0.0, 0.0); n * n];
        self.apply_flat(&eye, &mut out);
        ComplexTensor::new(vec![n, n], out).expect("square")
    }

    pub fn trace(&self) -> f64 {
        (self.basis.n_frames() - self.basis.rank()) as f64
    }
}

/// SHA-256 hex digest of a complex buffer's little-endian bytes.
pub(crate) fn digest(data: &[C64]) -> String {
    let mut h = Sha256::new();
    for z in data {
        h.update(z.re.to_le_bytes());
        h.update(z.im.to_le_bytes());
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

/// Top-`r` right singular vectors of the navigator matrix.
pub fn estimate_basis(z: &NavigatorMatrix, r: usize) -> Result<SubspaceBasis> {
    let svd = truncated_svd(&z.data, r)?;
    let tiny = svd.s[0] * 1e-10;
    let numerical_rank = svd.s.iter().filter(|&&s| s > tiny).count();
    if numerical_rank < r {
        log::warn!("requested rank {r} exceeds the navigators' numerical rank {numerical_rank}");
    }
    Ok(SubspaceBasis {
        v: svd.v,
        singular_values: svd.s,
        source: digest(z.data.data()),
    })
}

/// A linear reconstruction with its solver diagnostics.
#[derive(Clone, Debug)]
pub struct LinearRecon {
    pub x: CasoratiMatrix,
    pub iterations: usize,
    pub relative_residual: f64,
    pub residual_history: Vec<f64>,
}

/// Minimize `‖A(U Vᴴ) − Y‖²` over the `pixels x r` coefficients `U` by
/// CG on `U ↦ Aᴴ A(U Vᴴ) V = Aᴴ(Y) V`.
pub fn subspace_recon<A: EncodingOperator + ?Sized>(
    op: &A,
    y: &[C64],
    basis: &SubspaceBasis,
    opts: CgOptions,
) -> Result<LinearRecon> {
    let aty = adjoint(op, y)?;
    basis.check(&aty)?;
    let rhs = basis.coefficients(aty.data());
    let mut full = vec![C64::new(0.0, 0.0); aty.data().len()];
    let apply = |u: &[C64], out: &mut [C64]| {
        normal_flat(op, &basis.synthesize(u), &mut full);
        out.copy_from_slice(&basis.coefficients(&full));
    };
    let sol = cg_solve(apply, &rhs, None, opts)?;
    log::debug!(
        "subspace recon: {} iterations, residual {:.2e}",
        sol.iterations,
        sol.relative_residual
    );
    Ok(LinearRecon {
        x: CasoratiMatrix::new(aty.height(), aty.width(), aty.frames(), basis.synthesize(&sol.x))?,
        iterations: sol.iterations,
        relative_residual: sol.relative_residual,
        residual_history: sol.residual_history,
    })
}

/// Minimize `‖A(X) − Y‖² + λ‖X N‖²_F` over the full `X`, solving
/// `Aᴴ A X + λ X N = Aᴴ Y`. The solver is preconditioned with
/// `(I + λN)⁻¹ = V Vᴴ + N/(1+λ)`, which keeps large λ well conditioned.
pub fn penalized_subspace_recon<A: EncodingOperator + ?Sized>(
    op: &A,
    y: &[C64],
    basis: &SubspaceBasis,
    lambda: f64,
    opts: CgOptions,
    x0: Option<&CasoratiMatrix>,
) -> Result<LinearRecon> {
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(Error::Config(format!("lambda must be finite and >= 0, got {lambda}")));
    }
    let aty = adjoint(op, y)?;
    basis.check(&aty)?;
    if let Some(x0) = x0 {
        if !x0.same_shape(&aty) {
            return dim_err("initial guess shape does not match the operator");
        }
    }
    let null = basis.nullspace();
    let len = aty.data().len();
    let mut nx = vec![C64::new(0.0, 0.0); len];
    let apply = |x: &[C64], out: &mut [C64]| {
        normal_flat(op, x, out);
        if lambda > 0.0 {
            null.apply_flat(x, &mut nx);
            out.iter_mut().zip(&nx).for_each(|(o, v)| *o += lambda * v);
        }
    };
    let sol = if lambda > 0.0 {
        let shrink = 1.0 / (1.0 + lambda);
        let precond = |r: &[C64], out: &mut [C64]| {
            let p = basis.synthesize(&basis.coefficients(r));
            out.iter_mut()
                .zip(r.iter().zip(&p))
                .for_each(|(o, (ri, pi))| *o = pi + (ri - pi) * shrink);
        };
        pcg_solve(apply, precond, aty.data(), x0.map(|x| x.data()), opts)?
    } else {
        cg_solve(apply, aty.data(), x0.map(|x| x.data()), opts)?
    };
    log::debug!(
        "penalized subspace recon (lambda {lambda:.3e}): {} iterations, residual {:.2e}",
        sol.iterations,
        sol.relative_residual
    );
    Ok(LinearRecon {
        x: CasoratiMatrix::new(aty.height(), aty.width(), aty.frames(), sol.x)?,
        iterations: sol.iterations,
        relative_residual: sol.relative_residual,
        residual_history: sol.residual_history,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::acquisition::{forward, CartesianSense, NavigatorRow};
    use crate::numerics::{random_complex_tensor, RngSeed};
    use crate::phantom::CoilMapSet;
    use nalgebra::DMatrix;

    fn nav(data: ComplexTensor) -> NavigatorMatrix {
        let rows = data.dims()[0];
        NavigatorMatrix {
            rows: (0..rows)
                .map(|i| NavigatorRow {
                    spoke: 0,
                    position: i,
                    coil: 0,
                })
                .collect(),
            data,
        }
    }

    fn low_rank(rows: usize, n: usize, rank: usize, seed: u64) -> ComplexTensor {
        let mut rng = RngSeed(seed).rng();
        let a = random_complex_tensor(vec![rows, rank], &mut rng);
        let b = random_complex_tensor(vec![rank, n], &mut rng);
        a.matmul(&b).unwrap()
    }

    #[test]
    fn static_navigators_give_constant_basis() {
        let z = ComplexTensor::from_fn2(6, 10, |i, _| C64::new(1.0 + i as f64, 0.5));
        let b = estimate_basis(&nav(z), 1).unwrap();
        let expected = 1.0 / 10f64.sqrt();
        for j in 0..10 {
            assert!((b.v.get2(j, 0).norm() - expected).abs() < 1e-10);
            assert!((b.v.get2(j, 0) - b.v.get2(0, 0)).norm() < 1e-10);
        }
    }

    #[test]
    fn exact_rank_is_annihilated() {
        let z = low_rank(40, 25, 3, 1);
        let b = estimate_basis(&nav(z.clone()), 3).unwrap();
        let mut out = vec![C64::new(0.0, 0.0); z.len()];
        b.nullspace().apply_flat(z.data(), &mut out);
        let res: f64 = out.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
        assert!(res <= 1e-8 * z.norm());
    }

    #[test]
    fn captured_energy_matches_full_svd() {
        let mut rng = RngSeed(2).rng();
        let z = random_complex_tensor(vec![60, 40], &mut rng);
        let b = estimate_basis(&nav(z.clone()), 10).unwrap();
        let u = b.coefficients(z.data());
        let captured: f64 = u.iter().map(|v| v.norm_sqr()).sum::<f64>() / z.norm().powi(2);

        let m = DMatrix::from_row_slice(60, 40, z.data());
        let sv = m.singular_values();
        let mut s: Vec<f64> = sv.iter().copied().collect();
        s.sort_by(|a, b| b.total_cmp(a));
        let total: f64 = s.iter().map(|v| v * v).sum();
        let top: f64 = s[..10].iter().map(|v| v * v).sum();
        assert!((captured - top / total).abs() <= 1e-8);
    }

    #[test]
    fn projector_properties() {
        let mut rng = RngSeed(3).rng();
        let z = random_complex_tensor(vec![30, 12], &mut rng);
        let b = estimate_basis(&nav(z), 4).unwrap();
        let n = b.nullspace().to_dense();
        let nn = n.matmul(&n).unwrap();
        let nh = n.adjoint().unwrap();
        let mut trace = 0.0;
        for i in 0..12 {
            trace += n.get2(i, i).re;
            for j in 0..12 {
                assert!((nn.get2(i, j) - n.get2(i, j)).norm() < 1e-8);
                assert!((nh.get2(i, j) - n.get2(i, j)).norm() < 1e-12);
            }
        }
        assert!((trace - 8.0).abs() < 1e-6);
        assert_eq!(b.nullspace().trace(), 8.0);

        let x = CasoratiMatrix::from_tensor(random_complex_tensor(vec![16, 12], &mut rng), 4, 4).unwrap();
        let pen = b.nullspace().penalty(&x).unwrap();
        let inside = b.project(&x).unwrap().norm().powi(2);
        assert!((pen + inside - x.norm().powi(2)).abs() <= 1e-8 * x.norm().powi(2));
        assert!(b.nullspace().penalty(&b.project(&x).unwrap()).unwrap() <= 1e-10 * x.norm().powi(2));
    }

    #[test]
    fn rejects_non_orthonormal_columns() {
        let v = ComplexTensor::from_fn2(4, 2, |_, _| C64::new(1.0, 0.0));
        assert!(SubspaceBasis::from_columns(v, vec![1.0, 1.0], String::new()).is_err());
    }

    fn cartesian(frames: usize) -> CartesianSense {
        CartesianSense::new(CoilMapSet::uniform(8, 8), frames)
    }

    #[test]
    fn full_basis_cartesian_recovers_truth() {
        let mut rng = RngSeed(4).rng();
        let x = CasoratiMatrix::from_tensor(random_complex_tensor(vec![64, 6], &mut rng), 8, 8).unwrap();
        let op = cartesian(6);
        let y = forward(&op, &x).unwrap();
        let full = ComplexTensor::from_fn2(6, 6, |i, j| C64::new(if i == j { 1.0 } else { 0.0 }, 0.0));
        let b = SubspaceBasis::from_columns(full, vec![1.0; 6], String::new()).unwrap();
        let opts = CgOptions { tol: 1e-8, max_iter: 50 };
        let rec = subspace_recon(&op, &y, &b, opts).unwrap();
        assert!(rec.x.relative_distance(&x) <= 1e-8);
    }

    #[test]
    fn rank_one_gives_identical_frames() {
        let mut rng = RngSeed(5).rng();
        let img = random_complex_tensor(vec![64], &mut rng).into_data();
        let frames: Vec<Vec<C64>> = (0..5).map(|_| img.clone()).collect();
        let x = CasoratiMatrix::from_frames(8, 8, &frames).unwrap();
        let op = cartesian(5);
        let y = forward(&op, &x).unwrap();
        let b = estimate_basis(&nav(ComplexTensor::from_fn2(3, 5, |i, _| C64::new(i as f64 + 1.0, 0.0))), 1).unwrap();
        let rec = subspace_recon(&op, &y, &b, CgOptions::default()).unwrap();
        for t in 1..5 {
            for (a, c) in rec.x.frame(t).iter().zip(rec.x.frame(0)) {
                assert!((a - c).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn zero_lambda_is_least_squares() {
        let mut rng = RngSeed(6).rng();
        let x = CasoratiMatrix::from_tensor(random_complex_tensor(vec![64, 5], &mut rng), 8, 8).unwrap();
        let op = cartesian(5);
        let y = forward(&op, &x).unwrap();
        let b = estimate_basis(&nav(random_complex_tensor(vec![4, 5], &mut rng)), 2).unwrap();
        let opts = CgOptions { tol: 1e-10, max_iter: 50 };
        let rec = penalized_subspace_recon(&op, &y, &b, 0.0, opts, None).unwrap();
        assert!(rec.x.relative_distance(&x) <= 1e-6);
    }

    #[test]
    fn negative_lambda_rejected() {
        let op = cartesian(3);
        let b = estimate_basis(&nav(ComplexTensor::from_fn2(2, 3, |i, j| C64::new((i + j) as f64, 1.0))), 1).unwrap();
        let y = vec![C64::new(0.0, 0.0); op.measurement_len()];
        assert!(matches!(
            penalized_subspace_recon(&op, &y, &b, -1.0, CgOptions::default(), None),
            Err(Error::Config(_))
        ));
    }
}
