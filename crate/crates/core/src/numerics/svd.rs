use rand::Rng;

use super::{axpy, complex_gaussian, dot, norm, ComplexTensor, RngSeed, C64};
use crate::error::{dim_err, Error, Result};

const MAX_ITERS: usize = 500;
const ANGLE_TOL: f64 = 1e-10;
const OVERSAMPLE: usize = 10;

/// Leading singular triplets: `mat ≈ u · diag(s) · vᴴ`.
#[derive(Clone, Debug)]
pub struct TruncatedSvd {
    /// p x r, orthonormal columns.
    pub u: ComplexTensor,
    /// Non-increasing, non-negative.
    pub s: Vec<f64>,
    /// n x r, orthonormal columns.
    pub v: ComplexTensor,
    pub iterations: usize,
}

impl TruncatedSvd {
    /// `u · diag(s) · vᴴ` as a dense p x n matrix.
    pub fn reconstruct(&self) -> ComplexTensor {
        let (p, r) = self.u.shape2().unwrap();
        let (n, _) = self.v.shape2().unwrap();
        ComplexTensor::from_fn2(p, n, |i, j| {
            (0..r)
                .map(|l| self.u.get2(i, l) * self.s[l] * self.v.get2(j, l).conj())
                .sum()
        })
    }
}

/// Top-`r` SVD by block subspace iteration on `MᴴM` with Rayleigh–Ritz
/// extraction. The block carries a few extra vectors beyond `r` to speed up
/// convergence; iteration stops once the top-`r` right singular subspace
/// moves by less than `1e-10` between sweeps.
pub fn truncated_svd(mat: &ComplexTensor, r: usize) -> Result<TruncatedSvd> {
    let (p, n) = mat.shape2()?;
    let min_dim = p.min(n);
    if r == 0 || r > min_dim {
        return dim_err(format!("rank {r} outside 1..={min_dim} for a {p}x{n} matrix"));
    }
    let k = (r + OVERSAMPLE).min(min_dim);
    let m = mat.data();

    let mut rng = RngSeed(0x5bd1_e995).rng();
    let mut q: Vec<Vec<C64>> = (0..k)
        .map(|_| (0..n).map(|_| complex_gaussian(&mut rng, 1.0)).collect())
        .collect();
    orthonormalize(&mut q, &mut rng);

    let mut prev: Option<Vec<Vec<C64>>> = None;
    for it in 1..=MAX_ITERS {
        let mut b: Vec<Vec<C64>> = q.iter().map(|col| mat_vec(m, p, n, col)).collect();
        let w = hestenes(&mut b);
        let v: Vec<Vec<C64>> = combine(&q, &w);
        let sigma: Vec<f64> = b.iter().map(|c| norm(c)).collect();

        let converged = match &prev {
            Some(pv) => subspace_change(pv, &v[..r]) < ANGLE_TOL,
            None => k == n,
        };
        if converged || !sigma.iter().all(|s| s.is_finite()) {
            if !sigma.iter().all(|s| s.is_finite()) {
                return Err(Error::Numerical("non-finite singular value estimate".into()));
            }
            return Ok(finish(b, sigma, v, r, p, n, it, &mut rng));
        }
        prev = Some(v[..r].to_vec());

        // B now holds M V = U Σ; the next block is orth(Mᴴ U Σ).
        q = b.iter().map(|col| mat_adj_vec(m, p, n, col)).collect();
        orthonormalize(&mut q, &mut rng);
    }
    Err(Error::Numerical(format!(
        "truncated SVD (rank {r}) did not converge in {MAX_ITERS} iterations"
    )))
}

#[allow(clippy::too_many_arguments)]
fn finish(
    b: Vec<Vec<C64>>,
    sigma: Vec<f64>,
    v: Vec<Vec<C64>>,
    r: usize,
    p: usize,
    n: usize,
    iterations: usize,
    rng: &mut impl Rng,
) -> TruncatedSvd {
    let smax = sigma[0].max(f64::MIN_POSITIVE);
    let mut ucols: Vec<Vec<C64>> = Vec::with_capacity(r);
    for (j, col) in b.into_iter().take(r).enumerate() {
        if sigma[j] > 1e-13 * smax {
            ucols.push(col.iter().map(|z| z / sigma[j]).collect());
        } else {
            // Arbitrary orthonormal completion for numerically zero σ.
            let mut c: Vec<C64> = (0..p).map(|_| complex_gaussian(rng, 1.0)).collect();
            for _ in 0..2 {
                for u in &ucols {
                    let h = dot(u, &c);
                    axpy(-h, u, &mut c);
                }
            }
            let nrm = norm(&c);
            ucols.push(c.iter().map(|z| z / nrm).collect());
        }
    }
    let s: Vec<f64> = sigma[..r]
        .iter()
        .map(|&x| if x > 1e-13 * smax { x } else { 0.0 })
        .collect();
    let u = ComplexTensor::from_fn2(p, r, |i, j| ucols[j][i]);
    let v = ComplexTensor::from_fn2(n, r, |i, j| v[j][i]);
    TruncatedSvd {
        u,
        s,
        v,
        iterations,
    }
}

fn mat_vec(m: &[C64], p: usize, n: usize, x: &[C64]) -> Vec<C64> {
    (0..p)
        .map(|i| {
            let row = &m[i * n..(i + 1) * n];
            row.iter().zip(x).map(|(a, b)| a * b).sum()
        })
        .collect()
}

fn mat_adj_vec(m: &[C64], p: usize, n: usize, y: &[C64]) -> Vec<C64> {
    let mut out = vec![C64::new(0.0, 0.0); n];
    for (i, yi) in y.iter().enumerate().take(p) {
        if *yi == C64::new(0.0, 0.0) {
            continue;
        }
        let row = &m[i * n..(i + 1) * n];
        for (o, a) in out.iter_mut().zip(row) {
            *o += a.conj() * yi;
        }
    }
    out
}

/// Columns of `basis · w`, with `w` given as columns.
fn combine(basis: &[Vec<C64>], w: &[Vec<C64>]) -> Vec<Vec<C64>> {
    let len = basis[0].len();
    w.iter()
        .map(|wc| {
            let mut out = vec![C64::new(0.0, 0.0); len];
            for (bc, coef) in basis.iter().zip(wc) {
                axpy(*coef, bc, &mut out);
            }
            out
        })
        .collect()
}

/// `‖V − P Pᴴ V‖_F` for orthonormal column sets `P`, `V`: the sine of the
/// principal angles between the two subspaces, accumulated.
fn subspace_change(prev: &[Vec<C64>], v: &[Vec<C64>]) -> f64 {
    let mut total = 0.0;
    for col in v {
        let mut res = col.clone();
        for pc in prev {
            let h = dot(pc, col);
            axpy(-h, pc, &mut res);
        }
        total += super::norm_sqr(&res);
    }
    total.sqrt()
}

/// Modified Gram–Schmidt with one re-orthogonalization pass. Columns that
/// collapse are replaced by fresh random directions.
fn orthonormalize(cols: &mut [Vec<C64>], rng: &mut impl Rng) {
    for j in 0..cols.len() {
        let original = norm(&cols[j]);
        let mut attempts = 0;
        loop {
            for _ in 0..2 {
                for i in 0..j {
                    let (done, rest) = cols.split_at_mut(j);
                    let h = dot(&done[i], &rest[0]);
                    axpy(-h, &done[i], &mut rest[0]);
                }
            }
            let nrm = norm(&cols[j]);
            if nrm > 1e-10 * original.max(f64::MIN_POSITIVE) && nrm > 0.0 || attempts > 8 {
                cols[j].iter_mut().for_each(|z| *z /= nrm);
                break;
            }
            attempts += 1;
            let len = cols[j].len();
            cols[j] = (0..len).map(|_| complex_gaussian(rng, 1.0)).collect();
        }
    }
}

/// One-sided (Hestenes) Jacobi: rotates the columns of `b` in place until
/// they are mutually orthogonal, sorts them by decreasing norm, and returns
/// the accumulated unitary as columns. Afterwards `b_in · w = b_out`.
fn hestenes(b: &mut [Vec<C64>]) -> Vec<Vec<C64>> {
    let k = b.len();
    let mut w: Vec<Vec<C64>> = (0..k)
        .map(|j| {
            let mut c = vec![C64::new(0.0, 0.0); k];
            c[j] = C64::new(1.0, 0.0);
            c
        })
        .collect();
    for _sweep in 0..80 {
        let mut rotated = false;
        for i in 0..k {
            for j in i + 1..k {
                let alpha = super::norm_sqr(&b[i]);
                let beta = super::norm_sqr(&b[j]);
                let gamma = dot(&b[i], &b[j]);
                let g = gamma.norm();
                if g == 0.0 || g <= 1e-15 * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let phase = gamma / g; // e^{iφ}
                let zeta = (beta - alpha) / (2.0 * g);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let t = if zeta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate(b, i, j, c, s, phase);
                rotate(&mut w, i, j, c, s, phase);
            }
        }
        if !rotated {
            break;
        }
    }
    let mut order: Vec<usize> = (0..k).collect();
    let norms: Vec<f64> = b.iter().map(|c| norm(c)).collect();
    order.sort_by(|&x, &y| norms[y].partial_cmp(&norms[x]).unwrap_or(std::cmp::Ordering::Equal));
    let sorted_b: Vec<Vec<C64>> = order.iter().map(|&j| b[j].clone()).collect();
    let sorted_w: Vec<Vec<C64>> = order.iter().map(|&j| w[j].clone()).collect();
    b.clone_from_slice(&sorted_b);
    sorted_w
}

/// Column rotation with `d = e^{-iφ} col_j`:
/// `col_i ← c·col_i − s·d`, `col_j ← s·col_i + c·d`.
fn rotate(cols: &mut [Vec<C64>], i: usize, j: usize, c: f64, s: f64, phase: C64) {
    let (lo, hi) = cols.split_at_mut(j);
    let ci = &mut lo[i];
    let cj = &mut hi[0];
    let ph = phase.conj();
    for (a, b) in ci.iter_mut().zip(cj.iter_mut()) {
        let d = ph * *b;
        let ai = *a;
        *a = ai * c - d * s;
        *b = ai * s + d * c;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::random_complex_tensor;
    use nalgebra::DMatrix;

    fn to_na(t: &ComplexTensor) -> DMatrix<C64> {
        let (r, c) = t.shape2().unwrap();
        DMatrix::from_fn(r, c, |i, j| t.get2(i, j))
    }

    fn assert_orthonormal(v: &ComplexTensor, tol: f64) {
        let g = v.adjoint().unwrap().matmul(v).unwrap();
        let (r, _) = g.shape2().unwrap();
        for i in 0..r {
            for j in 0..r {
                let e = if i == j { 1.0 } else { 0.0 };
                assert!((g.get2(i, j) - e).norm() < tol, "VᴴV[{i},{j}] = {}", g.get2(i, j));
            }
        }
    }

    #[test]
    fn identity_has_unit_singular_values() {
        let id = ComplexTensor::from_fn2(4, 4, |i, j| {
            C64::new(if i == j { 1.0 } else { 0.0 }, 0.0)
        });
        let svd = truncated_svd(&id, 4).unwrap();
        for s in &svd.s {
            assert!((s - 1.0).abs() < 1e-12);
        }
        assert_orthonormal(&svd.v, 1e-10);
    }

    #[test]
    fn rank_one_outer_product() {
        let mut rng = RngSeed(5).rng();
        let a = random_complex_tensor(vec![9], &mut rng).into_data();
        let b = random_complex_tensor(vec![13], &mut rng).into_data();
        let mat = ComplexTensor::from_fn2(9, 13, |i, j| a[i] * b[j].conj());
        let svd = truncated_svd(&mat, 1).unwrap();
        assert!((svd.s[0] - norm(&a) * norm(&b)).abs() < 1e-10 * svd.s[0]);
        let rec = svd.reconstruct();
        let err: f64 = rec
            .data()
            .iter()
            .zip(mat.data())
            .map(|(x, y)| (x - y).norm_sqr())
            .sum::<f64>()
            .sqrt();
        assert!(err < 1e-10 * mat.norm());
    }

    #[test]
    fn discarded_energy_matches_full_svd() {
        let mut rng = RngSeed(9).rng();
        let mat = random_complex_tensor(vec![30, 50], &mut rng);
        let svd = truncated_svd(&mat, 5).unwrap();
        let full = to_na(&mat).svd(false, false);
        let mut all: Vec<f64> = full.singular_values.iter().copied().collect();
        all.sort_by(|a, b| b.partial_cmp(a).unwrap());
        let discarded: f64 = all[5..].iter().map(|s| s * s).sum();
        let rec = svd.reconstruct();
        let resid: f64 = rec
            .data()
            .iter()
            .zip(mat.data())
            .map(|(x, y)| (x - y).norm_sqr())
            .sum();
        assert!(((resid - discarded) / discarded).abs() < 1e-6, "{resid} vs {discarded}");
        for (s, e) in svd.s.iter().zip(&all) {
            assert!((s - e).abs() < 1e-8 * e);
        }
        assert_orthonormal(&svd.v, 1e-8);
        assert_orthonormal(&svd.u, 1e-8);
    }

    #[test]
    fn tall_and_rank_deficient() {
        let mut rng = RngSeed(10).rng();
        let l = random_complex_tensor(vec![40, 3], &mut rng);
        let r = random_complex_tensor(vec![3, 12], &mut rng);
        let mat = l.matmul(&r).unwrap();
        let svd = truncated_svd(&mat, 6).unwrap();
        assert!(svd.s[3..].iter().all(|&s| s == 0.0));
        assert!(svd.s.windows(2).all(|w| w[0] >= w[1]));
        assert_orthonormal(&svd.v, 1e-8);
        assert_orthonormal(&svd.u, 1e-8);
    }

    #[test]
    fn rank_out_of_range() {
        let mat = ComplexTensor::zeros(vec![3, 4]);
        assert!(matches!(truncated_svd(&mat, 0), Err(Error::Dimension(_))));
        assert!(matches!(truncated_svd(&mat, 4), Err(Error::Dimension(_))));
    }

    proptest::proptest! {
        #![proptest_config(proptest::prelude::ProptestConfig::with_cases(16))]
        #[test]
        fn right_vectors_orthonormal(seed in 0u64..1000, p in 3usize..25, n in 3usize..25, r in 1usize..4) {
            let mut rng = RngSeed(seed).rng();
            let mat = random_complex_tensor(vec![p, n], &mut rng);
            let svd = truncated_svd(&mat, r.min(p.min(n))).unwrap();
            assert_orthonormal(&svd.v, 1e-8);
            proptest::prop_assert!(svd.s.windows(2).all(|w| w[0] >= w[1]));
        }
    }
}
