use std::f64::consts::PI;

use rayon::prelude::*;

use super::nufft::{NufftPlan, Stencil};
use super::trajectory::RadialTrajectory;
use crate::error::{dim_err, Result};
use crate::numerics::{fft2_centered, CasoratiMatrix, ComplexTensor, C64};
use crate::phantom::CoilMapSet;

/// Frame-separable multi-coil encoding `A`. Measurements for frame `t` are a
/// flat vector of `samples_per_frame()` values; the full measurement vector
/// is the frame-major concatenation.
pub trait EncodingOperator: Sync {
    fn image_shape(&self) -> (usize, usize);
    fn n_frames(&self) -> usize;
    fn samples_per_frame(&self) -> usize;
    fn forward_frame(&self, frame: usize, image: &[C64]) -> Vec<C64>;
    fn adjoint_frame(&self, frame: usize, samples: &[C64]) -> Vec<C64>;

    fn normal_frame(&self, frame: usize, image: &[C64]) -> Vec<C64> {
        self.adjoint_frame(frame, &self.forward_frame(frame, image))
    }

    /// Direct (non-iterative) image estimate used for initialization.
    fn gridding_frame(&self, frame: usize, samples: &[C64]) -> Vec<C64> {
        self.adjoint_frame(frame, samples)
    }

    fn measurement_len(&self) -> usize {
        self.n_frames() * self.samples_per_frame()
    }
}

fn check_casorati<A: EncodingOperator + ?Sized>(op: &A, x: &CasoratiMatrix) -> Result<()> {
    let (h, w) = op.image_shape();
    if x.height() != h || x.width() != w || x.frames() != op.n_frames() {
        return dim_err(format!(
            "operator expects {h}x{w}x{} images, got {}x{}x{}",
            op.n_frames(),
            x.height(),
            x.width(),
            x.frames()
        ));
    }
    Ok(())
}

fn check_measurements<A: EncodingOperator + ?Sized>(op: &A, y: &[C64]) -> Result<()> {
    if y.len() != op.measurement_len() {
        return dim_err(format!(
            "operator expects {} measurements, got {}",
            op.measurement_len(),
            y.len()
        ));
    }
    Ok(())
}

/// `A(X)`, frame-parallel.
pub fn forward<A: EncodingOperator + ?Sized>(op: &A, x: &CasoratiMatrix) -> Result<Vec<C64>> {
    check_casorati(op, x)?;
    let parts: Vec<Vec<C64>> = (0..op.n_frames())
        .into_par_iter()
        .map(|t| op.forward_frame(t, &x.frame(t)))
        .collect();
    Ok(parts.concat())
}

fn per_frame_to_casorati<A, F>(op: &A, y: &[C64], f: F) -> Result<CasoratiMatrix>
where
    A: EncodingOperator + ?Sized,
    F: Fn(usize, &[C64]) -> Vec<C64> + Sync,
{
    check_measurements(op, y)?;
    let (h, w) = op.image_shape();
    let spf = op.samples_per_frame();
    let frames: Vec<Vec<C64>> = (0..op.n_frames())
        .into_par_iter()
        .map(|t| f(t, &y[t * spf..(t + 1) * spf]))
        .collect();
    CasoratiMatrix::from_frames(h, w, &frames)
}

/// `Aᴴ(Y)`.
pub fn adjoint<A: EncodingOperator + ?Sized>(op: &A, y: &[C64]) -> Result<CasoratiMatrix> {
    per_frame_to_casorati(op, y, |t, s| op.adjoint_frame(t, s))
}

/// Zero-filled, density-compensated reconstruction.
pub fn gridding<A: EncodingOperator + ?Sized>(op: &A, y: &[C64]) -> Result<CasoratiMatrix> {
    per_frame_to_casorati(op, y, |t, s| op.gridding_frame(t, s))
}

/// `AᴴA(X)`.
pub fn normal<A: EncodingOperator + ?Sized>(op: &A, x: &CasoratiMatrix) -> Result<CasoratiMatrix> {
    check_casorati(op, x)?;
    let mut out = CasoratiMatrix::zeros(x.height(), x.width(), x.frames());
    normal_flat(op, x.data(), out.data_mut());
    Ok(out)
}

/// `AᴴA` on a flat row-major Casorati buffer.
pub(crate) fn normal_flat<A: EncodingOperator + ?Sized>(op: &A, x: &[C64], out: &mut [C64]) {
    let n = op.n_frames();
    let frames: Vec<Vec<C64>> = (0..n)
        .into_par_iter()
        .map(|t| {
            let col: Vec<C64> = x.iter().skip(t).step_by(n).copied().collect();
            op.normal_frame(t, &col)
        })
        .collect();
    for (t, f) in frames.iter().enumerate() {
        for (p, v) in f.iter().enumerate() {
            out[p * n + t] = *v;
        }
    }
}

/// Multi-coil radial SENSE operator backed by the gridding NUFFT.
#[derive(Clone, Debug)]
pub struct RadialSense {
    trajectory: RadialTrajectory,
    coils: CoilMapSet,
    plan: NufftPlan,
    stencils: Vec<Vec<Stencil>>,
    dcf: Vec<Vec<f64>>,
    inv_sos: Vec<f64>,
}

impl RadialSense {
    pub fn new(trajectory: RadialTrajectory, coils: CoilMapSet) -> Result<Self> {
        let (h, w) = (coils.height, coils.width);
        let plan = NufftPlan::new(h, w);
        let stencils = (0..trajectory.n_frames)
            .map(|t| plan.stencils(&trajectory.frame_coords(t)))
            .collect::<Result<Vec<_>>>()?;
        let dcf = (0..trajectory.n_frames)
            .map(|_| ramp_density(&trajectory, h, w))
            .collect();
        let sos = coils.sum_of_squares();
        let floor = 1e-6 * sos.iter().cloned().fold(0.0, f64::max);
        let inv_sos = sos
            .iter()
            .map(|&s| if s > floor { 1.0 / s } else { 0.0 })
            .collect();
        Ok(Self {
            trajectory,
            coils,
            plan,
            stencils,
            dcf,
            inv_sos,
        })
    }

    pub fn trajectory(&self) -> &RadialTrajectory {
        &self.trajectory
    }

    pub fn coils(&self) -> &CoilMapSet {
        &self.coils
    }

    pub fn n_coils(&self) -> usize {
        self.coils.n_coils()
    }

    /// Coil-combined adjoint with optional per-sample weights.
    fn adjoint_weighted(&self, frame: usize, samples: &[C64], weights: Option<&[f64]>) -> Vec<C64> {
        let m = self.plan.height() * self.plan.width();
        let per_coil = self.trajectory.samples_per_frame();
        let mut out = vec![C64::new(0.0, 0.0); m];
        let mut img = vec![C64::new(0.0, 0.0); m];
        for (c, map) in self.coils.maps.iter().enumerate() {
            let ys = &samples[c * per_coil..(c + 1) * per_coil];
            self.plan.adjoint(ys, &self.stencils[frame], weights, &mut img);
            for ((o, v), s) in out.iter_mut().zip(&img).zip(map) {
                *o += s.conj() * v;
            }
        }
        out
    }
}

/// Ramp (|k|) density compensation for one frame. Each sample gets the
/// polar area element `|k| Δk Δθ` with `Δθ = π / spokes`; the k = 0 samples
/// share the central disc of radius `Δk/2`. Scaled so `Aᴴ W A` approximates
/// the identity for a fully sampled disc.
pub fn ramp_density(traj: &RadialTrajectory, height: usize, width: usize) -> Vec<f64> {
    let dk = traj.delta_k();
    let spokes = traj.spokes_per_frame as f64;
    let dtheta = PI / spokes;
    let norm = (height * width) as f64 / (4.0 * PI * PI);
    let mut out = Vec::with_capacity(traj.samples_per_frame());
    for _ in 0..traj.spokes_per_frame {
        for p in 0..traj.n_readout {
            let k = traj.kappa(p).abs();
            let area = if k == 0.0 {
                PI * (dk / 2.0).powi(2) / spokes
            } else {
                k * dk * dtheta
            };
            out.push(area * norm);
        }
    }
    out
}

impl EncodingOperator for RadialSense {
    fn image_shape(&self) -> (usize, usize) {
        (self.plan.height(), self.plan.width())
    }

    fn n_frames(&self) -> usize {
        self.trajectory.n_frames
    }

    fn samples_per_frame(&self) -> usize {
        self.n_coils() * self.trajectory.samples_per_frame()
    }

    fn forward_frame(&self, frame: usize, image: &[C64]) -> Vec<C64> {
        let per_coil = self.trajectory.samples_per_frame();
        let mut out = vec![C64::new(0.0, 0.0); self.samples_per_frame()];
        let mut weighted = vec![C64::new(0.0, 0.0); image.len()];
        for (c, map) in self.coils.maps.iter().enumerate() {
            for ((w, x), s) in weighted.iter_mut().zip(image).zip(map) {
                *w = x * s;
            }
            self.plan.forward(
                &weighted,
                &self.stencils[frame],
                &mut out[c * per_coil..(c + 1) * per_coil],
            );
        }
        out
    }

    fn adjoint_frame(&self, frame: usize, samples: &[C64]) -> Vec<C64> {
        self.adjoint_weighted(frame, samples, None)
    }

    fn gridding_frame(&self, frame: usize, samples: &[C64]) -> Vec<C64> {
        let mut img = self.adjoint_weighted(frame, samples, Some(&self.dcf[frame]));
        for (v, s) in img.iter_mut().zip(&self.inv_sos) {
            *v *= *s;
        }
        img
    }
}

/// Fully sampled Cartesian multi-coil operator (orthonormal centred FFT per
/// coil). Used as an exactly invertible reference.
#[derive(Clone, Debug)]
pub struct CartesianSense {
    coils: CoilMapSet,
    n_frames: usize,
}

impl CartesianSense {
    pub fn new(coils: CoilMapSet, n_frames: usize) -> Self {
        Self { coils, n_frames }
    }
}

impl EncodingOperator for CartesianSense {
    fn image_shape(&self) -> (usize, usize) {
        (self.coils.height, self.coils.width)
    }

    fn n_frames(&self) -> usize {
        self.n_frames
    }

    fn samples_per_frame(&self) -> usize {
        self.coils.n_coils() * self.coils.height * self.coils.width
    }

    fn forward_frame(&self, _frame: usize, image: &[C64]) -> Vec<C64> {
        let (h, w) = self.image_shape();
        let mut out = Vec::with_capacity(self.samples_per_frame());
        for map in &self.coils.maps {
            let weighted = image.iter().zip(map).map(|(x, s)| x * s).collect();
            let t = ComplexTensor::new(vec![h, w], weighted).expect("shape");
            out.extend(fft2_centered(&t, false).expect("power-of-two grid").into_data());
        }
        out
    }

    fn adjoint_frame(&self, _frame: usize, samples: &[C64]) -> Vec<C64> {
        let (h, w) = self.image_shape();
        let m = h * w;
        let mut out = vec![C64::new(0.0, 0.0); m];
        for (c, map) in self.coils.maps.iter().enumerate() {
            let t = ComplexTensor::new(vec![h, w], samples[c * m..(c + 1) * m].to_vec()).expect("shape");
            let img = fft2_centered(&t, true).expect("power-of-two grid");
            for ((o, v), s) in out.iter_mut().zip(img.data()).zip(map) {
                *o += s.conj() * v;
            }
        }
        out
    }

    fn gridding_frame(&self, frame: usize, samples: &[C64]) -> Vec<C64> {
        let sos = self.coils.sum_of_squares();
        let mut img = self.adjoint_frame(frame, samples);
        for (v, s) in img.iter_mut().zip(sos) {
            if s > 0.0 {
                *v /= s;
            }
        }
        img
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::acquisition::nufft::direct_nudft;
    use crate::acquisition::trajectory::golden_angle_trajectory;
    use crate::numerics::{complex_gaussian, dot, random_complex_tensor, RngSeed};
    use crate::phantom::generate_coil_maps;

    fn random_casorati(h: usize, w: usize, n: usize, seed: u64) -> CasoratiMatrix {
        let mut rng = RngSeed(seed).rng();
        let data = (0..h * w * n).map(|_| complex_gaussian(&mut rng, 1.0)).collect();
        CasoratiMatrix::new(h, w, n, data).unwrap()
    }

    #[test]
    fn adjoint_identity() {
        for (h, w, spokes, coils) in [(16, 16, 5, 3), (32, 16, 7, 2), (32, 32, 10, 4)] {
            let traj = golden_angle_trajectory(3, spokes, 2 * h.max(w)).unwrap();
            let maps = generate_coil_maps(h, w, coils, RngSeed(1)).unwrap();
            let op = RadialSense::new(traj, maps).unwrap();
            for seed in 0..3 {
                let x = random_casorati(h, w, 3, seed);
                let mut rng = RngSeed(100 + seed).rng();
                let y: Vec<C64> = (0..op.measurement_len())
                    .map(|_| complex_gaussian(&mut rng, 1.0))
                    .collect();
                let ax = forward(&op, &x).unwrap();
                let ahy = adjoint(&op, &y).unwrap();
                let lhs = dot(&y, &ax);
                let rhs = dot(ahy.data(), x.data());
                let rel = (lhs - rhs).norm() / (x.norm() * crate::numerics::norm(&y));
                assert!(rel <= 1e-10, "{h}x{w}: {rel}");
            }
        }
    }

    #[test]
    fn forward_is_linear() {
        let traj = golden_angle_trajectory(2, 4, 32).unwrap();
        let maps = generate_coil_maps(16, 16, 2, RngSeed(2)).unwrap();
        let op = RadialSense::new(traj, maps).unwrap();
        let x1 = random_casorati(16, 16, 2, 1);
        let x2 = random_casorati(16, 16, 2, 2);
        let alpha = C64::new(0.3, -1.7);
        let mut comb = x2.clone();
        for (c, a) in comb.data_mut().iter_mut().zip(x1.data()) {
            *c += alpha * a;
        }
        let lhs = forward(&op, &comb).unwrap();
        let f1 = forward(&op, &x1).unwrap();
        let f2 = forward(&op, &x2).unwrap();
        let scale = crate::numerics::norm(&lhs);
        for i in 0..lhs.len() {
            assert!((lhs[i] - (alpha * f1[i] + f2[i])).norm() <= 1e-12 * scale);
        }
    }

    #[test]
    fn zero_in_zero_out() {
        let traj = golden_angle_trajectory(2, 4, 32).unwrap();
        let op = RadialSense::new(traj, CoilMapSet::uniform(16, 16)).unwrap();
        let y = forward(&op, &CasoratiMatrix::zeros(16, 16, 2)).unwrap();
        assert!(y.iter().all(|v| v.norm() == 0.0));
        let x = adjoint(&op, &vec![C64::new(0.0, 0.0); op.measurement_len()]).unwrap();
        assert!(x.data().iter().all(|v| v.norm() == 0.0));
    }

    #[test]
    fn centered_delta_has_flat_spokes() {
        let traj = golden_angle_trajectory(1, 6, 64).unwrap();
        let op = RadialSense::new(traj, CoilMapSet::uniform(32, 32)).unwrap();
        let mut img = vec![C64::new(0.0, 0.0); 32 * 32];
        img[16 * 32 + 16] = C64::new(1.0, 0.0);
        let y = op.forward_frame(0, &img);
        let expected = 1.0 / 32.0;
        for v in y {
            assert!((v.norm() - expected).abs() <= 1e-3 * expected, "{} vs {expected}", v.norm());
        }
    }

    #[test]
    fn matches_direct_nudft() {
        let mut rng = RngSeed(8).rng();
        let img = random_complex_tensor(vec![32, 32], &mut rng).into_data();
        let traj = RadialTrajectory::uniform(16, 64).unwrap();
        let coords = traj.frame_coords(0);
        let op = RadialSense::new(traj, CoilMapSet::uniform(32, 32)).unwrap();
        let fast = op.forward_frame(0, &img);
        let exact = direct_nudft(&img, 32, 32, &coords);
        let peak = exact.iter().map(|v| v.norm()).fold(0.0, f64::max);
        let err = fast
            .iter()
            .zip(&exact)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        assert!(err / peak <= 1e-3, "max rel err {}", err / peak);
    }

    #[test]
    fn fully_sampled_gridding_round_trip() {
        let (h, w) = (128, 128);
        let traj = RadialTrajectory::uniform(402, 256).unwrap();
        let op = RadialSense::new(traj, CoilMapSet::uniform(h, w)).unwrap();
        let img: Vec<C64> = (0..h * w)
            .map(|p| {
                let (y, x) = ((p / w) as f64 - 64.0, (p % w) as f64 - 64.0);
                C64::new((-(x * x + y * y) / (2.0 * 14.0 * 14.0)).exp(), 0.0)
            })
            .collect();
        let y = op.forward_frame(0, &img);
        let rec = op.gridding_frame(0, &y);
        let err: f64 = rec
            .iter()
            .zip(&img)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt();
        let rel = err / crate::numerics::norm(&img);
        assert!(rel <= 5e-2, "relative error {rel}");
    }

    #[test]
    fn cartesian_single_coil_is_unitary() {
        let op = CartesianSense::new(CoilMapSet::uniform(8, 8), 2);
        let x = random_casorati(8, 8, 2, 5);
        let back = adjoint(&op, &forward(&op, &x).unwrap()).unwrap();
        assert!(back.relative_distance(&x) < 1e-12);
    }
}
