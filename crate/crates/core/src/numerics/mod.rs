//! Complex linear algebra kernels shared by the rest of the crate.
//!
//! Everything here is 64-bit and single-threaded unless a caller opts into
//! frame-level parallelism; results never depend on the thread count.

mod cg;
mod fft;
mod svd;

pub use cg::{cg_solve, pcg_solve, CgOptions, CgOutcome};
pub use fft::{fft2_centered, fft_shift_1d, Fft2};
pub use svd::{truncated_svd, TruncatedSvd};

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{dim_err, Result};

pub type C64 = Complex64;

/// Dense n-dimensional complex array, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexTensor {
    dims: Vec<usize>,
    data: Vec<C64>,
}

impl ComplexTensor {
    pub fn new(dims: Vec<usize>, data: Vec<C64>) -> Result<Self> {
        if dims.contains(&0) {
            return dim_err(format!("zero extent in dims {dims:?}"));
        }
        let len: usize = dims.iter().product();
        if len != data.len() {
            return dim_err(format!(
                "dims {dims:?} need {len} values, got {}",
                data.len()
            ));
        }
        Ok(Self { dims, data })
    }

    pub fn zeros(dims: Vec<usize>) -> Self {
        let len = dims.iter().product();
        Self {
            dims,
            data: vec![C64::new(0.0, 0.0); len],
        }
    }

    pub fn from_fn2(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self {
            dims: vec![rows, cols],
            data,
        }
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn data(&self) -> &[C64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [C64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<C64> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// (rows, cols) of a 2-D tensor.
    pub fn shape2(&self) -> Result<(usize, usize)> {
        match self.dims.as_slice() {
            &[r, c] => Ok((r, c)),
            d => dim_err(format!("expected a matrix, got dims {d:?}")),
        }
    }

    pub fn get2(&self, i: usize, j: usize) -> C64 {
        self.data[i * self.dims[1] + j]
    }

    pub fn norm(&self) -> f64 {
        norm(&self.data)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    pub fn reshape(self, dims: Vec<usize>) -> Result<Self> {
        Self::new(dims, self.data)
    }

    /// Conjugate transpose of a matrix.
    pub fn adjoint(&self) -> Result<Self> {
        let (r, c) = self.shape2()?;
        Ok(Self::from_fn2(c, r, |i, j| self.get2(j, i).conj()))
    }

    /// Dense matrix product `self * rhs`.
    pub fn matmul(&self, rhs: &Self) -> Result<Self> {
        let (m, k) = self.shape2()?;
        let (k2, n) = rhs.shape2()?;
        if k != k2 {
            return dim_err(format!("matmul {m}x{k} by {k2}x{n}"));
        }
        let mut out = vec![C64::new(0.0, 0.0); m * n];
        for i in 0..m {
            let orow = &mut out[i * n..(i + 1) * n];
            for l in 0..k {
                let a = self.data[i * k + l];
                if a == C64::new(0.0, 0.0) {
                    continue;
                }
                let brow = &rhs.data[l * n..(l + 1) * n];
                for (o, b) in orow.iter_mut().zip(brow) {
                    *o += a * b;
                }
            }
        }
        Self::new(vec![m, n], out)
    }
}

/// Dynamic image series stored as a pixels-by-frames matrix.
///
/// Row `p` is the time profile of pixel `p` (raster order over
/// `height x width`), column `t` is frame `t`.
#[derive(Clone, Debug, PartialEq)]
pub struct CasoratiMatrix {
    height: usize,
    width: usize,
    frames: usize,
    data: Vec<C64>,
}

impl CasoratiMatrix {
    pub fn new(height: usize, width: usize, frames: usize, data: Vec<C64>) -> Result<Self> {
        if height == 0 || width == 0 || frames == 0 {
            return dim_err("Casorati matrix needs positive extents");
        }
        if data.len() != height * width * frames {
            return dim_err(format!(
                "{height}x{width}x{frames} Casorati matrix needs {} values, got {}",
                height * width * frames,
                data.len()
            ));
        }
        Ok(Self {
            height,
            width,
            frames,
            data,
        })
    }

    pub fn zeros(height: usize, width: usize, frames: usize) -> Self {
        Self {
            height,
            width,
            frames,
            data: vec![C64::new(0.0, 0.0); height * width * frames],
        }
    }

    /// Build from frame images, each `height * width` long.
    pub fn from_frames(height: usize, width: usize, frames: &[Vec<C64>]) -> Result<Self> {
        let n = frames.len();
        let mut out = Self::zeros(height, width, n.max(1));
        if n == 0 {
            return dim_err("no frames");
        }
        for (t, f) in frames.iter().enumerate() {
            out.set_frame(t, f)?;
        }
        Ok(out)
    }

    pub fn from_tensor(tensor: ComplexTensor, height: usize, width: usize) -> Result<Self> {
        let (m, n) = tensor.shape2()?;
        if m != height * width {
            return dim_err(format!("{m} rows cannot hold a {height}x{width} frame"));
        }
        Self::new(height, width, n, tensor.into_data())
    }

    pub fn to_tensor(&self) -> ComplexTensor {
        ComplexTensor {
            dims: vec![self.pixels(), self.frames],
            data: self.data.clone(),
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn pixels(&self) -> usize {
        self.height * self.width
    }

    pub fn data(&self) -> &[C64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [C64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<C64> {
        self.data
    }

    pub fn profile(&self, pixel: usize) -> &[C64] {
        &self.data[pixel * self.frames..(pixel + 1) * self.frames]
    }

    pub fn frame(&self, t: usize) -> Vec<C64> {
        self.data.iter().skip(t).step_by(self.frames).copied().collect()
    }

    pub fn set_frame(&mut self, t: usize, img: &[C64]) -> Result<()> {
        if img.len() != self.pixels() || t >= self.frames {
            return dim_err(format!(
                "frame {t} of length {} does not fit {}x{}x{}",
                img.len(),
                self.height,
                self.width,
                self.frames
            ));
        }
        let n = self.frames;
        for (p, v) in img.iter().enumerate() {
            self.data[p * n + t] = *v;
        }
        Ok(())
    }

    pub fn norm(&self) -> f64 {
        norm(&self.data)
    }

    pub fn same_shape(&self, other: &Self) -> bool {
        self.height == other.height && self.width == other.width && self.frames == other.frames
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    /// `‖self − other‖_F / ‖other‖_F`.
    pub fn relative_distance(&self, other: &Self) -> f64 {
        let diff: f64 = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum();
        diff.sqrt() / other.norm()
    }
}

/// Seed for every stochastic stage. Streams come from ChaCha8, a
/// counter-based generator whose output is identical on every platform.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RngSeed(pub u64);

impl RngSeed {
    pub fn rng(self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.0)
    }

    /// Independent stream for a named sub-stage.
    pub fn derive(self, stream: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.0);
        rng.set_stream(stream);
        rng
    }
}

impl Default for RngSeed {
    fn default() -> Self {
        RngSeed(1)
    }
}

pub fn gaussian(rng: &mut impl rand::Rng) -> f64 {
    StandardNormal.sample(rng)
}

/// Circular complex Gaussian with `E|z|² = sigma²`.
pub fn complex_gaussian(rng: &mut impl rand::Rng, sigma: f64) -> C64 {
    let s = sigma / std::f64::consts::SQRT_2;
    let re = gaussian(rng) * s;
    let im = gaussian(rng) * s;
    C64::new(re, im)
}

pub fn random_complex_tensor(dims: Vec<usize>, rng: &mut impl rand::Rng) -> ComplexTensor {
    let len: usize = dims.iter().product();
    let data = (0..len).map(|_| complex_gaussian(rng, 1.0)).collect();
    ComplexTensor { dims, data }
}

/// `Σ conj(a_i) b_i`
pub fn dot(a: &[C64], b: &[C64]) -> C64 {
    let mut acc = C64::new(0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        acc += x.conj() * y;
    }
    acc
}

pub fn norm_sqr(a: &[C64]) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum()
}

pub fn norm(a: &[C64]) -> f64 {
    norm_sqr(a).sqrt()
}

/// `y += alpha * x`
pub fn axpy(alpha: C64, x: &[C64], y: &mut [C64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub fn is_power_of_two(n: usize) -> bool {
    n > 0 && n & (n - 1) == 0
}
