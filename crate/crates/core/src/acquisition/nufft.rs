//! Kaiser–Bessel gridding NUFFT on a 2x oversampled Cartesian grid.
//!
//! Forward: `y(k) = (HW)^{-1/2} Σ_r f(r) e^{+j k·r}` with `r` the centred
//! pixel coordinate. The adjoint reuses the same interpolation weights and
//! deapodization, so it is the exact Euclidean adjoint of the forward map.

use std::f64::consts::PI;

use super::super::numerics::{Fft2, C64};
use crate::error::{Error, Result};

pub const OVERSAMPLING: usize = 2;
pub const KERNEL_WIDTH: usize = 6;

/// Kaiser–Bessel window of `width` grid units with the Beatty shape factor
/// for the given oversampling ratio.
#[derive(Clone, Copy, Debug)]
pub struct KaiserBessel {
    width: f64,
    beta: f64,
}

impl KaiserBessel {
    pub fn beatty(width: usize, oversampling: usize) -> Self {
        let w = width as f64;
        let a = oversampling as f64;
        let beta = PI * ((w / a).powi(2) * (a - 0.5).powi(2) - 0.8).sqrt();
        Self { width: w, beta }
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// Kernel value at offset `t` (grid units).
    pub fn eval(&self, t: f64) -> f64 {
        let x = 2.0 * t / self.width;
        if x.abs() >= 1.0 {
            return 0.0;
        }
        bessel_i0(self.beta * (1.0 - x * x).sqrt())
    }

    /// Continuous Fourier transform at `nu` cycles per grid unit.
    pub fn transform(&self, nu: f64) -> f64 {
        let z2 = self.beta * self.beta - (PI * self.width * nu).powi(2);
        if z2 > 0.0 {
            let z = z2.sqrt();
            self.width * z.sinh() / z
        } else if z2 < 0.0 {
            let z = (-z2).sqrt();
            self.width * z.sin() / z
        } else {
            self.width
        }
    }
}

/// Modified Bessel function of the first kind, order zero (power series).
pub fn bessel_i0(x: f64) -> f64 {
    let q = x * x / 4.0;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..200 {
        term *= q / (k * k) as f64;
        sum += term;
        if term < 1e-17 * sum {
            break;
        }
    }
    sum
}

/// Separable interpolation footprint of one non-uniform sample.
#[derive(Clone, Copy, Debug)]
pub struct Stencil {
    ix: [u32; KERNEL_WIDTH],
    wx: [f64; KERNEL_WIDTH],
    iy: [u32; KERNEL_WIDTH],
    wy: [f64; KERNEL_WIDTH],
}

/// Grid geometry, FFT plan and deapodization for one image size.
#[derive(Clone, Debug)]
pub struct NufftPlan {
    height: usize,
    width: usize,
    grid_h: usize,
    grid_w: usize,
    kernel: KaiserBessel,
    fft: Fft2,
    deapod: Vec<f64>,
    image_rows: Vec<usize>,
    scale: f64,
}

impl NufftPlan {
    pub fn new(height: usize, width: usize) -> Self {
        let grid_h = OVERSAMPLING * height;
        let grid_w = OVERSAMPLING * width;
        let kernel = KaiserBessel::beatty(KERNEL_WIDTH, OVERSAMPLING);
        let mut deapod = Vec::with_capacity(height * width);
        for iy in 0..height {
            let y = iy as f64 - (height / 2) as f64;
            let fy = kernel.transform(y / grid_h as f64);
            for ix in 0..width {
                let x = ix as f64 - (width / 2) as f64;
                let fx = kernel.transform(x / grid_w as f64);
                deapod.push(1.0 / (fx * fy));
            }
        }
        let image_rows = (0..height)
            .map(|iy| wrap(iy as i64 - (height / 2) as i64, grid_h))
            .collect();
        Self {
            height,
            width,
            grid_h,
            grid_w,
            kernel,
            fft: Fft2::new(grid_h, grid_w),
            deapod,
            image_rows,
            scale: 1.0 / ((height * width) as f64).sqrt(),
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    /// Interpolation footprints for sample coordinates `(k_x, k_y)`.
    pub fn stencils(&self, coords: &[(f64, f64)]) -> Result<Vec<Stencil>> {
        coords
            .iter()
            .map(|&(kx, ky)| {
                if kx * kx + ky * ky > PI * PI * (1.0 + 1e-12) {
                    return Err(Error::Dimension(format!(
                        "trajectory point ({kx}, {ky}) lies outside |k| <= π"
                    )));
                }
                let (ix, wx) = self.footprint(kx, self.grid_w);
                let (iy, wy) = self.footprint(ky, self.grid_h);
                Ok(Stencil { ix, wx, iy, wy })
            })
            .collect()
    }

    fn footprint(&self, k: f64, grid: usize) -> ([u32; KERNEL_WIDTH], [f64; KERNEL_WIDTH]) {
        let kappa = k * grid as f64 / (2.0 * PI);
        let base = kappa.floor() as i64 - (KERNEL_WIDTH as i64 / 2 - 1);
        let mut idx = [0u32; KERNEL_WIDTH];
        let mut w = [0.0; KERNEL_WIDTH];
        for a in 0..KERNEL_WIDTH {
            let u = base + a as i64;
            idx[a] = wrap(u, grid) as u32;
            w[a] = self.kernel.eval(kappa - u as f64);
        }
        (idx, w)
    }

    /// Forward transform of one (already coil-weighted) image.
    pub fn forward(&self, img: &[C64], stencils: &[Stencil], out: &mut [C64]) {
        debug_assert_eq!(img.len(), self.height * self.width);
        debug_assert_eq!(out.len(), stencils.len());
        let gw = self.grid_w;
        let mut grid = vec![C64::new(0.0, 0.0); self.grid_h * gw];
        for iy in 0..self.height {
            let gy = self.image_rows[iy];
            for ix in 0..self.width {
                let gx = wrap(ix as i64 - (self.width / 2) as i64, gw);
                let p = iy * self.width + ix;
                grid[gy * gw + gx] = img[p] * self.deapod[p];
            }
        }
        self.fft.process(&mut grid, true, Some(&self.image_rows));
        for (o, st) in out.iter_mut().zip(stencils) {
            let mut acc = C64::new(0.0, 0.0);
            for a in 0..KERNEL_WIDTH {
                let row = &grid[st.iy[a] as usize * gw..];
                let mut racc = C64::new(0.0, 0.0);
                for b in 0..KERNEL_WIDTH {
                    racc += row[st.ix[b] as usize] * st.wx[b];
                }
                acc += racc * st.wy[a];
            }
            *o = acc * self.scale;
        }
    }

    /// Adjoint of [`forward`](Self::forward); `weights`, when given,
    /// multiplies each sample first (density compensation).
    pub fn adjoint(&self, samples: &[C64], stencils: &[Stencil], weights: Option<&[f64]>, out: &mut [C64]) {
        debug_assert_eq!(out.len(), self.height * self.width);
        let gw = self.grid_w;
        let mut grid = vec![C64::new(0.0, 0.0); self.grid_h * gw];
        for (i, (y, st)) in samples.iter().zip(stencils).enumerate() {
            let y = match weights {
                Some(w) => y * w[i],
                None => *y,
            };
            for a in 0..KERNEL_WIDTH {
                let ya = y * st.wy[a];
                let row = &mut grid[st.iy[a] as usize * gw..];
                for b in 0..KERNEL_WIDTH {
                    row[st.ix[b] as usize] += ya * st.wx[b];
                }
            }
        }
        self.fft.process_for_rows(&mut grid, false, &self.image_rows);
        for iy in 0..self.height {
            let gy = self.image_rows[iy];
            for ix in 0..self.width {
                let gx = wrap(ix as i64 - (self.width / 2) as i64, gw);
                let p = iy * self.width + ix;
                out[p] = grid[gy * gw + gx] * (self.deapod[p] * self.scale);
            }
        }
    }
}

fn wrap(u: i64, n: usize) -> usize {
    u.rem_euclid(n as i64) as usize
}

/// Brute-force non-uniform DFT with the same convention and scaling as
/// [`NufftPlan::forward`]. `O(HW · M)`; meant for checking.
pub fn direct_nudft(img: &[C64], height: usize, width: usize, coords: &[(f64, f64)]) -> Vec<C64> {
    let scale = 1.0 / ((height * width) as f64).sqrt();
    coords
        .iter()
        .map(|&(kx, ky)| {
            let mut acc = C64::new(0.0, 0.0);
            for iy in 0..height {
                let y = iy as f64 - (height / 2) as f64;
                for ix in 0..width {
                    let x = ix as f64 - (width / 2) as f64;
                    acc += img[iy * width + ix] * C64::from_polar(1.0, kx * x + ky * y);
                }
            }
            acc * scale
        })
        .collect()
}
