//! Image quality metrics on magnitude images: signal-to-error ratio,
//! structural similarity and high-frequency error norm.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{dim_err, Error, Result};
use crate::numerics::{CasoratiMatrix, C64};

/// Returned by [`ser_db`] when the reconstruction is exact.
pub const SER_CAP_DB: f64 = 300.0;

pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
pub const SSIM_K1: f64 = 0.01;
pub const SSIM_K2: f64 = 0.03;

pub const LOG_SIZE: usize = 15;
pub const LOG_SIGMA: f64 = 1.5;

fn magnitude(img: &[C64]) -> Vec<f64> {
    img.iter().map(|z| z.norm()).collect()
}

fn check_pair(a: &[C64], b: &[C64], height: usize, width: usize) -> Result<()> {
    if a.len() != b.len() || a.len() != height * width {
        return dim_err(format!(
            "images of {} and {} pixels do not match {height}x{width}",
            a.len(),
            b.len()
        ));
    }
    Ok(())
}

/// `20 log₁₀(‖ref‖ / ‖ref − rec‖)` on magnitudes, capped at
/// [`SER_CAP_DB`].
pub fn ser_db(reference: &[C64], rec: &[C64]) -> Result<f64> {
    if reference.len() != rec.len() {
        return dim_err("image sizes differ");
    }
    let (r, x) = (magnitude(reference), magnitude(rec));
    let signal: f64 = r.iter().map(|v| v * v).sum::<f64>().sqrt();
    if signal == 0.0 {
        return Err(Error::DegenerateInput("reference image is zero".into()));
    }
    let err: f64 = r.iter().zip(&x).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
    if err == 0.0 {
        return Ok(SER_CAP_DB);
    }
    Ok((20.0 * (signal / err).log10()).min(SER_CAP_DB))
}

/// Normalized 1-D Gaussian taps.
fn gaussian_taps(size: usize, sigma: f64) -> Vec<f64> {
    let c = (size as f64 - 1.0) / 2.0;
    let g: Vec<f64> = (0..size)
        .map(|i| (-((i as f64 - c).powi(2)) / (2.0 * sigma * sigma)).exp())
        .collect();
    let s: f64 = g.iter().sum();
    g.into_iter().map(|v| v / s).collect()
}

/// Separable Gaussian filtering over "valid" positions only.
fn blur_valid(img: &[f64], height: usize, width: usize, taps: &[f64]) -> Vec<f64> {
    let k = taps.len();
    let (oh, ow) = (height - k + 1, width - k + 1);
    let mut rows = vec![0.0; height * ow];
    for y in 0..height {
        for x in 0..ow {
            rows[y * ow + x] = taps.iter().enumerate().map(|(i, t)| t * img[y * width + x + i]).sum();
        }
    }
    let mut out = vec![0.0; oh * ow];
    for y in 0..oh {
        for x in 0..ow {
            out[y * ow + x] = taps.iter().enumerate().map(|(i, t)| t * rows[(y + i) * ow + x]).sum();
        }
    }
    out
}

/// Mean SSIM over every fully contained 11x11 Gaussian window (σ = 1.5),
/// dynamic range `L = max |ref|`.
pub fn ssim(reference: &[C64], rec: &[C64], height: usize, width: usize) -> Result<f64> {
    check_pair(reference, rec, height, width)?;
    if height < SSIM_WINDOW || width < SSIM_WINDOW {
        return dim_err(format!("SSIM needs at least {SSIM_WINDOW}x{SSIM_WINDOW} pixels"));
    }
    let (a, b) = (magnitude(reference), magnitude(rec));
    let l = a.iter().cloned().fold(0.0, f64::max);
    if l == 0.0 {
        return Err(Error::DegenerateInput("reference image is zero".into()));
    }
    let c1 = (SSIM_K1 * l).powi(2);
    let c2 = (SSIM_K2 * l).powi(2);
    let taps = gaussian_taps(SSIM_WINDOW, SSIM_SIGMA);
    let prod = |u: &[f64], v: &[f64]| -> Vec<f64> { u.iter().zip(v).map(|(x, y)| x * y).collect() };
    let mu_a = blur_valid(&a, height, width, &taps);
    let mu_b = blur_valid(&b, height, width, &taps);
    let e_aa = blur_valid(&prod(&a, &a), height, width, &taps);
    let e_bb = blur_valid(&prod(&b, &b), height, width, &taps);
    let e_ab = blur_valid(&prod(&a, &b), height, width, &taps);
    let mut total = 0.0;
    for i in 0..mu_a.len() {
        let (ma, mb) = (mu_a[i], mu_b[i]);
        let va = e_aa[i] - ma * ma;
        let vb = e_bb[i] - mb * mb;
        let cov = e_ab[i] - ma * mb;
        total += ((2.0 * ma * mb + c1) * (2.0 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
    }
    Ok(total / mu_a.len() as f64)
}

/// Zero-sum Laplacian-of-Gaussian kernel, `size x size`, row-major.
pub fn log_kernel(size: usize, sigma: f64) -> Vec<f64> {
    let c = (size as f64 - 1.0) / 2.0;
    let s2 = sigma * sigma;
    let mut g = Vec::with_capacity(size * size);
    let mut r2s = Vec::with_capacity(size * size);
    for y in 0..size {
        for x in 0..size {
            let r2 = (x as f64 - c).powi(2) + (y as f64 - c).powi(2);
            g.push((-r2 / (2.0 * s2)).exp());
            r2s.push(r2);
        }
    }
    let gs: f64 = g.iter().sum();
    let mut k: Vec<f64> = g
        .iter()
        .zip(&r2s)
        .map(|(gv, r2)| gv / gs * (r2 - 2.0 * s2) / (s2 * s2))
        .collect();
    let mean = k.iter().sum::<f64>() / k.len() as f64;
    k.iter_mut().for_each(|v| *v -= mean);
    k
}

/// Mirror an out-of-range index back into `0..n`, repeating the edge
/// sample (`-1 → 0`, `n → n-1`).
fn reflect(i: i64, n: usize) -> usize {
    let n = n as i64;
    let period = 2 * n;
    let m = i.rem_euclid(period);
    (if m < n { m } else { period - 1 - m }) as usize
}

/// Same-size filtering with symmetric boundary extension.
pub fn log_filter(img: &[f64], height: usize, width: usize, kernel: &[f64], size: usize) -> Vec<f64> {
    let half = (size / 2) as i64;
    let mut out = vec![0.0; height * width];
    out.par_chunks_mut(width).enumerate().for_each(|(y, row)| {
        for (x, o) in row.iter_mut().enumerate() {
            let mut acc = 0.0;
            for ky in 0..size {
                let sy = reflect(y as i64 + ky as i64 - half, height);
                for kx in 0..size {
                    let sx = reflect(x as i64 + kx as i64 - half, width);
                    acc += kernel[ky * size + kx] * img[sy * width + sx];
                }
            }
            *o = acc;
        }
    });
    out
}

/// `‖LoG(rec) − LoG(ref)‖ / ‖LoG(ref)‖` with a 15x15, σ = 1.5 kernel.
pub fn hfen(reference: &[C64], rec: &[C64], height: usize, width: usize) -> Result<f64> {
    check_pair(reference, rec, height, width)?;
    let kernel = log_kernel(LOG_SIZE, LOG_SIGMA);
    let (a, b) = (magnitude(reference), magnitude(rec));
    let la = log_filter(&a, height, width, &kernel, LOG_SIZE);
    let lb = log_filter(&b, height, width, &kernel, LOG_SIZE);
    let den: f64 = la.iter().map(|v| v * v).sum::<f64>().sqrt();
    let scale: f64 = a.iter().map(|v| v * v).sum::<f64>().sqrt();
    if den <= 1e-12 * scale || den == 0.0 {
        return Err(Error::DegenerateInput(
            "reference has no high-frequency content".into(),
        ));
    }
    let num: f64 = la.iter().zip(&lb).map(|(x, y)| (y - x) * (y - x)).sum::<f64>().sqrt();
    Ok(num / den)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    /// Population standard deviation over frames.
    pub std: f64,
}

impl Summary {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        Self { mean, std: var.sqrt() }
    }
}

/// Per-frame metrics with mean ± std over frames.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub ser_db: Vec<f64>,
    pub ssim: Vec<f64>,
    pub hfen: Vec<f64>,
}

impl MetricReport {
    pub fn evaluate(reference: &CasoratiMatrix, rec: &CasoratiMatrix) -> Result<Self> {
        if !reference.same_shape(rec) {
            return dim_err("reference and reconstruction shapes differ");
        }
        let (h, w) = (reference.height(), reference.width());
        let rows: Vec<(f64, f64, f64)> = (0..reference.frames())
            .into_par_iter()
            .map(|t| {
                let (a, b) = (reference.frame(t), rec.frame(t));
                Ok((ser_db(&a, &b)?, ssim(&a, &b, h, w)?, hfen(&a, &b, h, w)?))
            })
            .collect::<Result<_>>()?;
        Ok(Self {
            ser_db: rows.iter().map(|r| r.0).collect(),
            ssim: rows.iter().map(|r| r.1).collect(),
            hfen: rows.iter().map(|r| r.2).collect(),
        })
    }

    pub fn n_frames(&self) -> usize {
        self.ser_db.len()
    }

    pub fn ser_summary(&self) -> Summary {
        Summary::of(&self.ser_db)
    }

    pub fn ssim_summary(&self) -> Summary {
        Summary::of(&self.ssim)
    }

    pub fn hfen_summary(&self) -> Summary {
        Summary::of(&self.hfen)
    }

    /// `frame,ser_db,ssim,hfen` rows followed by `mean` and `std` rows.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("frame,ser_db,ssim,hfen\n");
        for t in 0..self.n_frames() {
            out += &format!("{t},{:.6},{:.8},{:.8}\n", self.ser_db[t], self.ssim[t], self.hfen[t]);
        }
        let (s, m, h) = (self.ser_summary(), self.ssim_summary(), self.hfen_summary());
        out += &format!("mean,{:.6},{:.8},{:.8}\n", s.mean, m.mean, h.mean);
        out += &format!("std,{:.6},{:.8},{:.8}\n", s.std, m.std, h.std);
        out
    }
}
