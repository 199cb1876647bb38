//! Synthetic free-breathing, ungated cardiac phantom and coil sensitivities.
//!
//! Frames are rasterized from ellipses with 4x4 subpixel supersampling. The
//! myocardial ring and blood pool scale with a cardiac sinusoid while every
//! organ translates vertically with a respiratory sinusoid; the two periods
//! are incommensurate so voxel profiles trace a torus-like manifold.

use std::f64::consts::PI;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{CasoratiMatrix, RngSeed, C64};

const SUPERSAMPLE: usize = 4;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhantomConfig {
    pub height: usize,
    pub width: usize,
    pub n_frames: usize,
    pub cardiac_period_frames: f64,
    pub resp_period_frames: f64,
    /// Fractional modulation of the heart radius.
    pub cardiac_amplitude: f64,
    /// Vertical translation amplitude in pixels.
    pub resp_amplitude: f64,
    pub seed: RngSeed,
}

impl Default for PhantomConfig {
    fn default() -> Self {
        Self {
            height: 128,
            width: 128,
            n_frames: 200,
            cardiac_period_frames: 22.0,
            resp_period_frames: 85.0,
            cardiac_amplitude: 0.15,
            resp_amplitude: 4.0,
            seed: RngSeed::default(),
        }
    }
}

impl PhantomConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.height < 8 || self.width < 8 || self.n_frames == 0 {
            return bad(format!(
                "phantom needs at least 8x8 pixels and one frame, got {}x{}x{}",
                self.height, self.width, self.n_frames
            ));
        }
        for (name, p) in [
            ("cardiac", self.cardiac_period_frames),
            ("respiratory", self.resp_period_frames),
        ] {
            if !(p >= 2.0) || !p.is_finite() {
                return bad(format!("{name} period must be >= 2 frames, got {p}"));
            }
        }
        for (name, a) in [
            ("cardiac", self.cardiac_amplitude),
            ("respiratory", self.resp_amplitude),
        ] {
            if !(a >= 0.0) || !a.is_finite() {
                return bad(format!("{name} amplitude must be >= 0, got {a}"));
            }
        }
        if self.cardiac_amplitude >= 0.5 {
            return bad("cardiac amplitude must stay below 0.5".into());
        }
        let (lo, hi) = if self.cardiac_period_frames < self.resp_period_frames {
            (self.cardiac_period_frames, self.resp_period_frames)
        } else {
            (self.resp_period_frames, self.cardiac_period_frames)
        };
        let ratio = hi / lo;
        if (ratio - ratio.round()).abs() < 1e-9 {
            return bad(format!(
                "cardiac ({}) and respiratory ({}) periods must not be integer multiples",
                self.cardiac_period_frames, self.resp_period_frames
            ));
        }
        Ok(())
    }

    /// Integer phase offsets (cardiac, respiratory) drawn from the seed.
    fn phase_offsets(&self) -> (f64, f64) {
        let mut rng = self.seed.derive(1);
        let c = rng.gen_range(0..self.cardiac_period_frames.floor() as u64) as f64;
        let r = rng.gen_range(0..self.resp_period_frames.floor() as u64) as f64;
        (c, r)
    }
}

#[derive(Clone, Copy, Debug)]
struct Ellipse {
    cx: f64,
    cy: f64,
    ax: f64,
    ay: f64,
    value: f64,
}

impl Ellipse {
    fn contains(&self, u: f64, v: f64) -> bool {
        let du = (u - self.cx) / self.ax;
        let dv = (v - self.cy) / self.ay;
        du * du + dv * dv <= 1.0
    }
}

/// Phase in [0, 1) computed with an exact modulo so frames one period apart
/// are bit-identical.
fn phase(t: f64, offset: f64, period: f64) -> f64 {
    ((t + offset) % period) / period
}

fn scene(cfg: &PhantomConfig, t: usize) -> Vec<Ellipse> {
    let (c_off, r_off) = cfg.phase_offsets();
    let t = t as f64;
    let card = 1.0
        + cfg.cardiac_amplitude * (2.0 * PI * phase(t, c_off, cfg.cardiac_period_frames)).sin();
    let shift_px =
        cfg.resp_amplitude * (2.0 * PI * phase(t, r_off, cfg.resp_period_frames)).sin();
    let dv = 2.0 * shift_px / cfg.height as f64;

    let e = |cx: f64, cy: f64, ax: f64, ay: f64, value: f64| Ellipse {
        cx,
        cy: cy + dv,
        ax,
        ay,
        value,
    };
    vec![
        // torso
        e(0.0, 0.0, 0.82, 0.64, 0.30),
        // lungs
        e(-0.42, -0.10, 0.25, 0.40, 0.06),
        e(0.44, -0.08, 0.23, 0.38, 0.06),
        // liver dome
        e(-0.22, 0.47, 0.40, 0.16, 0.45),
        // spine
        e(0.0, 0.52, 0.08, 0.08, 0.50),
        // myocardium then blood pool, both scaled by the cardiac cycle
        e(0.08, 0.10, 0.24 * card, 0.22 * card, 0.55),
        e(0.08, 0.10, 0.15 * card, 0.135 * card, 1.0),
    ]
}

/// Rasterize one frame, row-major `height x width`, values in [0, 1].
pub fn render_frame(cfg: &PhantomConfig, t: usize) -> Vec<f64> {
    let shapes = scene(cfg, t);
    let (h, w) = (cfg.height, cfg.width);
    let sub = SUPERSAMPLE as f64;
    let mut img = vec![0.0; h * w];
    for iy in 0..h {
        for ix in 0..w {
            let mut acc = 0.0;
            for sy in 0..SUPERSAMPLE {
                let v = 2.0 * (iy as f64 + (sy as f64 + 0.5) / sub) / h as f64 - 1.0;
                for sx in 0..SUPERSAMPLE {
                    let u = 2.0 * (ix as f64 + (sx as f64 + 0.5) / sub) / w as f64 - 1.0;
                    let mut val = 0.0;
                    for s in &shapes {
                        if s.contains(u, v) {
                            val = s.value;
                        }
                    }
                    acc += val;
                }
            }
            img[iy * w + ix] = acc / (sub * sub);
        }
    }
    img
}

/// Ground-truth Casorati matrix (pixels x frames), real and non-negative.
pub fn generate_phantom(cfg: &PhantomConfig) -> Result<CasoratiMatrix> {
    cfg.validate()?;
    let frames: Vec<Vec<C64>> = (0..cfg.n_frames)
        .into_par_iter()
        .map(|t| {
            render_frame(cfg, t)
                .into_iter()
                .map(|v| C64::new(v, 0.0))
                .collect()
        })
        .collect();
    CasoratiMatrix::from_frames(cfg.height, cfg.width, &frames)
}

/// Complex coil sensitivities `s_i(r)`, one `height x width` map per coil.
#[derive(Clone, Debug, PartialEq)]
pub struct CoilMapSet {
    pub height: usize,
    pub width: usize,
    pub maps: Vec<Vec<C64>>,
}

impl CoilMapSet {
    pub fn new(height: usize, width: usize, maps: Vec<Vec<C64>>) -> Result<Self> {
        if maps.is_empty() || maps.iter().any(|m| m.len() != height * width) {
            return Err(Error::Dimension(format!(
                "coil maps must be non-empty and {height}x{width} each"
            )));
        }
        Ok(Self {
            height,
            width,
            maps,
        })
    }

    /// A single coil with unit sensitivity everywhere.
    pub fn uniform(height: usize, width: usize) -> Self {
        Self {
            height,
            width,
            maps: vec![vec![C64::new(1.0, 0.0); height * width]],
        }
    }

    pub fn n_coils(&self) -> usize {
        self.maps.len()
    }

    /// `Σ_i |s_i(r)|²` per pixel.
    pub fn sum_of_squares(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.height * self.width];
        for m in &self.maps {
            for (o, s) in out.iter_mut().zip(m) {
                *o += s.norm_sqr();
            }
        }
        out
    }
}

const COIL_RING_RADIUS: f64 = 1.1;
const COIL_WIDTH: f64 = 1.0;

/// Gaussian-bump sensitivities centred on a ring just outside the field of
/// view, each with a random constant phase and a gentle linear phase ramp,
/// scaled so that `Σ|s_i|² = 1` at the image centre.
pub fn generate_coil_maps(height: usize, width: usize, n_coils: usize, seed: RngSeed) -> Result<CoilMapSet> {
    if n_coils == 0 {
        return Err(Error::Config("need at least one coil".into()));
    }
    if height == 0 || width == 0 {
        return Err(Error::Config("coil maps need a non-empty grid".into()));
    }
    let mut rng = seed.derive(2);
    let mut maps = Vec::with_capacity(n_coils);
    for i in 0..n_coils {
        let theta = 2.0 * PI * i as f64 / n_coils as f64;
        let (cu, cv) = (COIL_RING_RADIUS * theta.cos(), COIL_RING_RADIUS * theta.sin());
        let phi0: f64 = rng.gen_range(0.0..2.0 * PI);
        let ku: f64 = rng.gen_range(-0.5..0.5);
        let kv: f64 = rng.gen_range(-0.5..0.5);
        let mut map = Vec::with_capacity(height * width);
        for iy in 0..height {
            let v = 2.0 * (iy as f64 + 0.5) / height as f64 - 1.0;
            for ix in 0..width {
                let u = 2.0 * (ix as f64 + 0.5) / width as f64 - 1.0;
                let d2 = (u - cu).powi(2) + (v - cv).powi(2);
                let mag = (-d2 / (2.0 * COIL_WIDTH * COIL_WIDTH)).exp();
                map.push(C64::from_polar(mag, phi0 + ku * u + kv * v));
            }
        }
        maps.push(map);
    }
    let centre = (height / 2) * width + width / 2;
    let ss: f64 = maps.iter().map(|m| m[centre].norm_sqr()).sum();
    let scale = 1.0 / ss.sqrt();
    for m in maps.iter_mut() {
        m.iter_mut().for_each(|z| *z *= scale);
    }
    CoilMapSet::new(height, width, maps)
}
