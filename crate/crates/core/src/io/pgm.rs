//! 8-bit grayscale rendering of magnitude images to binary PGM (P5).

use std::path::Path;

use super::cxt1::write_atomic;
use crate::error::{dim_err, Result};
use crate::numerics::CasoratiMatrix;

#[derive(Clone, Debug, PartialEq)]
pub struct GrayImage {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<u8>,
    /// Magnitudes mapped to gray 0 and 255.
    pub window: (f64, f64),
}

impl GrayImage {
    /// Map magnitudes linearly from `[min, max]` to `[0, 255]`.
    pub fn from_magnitudes(width: usize, height: usize, values: &[f64]) -> Self {
        let lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let span = hi - lo;
        let pixels = values
            .iter()
            .map(|v| {
                if span > 0.0 {
                    (255.0 * (v - lo) / span).round().clamp(0.0, 255.0) as u8
                } else {
                    0
                }
            })
            .collect();
        Self {
            width,
            height,
            pixels,
            window: (lo, hi),
        }
    }

    pub fn to_pgm(&self) -> Vec<u8> {
        let mut out = format!("P5\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend_from_slice(&self.pixels);
        out
    }

    /// Write `path` and a `path.txt` sidecar recording the gray window.
    pub fn write(&self, path: &Path) -> Result<()> {
        write_atomic(path, &self.to_pgm())?;
        let mut side = path.as_os_str().to_owned();
        side.push(".txt");
        let text = format!(
            "width {}\nheight {}\nwindow_min {:.17e}\nwindow_max {:.17e}\n",
            self.width, self.height, self.window.0, self.window.1
        );
        write_atomic(Path::new(&side), text.as_bytes())
    }
}

/// Magnitude of frame `t`.
pub fn render_frame(x: &CasoratiMatrix, t: usize) -> Result<GrayImage> {
    if t >= x.frames() {
        return dim_err(format!("frame {t} out of range (0..{})", x.frames()));
    }
    let mags: Vec<f64> = x.frame(t).iter().map(|z| z.norm()).collect();
    Ok(GrayImage::from_magnitudes(x.width(), x.height(), &mags))
}

/// x-t image of image row `row`: one column per frame, one line per pixel
/// along the row.
pub fn render_profile(x: &CasoratiMatrix, row: usize) -> Result<GrayImage> {
    if row >= x.height() {
        return dim_err(format!("row {row} out of range (0..{})", x.height()));
    }
    let (w, n) = (x.width(), x.frames());
    let mut mags = Vec::with_capacity(w * n);
    for col in 0..w {
        mags.extend(x.profile(row * w + col).iter().map(|z| z.norm()));
    }
    Ok(GrayImage::from_magnitudes(n, w, &mags))
}
