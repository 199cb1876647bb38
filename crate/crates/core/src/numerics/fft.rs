use std::sync::Arc;

use rustfft::{Fft, FftPlanner};

use super::{is_power_of_two, ComplexTensor, C64};
use crate::error::{dim_err, Result};

/// Unnormalized, unshifted 2-D FFT plan over a row-major `rows x cols` grid.
///
/// `forward` uses the `e^{-j}` kernel, `inverse` the `e^{+j}` kernel; neither
/// scales.
#[derive(Clone)]
pub struct Fft2 {
    rows: usize,
    cols: usize,
    row_fwd: Arc<dyn Fft<f64>>,
    row_inv: Arc<dyn Fft<f64>>,
    col_fwd: Arc<dyn Fft<f64>>,
    col_inv: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for Fft2 {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Fft2({}x{})", self.rows, self.cols)
    }
}

impl Fft2 {
    pub fn new(rows: usize, cols: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            rows,
            cols,
            row_fwd: planner.plan_fft_forward(cols),
            row_inv: planner.plan_fft_inverse(cols),
            col_fwd: planner.plan_fft_forward(rows),
            col_inv: planner.plan_fft_inverse(rows),
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    /// In-place transform. `active_rows`, when given, lists the only rows
    /// that may be nonzero on input; the other rows skip the first pass.
    pub fn process(&self, data: &mut [C64], inverse: bool, active_rows: Option<&[usize]>) {
        assert_eq!(data.len(), self.rows * self.cols);
        let (row_fft, col_fft) = if inverse {
            (&self.row_inv, &self.col_inv)
        } else {
            (&self.row_fwd, &self.col_fwd)
        };
        let scratch_len = row_fft
            .get_inplace_scratch_len()
            .max(col_fft.get_inplace_scratch_len());
        let mut scratch = vec![C64::new(0.0, 0.0); scratch_len];

        match active_rows {
            Some(rows) => {
                for &r in rows {
                    let row = &mut data[r * self.cols..(r + 1) * self.cols];
                    row_fft.process_with_scratch(row, &mut scratch);
                }
            }
            None => row_fft.process_with_scratch(data, &mut scratch),
        }

        let mut t = vec![C64::new(0.0, 0.0); data.len()];
        transpose(data, &mut t, self.rows, self.cols);
        col_fft.process_with_scratch(&mut t, &mut scratch);
        transpose(&t, data, self.cols, self.rows);
    }
}

impl Fft2 {
    /// In-place transform where only `needed_rows` of the output are used:
    /// columns are transformed first, then just those rows. Other rows are
    /// left in an unspecified state.
    pub fn process_for_rows(&self, data: &mut [C64], inverse: bool, needed_rows: &[usize]) {
        assert_eq!(data.len(), self.rows * self.cols);
        let (row_fft, col_fft) = if inverse {
            (&self.row_inv, &self.col_inv)
        } else {
            (&self.row_fwd, &self.col_fwd)
        };
        let scratch_len = row_fft
            .get_inplace_scratch_len()
            .max(col_fft.get_inplace_scratch_len());
        let mut scratch = vec![C64::new(0.0, 0.0); scratch_len];
        let mut t = vec![C64::new(0.0, 0.0); data.len()];
        transpose(data, &mut t, self.rows, self.cols);
        col_fft.process_with_scratch(&mut t, &mut scratch);
        transpose(&t, data, self.cols, self.rows);
        for &r in needed_rows {
            let row = &mut data[r * self.cols..(r + 1) * self.cols];
            row_fft.process_with_scratch(row, &mut scratch);
        }
    }
}

fn transpose(src: &[C64], dst: &mut [C64], rows: usize, cols: usize) {
    const B: usize = 32;
    for i0 in (0..rows).step_by(B) {
        for j0 in (0..cols).step_by(B) {
            for i in i0..(i0 + B).min(rows) {
                for j in j0..(j0 + B).min(cols) {
                    dst[j * rows + i] = src[i * cols + j];
                }
            }
        }
    }
}

/// Swap halves of an even-length vector (fftshift == ifftshift for even n).
pub fn fft_shift_1d(v: &mut [C64]) {
    let h = v.len() / 2;
    v.rotate_left(h);
}

fn shift2(src: &[C64], rows: usize, cols: usize) -> Vec<C64> {
    let mut out = vec![C64::new(0.0, 0.0); src.len()];
    let (hr, hc) = (rows / 2, cols / 2);
    for i in 0..rows {
        let oi = (i + hr) % rows;
        for j in 0..cols {
            out[oi * cols + (j + hc) % cols] = src[i * cols + j];
        }
    }
    out
}

/// Orthonormal centered 2-D DFT: the zero frequency (and the spatial
/// origin) sit at index `(H/2, W/2)`.
pub fn fft2_centered(img: &ComplexTensor, inverse: bool) -> Result<ComplexTensor> {
    let (h, w) = img.shape2()?;
    if !is_power_of_two(h) || !is_power_of_two(w) {
        return dim_err(format!("fft2_centered needs power-of-two extents, got {h}x{w}"));
    }
    let plan = Fft2::new(h, w);
    let mut buf = shift2(img.data(), h, w);
    plan.process(&mut buf, inverse, None);
    let scale = 1.0 / ((h * w) as f64).sqrt();
    let mut out = shift2(&buf, h, w);
    out.iter_mut().for_each(|z| *z *= scale);
    ComplexTensor::new(vec![h, w], out)
}
