use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use super::kspace::KSpaceData;
use crate::error::{Error, Result};
use crate::numerics::{fft_shift_1d, ComplexTensor};

/// Readout positions whose RMS projection magnitude falls below this
/// fraction of the strongest position are treated as background.
pub const BACKGROUND_FRACTION: f64 = 0.05;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NavigatorRow {
    /// 0 for the 0° navigator, 1 for the 90° navigator.
    pub spoke: usize,
    /// Index into the inverse-transformed readout; spatial offset
    /// `position − n_readout/2` pixels from the image centre.
    pub position: usize,
    pub coil: usize,
}

/// Navigator signals `Z = P X`: one row per (navigator, readout position,
/// coil), one column per frame.
#[derive(Clone, Debug, PartialEq)]
pub struct NavigatorMatrix {
    pub rows: Vec<NavigatorRow>,
    /// rows x frames
    pub data: ComplexTensor,
}

impl NavigatorMatrix {
    pub fn n_frames(&self) -> usize {
        self.data.dims()[1]
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }
}

/// Inverse-transform the two navigator spokes of every frame along the
/// readout. By the central-slice theorem each result is the coil-weighted
/// line-average projection of the frame at 0° (columns) or 90° (rows).
/// Background readout positions are dropped.
pub fn extract_navigators(y: &KSpaceData) -> Result<NavigatorMatrix> {
    let traj = &y.trajectory;
    if !traj.navigated {
        return Err(Error::DegenerateInput(
            "trajectory has no navigator spokes".into(),
        ));
    }
    let [n_frames, n_coils, _, r] = y.dims();
    let (h, w) = y.image_shape;
    let fft = FftPlanner::new().plan_fft_forward(r);
    let pixel_scale = ((h * w) as f64).sqrt() / r as f64;
    // Line lengths: the 0° spoke integrates over rows, the 90° over columns.
    let scales = [pixel_scale / h as f64, pixel_scale / w as f64];

    // projections[spoke][coil][frame] -> length-r profile
    let mut proj = vec![vec![vec![Vec::new(); n_frames]; n_coils]; 2];
    for (spoke, per_spoke) in proj.iter_mut().enumerate() {
        for (coil, per_coil) in per_spoke.iter_mut().enumerate() {
            for (t, out) in per_coil.iter_mut().enumerate() {
                let mut buf = y.spoke(t, coil, spoke).to_vec();
                fft_shift_1d(&mut buf);
                fft.process(&mut buf);
                fft_shift_1d(&mut buf);
                buf.iter_mut().for_each(|z| *z *= scales[spoke]);
                *out = buf;
            }
        }
    }

    let mut rms = vec![[0.0f64; 2]; r];
    for (spoke, per_spoke) in proj.iter().enumerate() {
        for per_coil in per_spoke {
            for prof in per_coil {
                for (q, z) in prof.iter().enumerate() {
                    rms[q][spoke] += z.norm_sqr();
                }
            }
        }
    }
    let peak = rms.iter().flat_map(|v| v.iter()).cloned().fold(0.0, f64::max);
    if peak == 0.0 {
        return Err(Error::DegenerateInput("navigator signals are all zero".into()));
    }
    let thresh = BACKGROUND_FRACTION * BACKGROUND_FRACTION * peak;

    let mut rows = Vec::new();
    let mut data = Vec::new();
    for spoke in 0..2 {
        for q in 0..r {
            if rms[q][spoke] < thresh {
                continue;
            }
            for coil in 0..n_coils {
                rows.push(NavigatorRow {
                    spoke,
                    position: q,
                    coil,
                });
                data.extend(proj[spoke][coil].iter().map(|p| p[q]));
            }
        }
    }
    let n_rows = rows.len();
    Ok(NavigatorMatrix {
        rows,
        data: ComplexTensor::new(vec![n_rows, n_frames], data)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::acquisition::kspace::acquire;
    use crate::acquisition::trajectory::golden_angle_trajectory;
    use crate::numerics::{CasoratiMatrix, RngSeed, C64};
    use crate::phantom::{generate_coil_maps, generate_phantom, CoilMapSet, PhantomConfig};

    fn phantom(cfg: PhantomConfig) -> (CasoratiMatrix, CoilMapSet, KSpaceData) {
        let x = generate_phantom(&cfg).unwrap();
        let maps = generate_coil_maps(cfg.height, cfg.width, 3, RngSeed(2)).unwrap();
        let traj = golden_angle_trajectory(cfg.n_frames, 10, 2 * cfg.height).unwrap();
        let y = acquire(&x, &maps, &traj, 0.0, RngSeed(1)).unwrap();
        (x, maps, y)
    }

    #[test]
    fn static_object_gives_constant_rows() {
        let cfg = PhantomConfig {
            height: 32,
            width: 32,
            n_frames: 12,
            cardiac_amplitude: 0.0,
            resp_amplitude: 0.0,
            ..Default::default()
        };
        let (_, _, y) = phantom(cfg);
        let z = extract_navigators(&y).unwrap();
        assert_eq!(z.n_frames(), 12);
        for i in 0..z.n_rows() {
            let first = z.data.get2(i, 0);
            for t in 1..12 {
                assert!((z.data.get2(i, t) - first).norm() <= 1e-12 * (1.0 + first.norm()));
            }
        }
    }

    #[test]
    fn matches_direct_projection() {
        let cfg = PhantomConfig {
            height: 32,
            width: 32,
            n_frames: 6,
            ..Default::default()
        };
        let (x, maps, y) = phantom(cfg);
        let z = extract_navigators(&y).unwrap();
        let (h, w, r) = (32usize, 32usize, 64usize);
        let mut max_err: f64 = 0.0;
        let mut peak: f64 = 0.0;
        for (i, row) in z.rows.iter().enumerate() {
            let off = row.position as i64 - (r / 2) as i64;
            for t in 0..6 {
                let frame = x.frame(t);
                let s = &maps.maps[row.coil];
                let expected: C64 = if row.spoke == 0 {
                    let ix = off + (w / 2) as i64;
                    if !(0..w as i64).contains(&ix) {
                        C64::new(0.0, 0.0)
                    } else {
                        (0..h).map(|iy| frame[iy * w + ix as usize] * s[iy * w + ix as usize]).sum::<C64>() / h as f64
                    }
                } else {
                    let iy = off + (h / 2) as i64;
                    if !(0..h as i64).contains(&iy) {
                        C64::new(0.0, 0.0)
                    } else {
                        (0..w).map(|ix| frame[iy as usize * w + ix] * s[iy as usize * w + ix]).sum::<C64>() / w as f64
                    }
                };
                peak = peak.max(expected.norm());
                max_err = max_err.max((z.data.get2(i, t) - expected).norm());
            }
        }
        assert!(max_err <= 1e-3 * peak, "max err {max_err} vs peak {peak}");
    }

    #[test]
    fn background_positions_dropped() {
        let cfg = PhantomConfig {
            height: 32,
            width: 32,
            n_frames: 4,
            ..Default::default()
        };
        let (_, _, y) = phantom(cfg);
        let z = extract_navigators(&y).unwrap();
        // readout is 2x oversampled: the outer half holds no object
        assert!(z.rows.iter().all(|r| (16..48).contains(&r.position)));
        assert_eq!(z.n_rows() % 3, 0);
    }

    #[test]
    fn all_zero_rejected() {
        let traj = golden_angle_trajectory(2, 4, 16).unwrap();
        let y = KSpaceData::new(traj, (8, 8), 1, 0.0, vec![C64::new(0.0, 0.0); 2 * 4 * 16]).unwrap();
        assert!(matches!(extract_navigators(&y), Err(Error::DegenerateInput(_))));
    }
}
