use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Golden-angle increment for radial spokes over `[0, π)`: `π / φ`, about
/// 111.246°.
pub const GOLDEN_ANGLE: f64 = PI * 0.618_033_988_749_894_8;

/// Spokes 0 and 1 of every frame in a navigated trajectory.
pub const NAVIGATOR_ANGLES: [f64; 2] = [0.0, PI / 2.0];

/// Radial sampling pattern. Readout sample `p` of a spoke at angle `θ` sits at
/// `k = κ_p (cos θ, sin θ)` with `κ_p = π (p − R/2) / (R/2)`, so every sample
/// lies in `[−π, π)²` (radians per pixel).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RadialTrajectory {
    pub n_frames: usize,
    pub spokes_per_frame: usize,
    pub n_readout: usize,
    /// Whether spokes 0 and 1 of each frame are the fixed navigators.
    pub navigated: bool,
    /// Angle of spoke `s` in frame `t` at index `t * spokes_per_frame + s`.
    pub angles: Vec<f64>,
}

impl RadialTrajectory {
    pub fn from_angles(n_frames: usize, spokes_per_frame: usize, n_readout: usize, angles: Vec<f64>) -> Result<Self> {
        if n_frames == 0 || spokes_per_frame == 0 || n_readout < 2 || !n_readout.is_multiple_of(2) {
            return Err(Error::Config(format!(
                "trajectory needs frames, spokes and an even readout >= 2 (got {n_frames}, {spokes_per_frame}, {n_readout})"
            )));
        }
        if angles.len() != n_frames * spokes_per_frame {
            return Err(Error::Dimension(format!(
                "{} angles for {n_frames} frames x {spokes_per_frame} spokes",
                angles.len()
            )));
        }
        Ok(Self {
            n_frames,
            spokes_per_frame,
            n_readout,
            navigated: false,
            angles,
        })
    }

    /// Single frame of `n_spokes` equally spaced spokes over `[0, π)`.
    pub fn uniform(n_spokes: usize, n_readout: usize) -> Result<Self> {
        let angles = (0..n_spokes).map(|j| PI * j as f64 / n_spokes as f64).collect();
        Self::from_angles(1, n_spokes, n_readout, angles)
    }

    pub fn angle(&self, frame: usize, spoke: usize) -> f64 {
        self.angles[frame * self.spokes_per_frame + spoke]
    }

    /// Signed radial coordinate of readout sample `p`.
    pub fn kappa(&self, p: usize) -> f64 {
        let half = (self.n_readout / 2) as f64;
        PI * (p as f64 - half) / half
    }

    /// Readout spacing in radians per pixel.
    pub fn delta_k(&self) -> f64 {
        PI / (self.n_readout / 2) as f64
    }

    pub fn samples_per_frame(&self) -> usize {
        self.spokes_per_frame * self.n_readout
    }

    /// `(k_x, k_y)` for every sample of a frame, spoke-major.
    pub fn frame_coords(&self, frame: usize) -> Vec<(f64, f64)> {
        let mut out = Vec::with_capacity(self.samples_per_frame());
        for s in 0..self.spokes_per_frame {
            let (sn, cs) = self.angle(frame, s).sin_cos();
            for p in 0..self.n_readout {
                let k = self.kappa(p);
                out.push((k * cs, k * sn));
            }
        }
        out
    }
}

/// Navigated golden-angle trajectory: spokes 0 and 1 of every frame sit at
/// 0 and π/2; the remaining spokes take `θ_j = j·Δ mod π` from one counter
/// `j` that runs across all frames and skips the navigators.
pub fn golden_angle_trajectory(n_frames: usize, spokes_per_frame: usize, n_readout: usize) -> Result<RadialTrajectory> {
    if spokes_per_frame < 3 {
        return Err(Error::Config(format!(
            "navigated trajectory needs at least 3 spokes per frame, got {spokes_per_frame}"
        )));
    }
    let imaging = spokes_per_frame - 2;
    let mut angles = Vec::with_capacity(n_frames * spokes_per_frame);
    for t in 0..n_frames {
        angles.extend_from_slice(&NAVIGATOR_ANGLES);
        for s in 0..imaging {
            let j = (t * imaging + s) as f64;
            angles.push((j * GOLDEN_ANGLE).rem_euclid(PI));
        }
    }
    let mut traj = RadialTrajectory::from_angles(n_frames, spokes_per_frame, n_readout, angles)?;
    traj.navigated = true;
    Ok(traj)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn navigators_fixed() {
        let t = golden_angle_trajectory(5, 10, 64).unwrap();
        for f in 0..5 {
            assert_eq!(t.angle(f, 0), 0.0);
            assert_eq!(t.angle(f, 1), PI / 2.0);
        }
    }

    #[test]
    fn golden_sequence_start() {
        let t = golden_angle_trajectory(2, 10, 64).unwrap();
        assert_eq!(t.angle(0, 2), 0.0);
        assert!((t.angle(0, 3) - 1.94161).abs() < 1e-5);
        assert!((GOLDEN_ANGLE.to_degrees() - 111.246).abs() < 1e-3);
        // counter continues into the next frame
        assert!((t.angle(1, 2) - (8.0 * GOLDEN_ANGLE).rem_euclid(PI)).abs() < 1e-12);
    }

    #[test]
    fn golden_angles_distinct() {
        let t = golden_angle_trajectory(125, 10, 8).unwrap();
        let a: Vec<f64> = (0..125)
            .flat_map(|f| (2..10).map(move |s| (f, s)))
            .map(|(f, s)| t.angle(f, s))
            .collect();
        assert_eq!(a.len(), 1000);
        for i in 0..a.len() {
            for j in i + 1..(i + 100).min(a.len()) {
                let d = (a[i] - a[j]).rem_euclid(PI);
                assert!(d.min(PI - d) > 1e-6, "{i} vs {j}");
            }
        }
    }

    #[test]
    fn navigators_independent_of_spoke_count() {
        let a = golden_angle_trajectory(4, 10, 32).unwrap();
        let b = golden_angle_trajectory(4, 12, 32).unwrap();
        for f in 0..4 {
            assert_eq!(a.angle(f, 0), b.angle(f, 0));
            assert_eq!(a.angle(f, 1), b.angle(f, 1));
        }
    }

    #[test]
    fn samples_inside_band() {
        let t = golden_angle_trajectory(3, 10, 64).unwrap();
        for f in 0..3 {
            for (kx, ky) in t.frame_coords(f) {
                assert!((kx * kx + ky * ky).sqrt() <= PI + 1e-12);
            }
        }
    }

    #[test]
    fn too_few_spokes_rejected() {
        assert!(golden_angle_trajectory(3, 2, 64).is_err());
    }
}
