use super::operator::{forward, RadialSense};
use super::trajectory::RadialTrajectory;
use crate::error::{Error, Result};
use crate::numerics::{complex_gaussian, CasoratiMatrix, RngSeed, C64};
use crate::phantom::CoilMapSet;

/// Radial multi-coil measurements, indexed `(frame, coil, spoke, readout)`.
#[derive(Clone, Debug, PartialEq)]
pub struct KSpaceData {
    pub trajectory: RadialTrajectory,
    /// `(height, width)` of the encoded images.
    pub image_shape: (usize, usize),
    pub n_coils: usize,
    /// Standard deviation of the complex noise added per sample.
    pub noise_sigma: f64,
    pub samples: Vec<C64>,
}

impl KSpaceData {
    pub fn new(
        trajectory: RadialTrajectory,
        image_shape: (usize, usize),
        n_coils: usize,
        noise_sigma: f64,
        samples: Vec<C64>,
    ) -> Result<Self> {
        let expected = trajectory.n_frames * n_coils * trajectory.samples_per_frame();
        if samples.len() != expected || n_coils == 0 {
            return Err(Error::Dimension(format!(
                "k-space needs {expected} samples for {n_coils} coils, got {}",
                samples.len()
            )));
        }
        Ok(Self {
            trajectory,
            image_shape,
            n_coils,
            noise_sigma,
            samples,
        })
    }

    /// `[frames, coils, spokes, readout]`
    pub fn dims(&self) -> [usize; 4] {
        [
            self.trajectory.n_frames,
            self.n_coils,
            self.trajectory.spokes_per_frame,
            self.trajectory.n_readout,
        ]
    }

    fn index(&self, frame: usize, coil: usize, spoke: usize) -> usize {
        let [_, c, s, r] = self.dims();
        ((frame * c + coil) * s + spoke) * r
    }

    /// Readout of one spoke.
    pub fn spoke(&self, frame: usize, coil: usize, spoke: usize) -> &[C64] {
        let i = self.index(frame, coil, spoke);
        &self.samples[i..i + self.trajectory.n_readout]
    }
}

/// `Y = A(X) + N`: frame-wise NUFFT of the coil-weighted images plus i.i.d.
/// circular complex Gaussian noise with `E|n|² = noise_sigma²`.
pub fn acquire(
    x: &CasoratiMatrix,
    coils: &CoilMapSet,
    trajectory: &RadialTrajectory,
    noise_sigma: f64,
    seed: RngSeed,
) -> Result<KSpaceData> {
    if !(noise_sigma >= 0.0) || !noise_sigma.is_finite() {
        return Err(Error::Config(format!("noise sigma must be >= 0, got {noise_sigma}")));
    }
    let op = RadialSense::new(trajectory.clone(), coils.clone())?;
    let mut samples = forward(&op, x)?;
    if noise_sigma > 0.0 {
        let mut rng = seed.derive(3);
        for s in samples.iter_mut() {
            *s += complex_gaussian(&mut rng, noise_sigma);
        }
    }
    KSpaceData::new(
        trajectory.clone(),
        (coils.height, coils.width),
        coils.n_coils(),
        noise_sigma,
        samples,
    )
}
