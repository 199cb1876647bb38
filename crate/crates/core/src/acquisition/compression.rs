use super::kspace::KSpaceData;
use crate::error::{Error, Result};
use crate::numerics::{truncated_svd, ComplexTensor, C64};
use crate::phantom::CoilMapSet;

/// PCA coil compression: virtual coil `j` receives `Σ_i conj(u_ij) y_i`
/// where `u_j` is the j-th principal eigenvector of the coil covariance
/// `Σ y yᴴ` accumulated over every sample.
#[derive(Clone, Debug)]
pub struct CoilCompression {
    /// target x source
    weights: Vec<Vec<C64>>,
    /// All covariance eigenvalues, non-increasing.
    pub eigenvalues: Vec<f64>,
}

impl CoilCompression {
    pub fn fit(y: &KSpaceData, target: usize) -> Result<Self> {
        let c = y.n_coils;
        if target == 0 || target > c {
            return Err(Error::Dimension(format!(
                "cannot compress {c} coils to {target}"
            )));
        }
        let per_coil = y.trajectory.samples_per_frame();
        let mut cov = vec![C64::new(0.0, 0.0); c * c];
        for t in 0..y.trajectory.n_frames {
            let frame = &y.samples[t * c * per_coil..(t + 1) * c * per_coil];
            for i in 0..c {
                let yi = &frame[i * per_coil..(i + 1) * per_coil];
                for j in i..c {
                    let yj = &frame[j * per_coil..(j + 1) * per_coil];
                    let mut acc = C64::new(0.0, 0.0);
                    for (a, b) in yi.iter().zip(yj) {
                        acc += a * b.conj();
                    }
                    cov[i * c + j] += acc;
                }
            }
        }
        for i in 0..c {
            for j in 0..i {
                cov[i * c + j] = cov[j * c + i].conj();
            }
        }
        let cov = ComplexTensor::new(vec![c, c], cov)?;
        let svd = truncated_svd(&cov, c)?;
        let weights = (0..target)
            .map(|j| (0..c).map(|i| svd.v.get2(i, j).conj()).collect())
            .collect();
        Ok(Self {
            weights,
            eigenvalues: svd.s,
        })
    }

    pub fn target(&self) -> usize {
        self.weights.len()
    }

    /// Sum of retained eigenvalues over the total.
    pub fn retained_energy_fraction(&self) -> f64 {
        let kept: f64 = self.eigenvalues[..self.target()].iter().sum();
        kept / self.eigenvalues.iter().sum::<f64>()
    }

    pub fn apply_kspace(&self, y: &KSpaceData) -> Result<KSpaceData> {
        let c = y.n_coils;
        if self.weights[0].len() != c {
            return Err(Error::Dimension(format!(
                "compression fitted for {} coils, data has {c}",
                self.weights[0].len()
            )));
        }
        let per_coil = y.trajectory.samples_per_frame();
        let k = self.target();
        let mut out = Vec::with_capacity(y.trajectory.n_frames * k * per_coil);
        for t in 0..y.trajectory.n_frames {
            let frame = &y.samples[t * c * per_coil..(t + 1) * c * per_coil];
            for wj in &self.weights {
                let mut v = vec![C64::new(0.0, 0.0); per_coil];
                for (i, wji) in wj.iter().enumerate() {
                    for (o, s) in v.iter_mut().zip(&frame[i * per_coil..(i + 1) * per_coil]) {
                        *o += wji * s;
                    }
                }
                out.extend(v);
            }
        }
        KSpaceData::new(y.trajectory.clone(), y.image_shape, k, y.noise_sigma, out)
    }

    /// Virtual coil sensitivities consistent with the compressed data.
    pub fn apply_maps(&self, maps: &CoilMapSet) -> Result<CoilMapSet> {
        if self.weights[0].len() != maps.n_coils() {
            return Err(Error::Dimension("coil count mismatch".into()));
        }
        let m = maps.height * maps.width;
        let out = self
            .weights
            .iter()
            .map(|wj| {
                let mut v = vec![C64::new(0.0, 0.0); m];
                for (wji, s) in wj.iter().zip(&maps.maps) {
                    for (o, si) in v.iter_mut().zip(s) {
                        *o += wji * si;
                    }
                }
                v
            })
            .collect();
        CoilMapSet::new(maps.height, maps.width, out)
    }
}

/// Compress measurements and sensitivities to `target` virtual coils.
pub fn pca_compress_coils(y: &KSpaceData, maps: &CoilMapSet, target: usize) -> Result<(KSpaceData, CoilMapSet)> {
    let cc = CoilCompression::fit(y, target)?;
    Ok((cc.apply_kspace(y)?, cc.apply_maps(maps)?))
}
