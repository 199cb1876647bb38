//! Fully connected denoising autoencoder trained on navigator signals and
//! applied to voxel time-profiles.
//!
//! Complex signals are realified: the real and imaginary parts of every row
//! are separate training vectors for one shared real network.

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::distributions::{Distribution, Uniform, WeightedIndex};
use rand::seq::SliceRandom;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::acquisition::NavigatorMatrix;
use crate::error::{dim_err, Error, Result};
use crate::numerics::{CasoratiMatrix, RngSeed, C64};

/// Profiles pushed through the network per matrix product when applying to
/// a Casorati matrix.
const APPLY_CHUNK: usize = 512;

/// Layer widths `[n, h, b, h, n]` with `b = round(n/8)` and
/// `h = ⌈(n+b)/2⌉`; `n = 400` gives the 50-feature bottleneck.
pub fn default_dims(n: usize) -> Vec<usize> {
    let b = ((n as f64 / 8.0).round() as usize).max(1);
    let h = (n + b).div_ceil(2);
    vec![n, h, b, h, n]
}

/// Weights and biases of the four fully connected layers. Weight `l` maps
/// width `dims[l]` to `dims[l+1]` and is stored output-major.
#[derive(Clone, Debug, PartialEq)]
pub struct DaeParameters {
    pub dims: Vec<usize>,
    pub weights: Vec<Array2<f64>>,
    pub biases: Vec<Array1<f64>>,
}

impl DaeParameters {
    pub fn zeros(dims: &[usize]) -> Result<Self> {
        check_dims(dims)?;
        Ok(Self {
            dims: dims.to_vec(),
            weights: dims.windows(2).map(|d| Array2::zeros((d[1], d[0]))).collect(),
            biases: dims[1..].iter().map(|&d| Array1::zeros(d)).collect(),
        })
    }

    /// He-uniform weights, zero biases.
    pub fn init(dims: &[usize], seed: RngSeed) -> Result<Self> {
        let mut p = Self::zeros(dims)?;
        let mut rng = seed.derive(10);
        for w in &mut p.weights {
            let limit = (6.0 / w.ncols() as f64).sqrt();
            let dist = Uniform::new_inclusive(-limit, limit);
            w.iter_mut().for_each(|v| *v = dist.sample(&mut rng));
        }
        Ok(p)
    }

    pub fn input_dim(&self) -> usize {
        self.dims[0]
    }

    pub fn n_params(&self) -> usize {
        self.weights.iter().map(|w| w.len()).sum::<usize>() + self.biases.iter().map(|b| b.len()).sum::<usize>()
    }

    pub fn is_finite(&self) -> bool {
        self.weights.iter().all(|w| w.iter().all(|v| v.is_finite()))
            && self.biases.iter().all(|b| b.iter().all(|v| v.is_finite()))
    }

    /// All parameters, layer by layer, weights before biases.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n_params());
        for (w, b) in self.weights.iter().zip(&self.biases) {
            out.extend(w.iter());
            out.extend(b.iter());
        }
        out
    }

    pub fn from_flat(dims: &[usize], flat: &[f64]) -> Result<Self> {
        let mut p = Self::zeros(dims)?;
        if flat.len() != p.n_params() {
            return dim_err(format!("expected {} parameters, got {}", p.n_params(), flat.len()));
        }
        let mut it = flat.iter();
        for (w, b) in p.weights.iter_mut().zip(&mut p.biases) {
            w.iter_mut().chain(b.iter_mut()).for_each(|v| *v = *it.next().unwrap());
        }
        Ok(p)
    }

    /// Evaluate the network on each row of `input`.
    pub fn forward_batch(&self, input: ArrayView2<f64>) -> Result<Array2<f64>> {
        if input.ncols() != self.input_dim() {
            return dim_err(format!(
                "network input is {}, got vectors of length {}",
                self.input_dim(),
                input.ncols()
            ));
        }
        let last = self.weights.len() - 1;
        let mut a = input.to_owned();
        for (l, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            a = a.dot(&w.t()) + b;
            if l < last {
                a.mapv_inplace(relu);
            }
        }
        Ok(a)
    }
}

fn check_dims(dims: &[usize]) -> Result<()> {
    if dims.len() != 5 || dims.contains(&0) {
        return dim_err(format!("need five positive layer widths, got {dims:?}"));
    }
    if dims[0] != dims[4] {
        return dim_err("autoencoder output width must equal its input width");
    }
    Ok(())
}

fn relu(v: f64) -> f64 {
    v.max(0.0)
}

/// Feed-forward evaluation on a single vector.
pub fn dae_apply(theta: &DaeParameters, v: &[f64]) -> Result<Vec<f64>> {
    let input = ArrayView2::from_shape((1, v.len()), v).expect("row view");
    Ok(theta.forward_batch(input)?.into_raw_vec_and_offset().0)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    /// Noise standard deviations relative to the unit peak of the
    /// normalized data.
    pub noise_levels: Vec<f64>,
    /// Relative number of noise realizations drawn at each level.
    pub realizations_per_level: Vec<usize>,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub validation_fraction: f64,
    /// Bottleneck width; `None` uses `round(n/8)`.
    pub bottleneck: Option<usize>,
    pub seed: RngSeed,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            noise_levels: vec![0.10, 0.05, 0.03, 0.01, 0.007, 0.005, 0.003, 0.001],
            realizations_per_level: vec![1, 1, 2, 2, 4, 4, 8, 8],
            epochs: 500,
            batch_size: 64,
            learning_rate: 1e-3,
            validation_fraction: 0.1,
            bottleneck: None,
            seed: RngSeed::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.into()));
        if self.noise_levels.is_empty() || self.noise_levels.len() != self.realizations_per_level.len() {
            return bad("need one realization count per noise level");
        }
        if self.noise_levels.iter().any(|s| !(*s > 0.0 && *s < 1.0)) {
            return bad("noise levels must lie in (0, 1)");
        }
        if self.realizations_per_level.contains(&0) {
            return bad("realization counts must be at least 1");
        }
        let mut order: Vec<usize> = (0..self.noise_levels.len()).collect();
        order.sort_by(|&a, &b| self.noise_levels[b].total_cmp(&self.noise_levels[a]));
        if order
            .windows(2)
            .any(|p| self.realizations_per_level[p[1]] < self.realizations_per_level[p[0]])
        {
            return bad("realization counts must not decrease as the noise level drops");
        }
        if self.epochs == 0 || self.batch_size == 0 {
            return bad("epochs and batch size must be positive");
        }
        if !(self.learning_rate > 0.0) {
            return bad("learning rate must be positive");
        }
        if !(0.0..1.0).contains(&self.validation_fraction) {
            return bad("validation fraction must lie in [0, 1)");
        }
        Ok(())
    }

    pub fn dims_for(&self, n: usize) -> Vec<usize> {
        match self.bottleneck {
            Some(b) => {
                let h = (n + b).div_ceil(2);
                vec![n, h, b, h, n]
            }
            None => default_dims(n),
        }
    }
}

/// Realified, normalized navigator vectors (one per row).
#[derive(Clone, Debug, PartialEq)]
pub struct TrainingSet {
    pub vectors: Array2<f64>,
    /// Scale removed from the data: the largest real or imaginary magnitude.
    pub gamma: f64,
}

impl TrainingSet {
    pub fn len(&self) -> usize {
        self.vectors.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dim(&self) -> usize {
        self.vectors.ncols()
    }
}

pub fn prepare_training_vectors(z: &NavigatorMatrix) -> Result<TrainingSet> {
    let (rows, n) = z.data.shape2()?;
    if rows == 0 {
        return Err(Error::DegenerateInput("navigator matrix has no rows".into()));
    }
    let gamma = z
        .data
        .data()
        .iter()
        .map(|c| c.re.abs().max(c.im.abs()))
        .fold(0.0, f64::max);
    if gamma == 0.0 {
        return Err(Error::DegenerateInput("navigator matrix is all zero".into()));
    }
    let mut vectors = Array2::zeros((2 * rows, n));
    for i in 0..rows {
        for j in 0..n {
            let c = z.data.get2(i, j);
            vectors[[2 * i, j]] = c.re / gamma;
            vectors[[2 * i + 1, j]] = c.im / gamma;
        }
    }
    Ok(TrainingSet { vectors, gamma })
}

/// Mean over rows of `‖D(noisy) − clean‖²` and its gradient.
pub fn loss_and_gradient(
    theta: &DaeParameters,
    noisy: ArrayView2<f64>,
    clean: ArrayView2<f64>,
) -> Result<(f64, DaeParameters)> {
    if noisy.dim() != clean.dim() || noisy.ncols() != theta.input_dim() {
        return dim_err("batch shape does not match the network");
    }
    let batch = noisy.nrows() as f64;
    let last = theta.weights.len() - 1;
    // Activations, including the input.
    let mut acts = vec![noisy.to_owned()];
    for (l, (w, b)) in theta.weights.iter().zip(&theta.biases).enumerate() {
        let mut a = acts[l].dot(&w.t()) + b;
        if l < last {
            a.mapv_inplace(relu);
        }
        acts.push(a);
    }
    let diff = &acts[last + 1] - &clean;
    let loss = diff.iter().map(|v| v * v).sum::<f64>() / batch;

    let mut grad = DaeParameters::zeros(&theta.dims)?;
    let mut delta = diff * (2.0 / batch);
    for l in (0..=last).rev() {
        grad.weights[l] = delta.t().dot(&acts[l]);
        grad.biases[l] = delta.sum_axis(Axis(0));
        if l > 0 {
            let mut back = delta.dot(&theta.weights[l]);
            // ReLU derivative from the post-activation values.
            back.zip_mut_with(&acts[l], |d, &a| {
                if a <= 0.0 {
                    *d = 0.0
                }
            });
            delta = back;
        }
    }
    Ok((loss, grad))
}

struct Adam {
    m: DaeParameters,
    v: DaeParameters,
    t: i32,
    lr: f64,
}

impl Adam {
    const BETA1: f64 = 0.9;
    const BETA2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    fn new(dims: &[usize], lr: f64) -> Result<Self> {
        Ok(Self {
            m: DaeParameters::zeros(dims)?,
            v: DaeParameters::zeros(dims)?,
            t: 0,
            lr,
        })
    }

    fn step(&mut self, theta: &mut DaeParameters, grad: &DaeParameters) {
        self.t += 1;
        let c1 = 1.0 - Self::BETA1.powi(self.t);
        let c2 = 1.0 - Self::BETA2.powi(self.t);
        let lr = self.lr;
        let update = |p: &mut f64, g: f64, m: &mut f64, v: &mut f64| {
            *m = Self::BETA1 * *m + (1.0 - Self::BETA1) * g;
            *v = Self::BETA2 * *v + (1.0 - Self::BETA2) * g * g;
            *p -= lr * (*m / c1) / ((*v / c2).sqrt() + Self::EPS);
        };
        for l in 0..theta.weights.len() {
            ndarray::Zip::from(&mut theta.weights[l])
                .and(&grad.weights[l])
                .and(&mut self.m.weights[l])
                .and(&mut self.v.weights[l])
                .for_each(|p, &g, m, v| update(p, g, m, v));
            ndarray::Zip::from(&mut theta.biases[l])
                .and(&grad.biases[l])
                .and(&mut self.m.biases[l])
                .and(&mut self.v.biases[l])
                .for_each(|p, &g, m, v| update(p, g, m, v));
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    /// Mean noisy-input loss over each epoch.
    pub train_loss: Vec<f64>,
    pub validation_loss: Vec<f64>,
    /// Epoch (0-based) whose parameters were kept.
    pub best_epoch: usize,
}

#[derive(Clone, Debug)]
pub struct TrainedDae {
    pub params: DaeParameters,
    pub gamma: f64,
    pub config: TrainConfig,
    pub history: TrainHistory,
}

impl TrainedDae {
    /// `D` applied to every voxel profile of `x`.
    pub fn apply(&self, x: &CasoratiMatrix) -> Result<CasoratiMatrix> {
        dae_apply_casorati(&self.params, x, self.gamma)
    }
}

/// Add noise to `clean` in place, drawing one level per row.
fn corrupt(
    rows: &mut Array2<f64>,
    levels: &[f64],
    pick: &WeightedIndex<usize>,
    rng: &mut impl rand::Rng,
) {
    for mut row in rows.rows_mut() {
        let sigma = levels[pick.sample(rng)];
        row.iter_mut().for_each(|v| {
            let s: f64 = StandardNormal.sample(rng);
            *v += sigma * s;
        });
    }
}

/// Mini-batch Adam on the multi-level denoising loss. Each epoch visits
/// every training vector once, each time with a fresh noise draw at a level
/// sampled in proportion to its realization weight. The parameters with
/// the lowest loss on a fixed noisy validation split are returned.
pub fn dae_train(ts: &TrainingSet, cfg: &TrainConfig) -> Result<TrainedDae> {
    cfg.validate()?;
    if ts.is_empty() {
        return Err(Error::DegenerateInput("empty training set".into()));
    }
    let dims = cfg.dims_for(ts.dim());
    if ts.len() < dims[2] {
        log::warn!(
            "only {} training vectors for a bottleneck of {}",
            ts.len(),
            dims[2]
        );
    }
    let pick = WeightedIndex::new(&cfg.realizations_per_level).map_err(|e| Error::Config(e.to_string()))?;
    let mut rng = cfg.seed.derive(11);

    let mut order: Vec<usize> = (0..ts.len()).collect();
    order.shuffle(&mut rng);
    let n_val = if ts.len() < 2 {
        0
    } else {
        ((ts.len() as f64 * cfg.validation_fraction).round() as usize).min(ts.len() - 1)
    };
    let (val_idx, train_idx) = order.split_at(n_val);
    let train = ts.vectors.select(Axis(0), train_idx);
    // With no held-out vectors the training set doubles as validation.
    let val_clean = if n_val == 0 {
        train.clone()
    } else {
        ts.vectors.select(Axis(0), val_idx)
    };
    let mut val_noisy = val_clean.clone();
    corrupt(&mut val_noisy, &cfg.noise_levels, &pick, &mut rng);

    let mut theta = DaeParameters::init(&dims, cfg.seed)?;
    let mut adam = Adam::new(&dims, cfg.learning_rate)?;
    let mut best = theta.clone();
    let mut best_val = f64::INFINITY;
    let mut history = TrainHistory::default();
    let mut idx: Vec<usize> = (0..train.nrows()).collect();

    for epoch in 0..cfg.epochs {
        let checkpoint = theta.clone();
        idx.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for chunk in idx.chunks(cfg.batch_size) {
            let clean = train.select(Axis(0), chunk);
            let mut noisy = clean.clone();
            corrupt(&mut noisy, &cfg.noise_levels, &pick, &mut rng);
            let (loss, grad) = loss_and_gradient(&theta, noisy.view(), clean.view())?;
            if !loss.is_finite() {
                return Err(Error::TrainingDiverged {
                    epoch,
                    checkpoint: Box::new(checkpoint),
                });
            }
            epoch_loss += loss * chunk.len() as f64;
            adam.step(&mut theta, &grad);
        }
        let val = validation_loss(&theta, &val_noisy, &val_clean)?;
        if !val.is_finite() || !theta.is_finite() {
            return Err(Error::TrainingDiverged {
                epoch,
                checkpoint: Box::new(checkpoint),
            });
        }
        history.train_loss.push(epoch_loss / train.nrows() as f64);
        history.validation_loss.push(val);
        if val < best_val {
            best_val = val;
            best = theta.clone();
            history.best_epoch = epoch;
        }
        if epoch % 50 == 0 || epoch + 1 == cfg.epochs {
            log::debug!("epoch {epoch}: train {:.3e} val {val:.3e}", history.train_loss[epoch]);
        }
    }
    Ok(TrainedDae {
        params: best,
        gamma: ts.gamma,
        config: cfg.clone(),
        history,
    })
}

fn validation_loss(theta: &DaeParameters, noisy: &Array2<f64>, clean: &Array2<f64>) -> Result<f64> {
    let out = theta.forward_batch(noisy.view())?;
    Ok((out - clean).iter().map(|v| v * v).sum::<f64>() / clean.nrows() as f64)
}

/// Denoise every voxel profile of `x`: real and imaginary parts are scaled
/// by `1/gamma`, passed through the network, rescaled and recombined.
pub fn dae_apply_casorati(theta: &DaeParameters, x: &CasoratiMatrix, gamma: f64) -> Result<CasoratiMatrix> {
    let n = x.frames();
    if n != theta.input_dim() {
        return dim_err(format!(
            "network expects profiles of length {}, matrix has {n} frames",
            theta.input_dim()
        ));
    }
    if !(gamma > 0.0) {
        return Err(Error::Config(format!("scale must be positive, got {gamma}")));
    }
    let mut out = vec![C64::new(0.0, 0.0); x.data().len()];
    out.par_chunks_mut(APPLY_CHUNK * n)
        .zip(x.data().par_chunks(APPLY_CHUNK * n))
        .try_for_each(|(dst, src)| -> Result<()> {
            let rows = src.len() / n;
            let mut input = Array2::zeros((2 * rows, n));
            for (i, prof) in src.chunks(n).enumerate() {
                for (j, c) in prof.iter().enumerate() {
                    input[[2 * i, j]] = c.re / gamma;
                    input[[2 * i + 1, j]] = c.im / gamma;
                }
            }
            let y = theta.forward_batch(input.view())?;
            for (i, prof) in dst.chunks_mut(n).enumerate() {
                for (j, c) in prof.iter_mut().enumerate() {
                    *c = C64::new(y[[2 * i, j]], y[[2 * i + 1, j]]) * gamma;
                }
            }
            Ok(())
        })?;
    CasoratiMatrix::new(x.height(), x.width(), n, out)
}

/// `‖X − D(X)‖²_F` together with `D(X)`.
pub fn dae_residual(theta: &DaeParameters, x: &CasoratiMatrix, gamma: f64) -> Result<(f64, CasoratiMatrix)> {
    let q = dae_apply_casorati(theta, x, gamma)?;
    let r = x.data().iter().zip(q.data()).map(|(a, b)| (a - b).norm_sqr()).sum();
    Ok((r, q))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::ComplexTensor;
    use ndarray::Array;
    use rand::Rng;

    fn tiny() -> DaeParameters {
        DaeParameters::init(&[8, 5, 2, 5, 8], RngSeed(5)).unwrap()
    }

    #[test]
    fn default_architecture() {
        assert_eq!(default_dims(400), vec![400, 225, 50, 225, 400]);
        assert_eq!(default_dims(200), vec![200, 113, 25, 113, 200]);
    }

    #[test]
    fn zero_network_outputs_zero() {
        let p = DaeParameters::zeros(&default_dims(16)).unwrap();
        let out = dae_apply(&p, &[1.5; 16]).unwrap();
        assert!(out.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn constant_network_outputs_bias() {
        let mut p = tiny();
        p.weights[0].fill(0.0);
        p.biases = vec![Array1::zeros(5), Array1::zeros(2), Array1::zeros(5), Array::linspace(-1.0, 1.0, 8)];
        let out = dae_apply(&p, &[0.3, -2.0, 1.0, 0.0, 4.0, 1.0, 1.0, 9.0]).unwrap();
        for (o, b) in out.iter().zip(p.biases[3].iter()) {
            assert_eq!(o, b);
        }
    }

    #[test]
    fn wrong_input_length() {
        assert!(matches!(dae_apply(&tiny(), &[1.0; 7]), Err(Error::Dimension(_))));
    }

    #[test]
    fn flat_round_trip() {
        let p = tiny();
        assert_eq!(DaeParameters::from_flat(&p.dims, &p.to_flat()).unwrap(), p);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = RngSeed(9).rng();
        let mut theta = tiny();
        // Nonzero biases keep units away from the ReLU kink.
        for b in &mut theta.biases {
            b.iter_mut().for_each(|v| *v = rng.gen_range(-0.5..0.5));
        }
        let clean = Array2::from_shape_fn((6, 8), |_| rng.gen_range(-1.0..1.0));
        let noisy = &clean + &Array2::from_shape_fn((6, 8), |_| rng.gen_range(-0.2..0.2));
        let (_, grad) = loss_and_gradient(&theta, noisy.view(), clean.view()).unwrap();
        let analytic = grad.to_flat();
        let base = theta.to_flat();
        let h = 1e-5;
        for k in 0..base.len() {
            let mut p = base.clone();
            p[k] += h;
            let up = DaeParameters::from_flat(&theta.dims, &p).unwrap();
            p[k] -= 2.0 * h;
            let dn = DaeParameters::from_flat(&theta.dims, &p).unwrap();
            let lu = loss_and_gradient(&up, noisy.view(), clean.view()).unwrap().0;
            let ld = loss_and_gradient(&dn, noisy.view(), clean.view()).unwrap().0;
            let fd = (lu - ld) / (2.0 * h);
            let err = (fd - analytic[k]).abs();
            assert!(err <= 1e-5 * analytic[k].abs().max(1e-3), "param {k}: fd {fd} analytic {}", analytic[k]);
        }
    }

    fn nav(rows: usize, n: usize, f: impl Fn(usize, usize) -> C64) -> NavigatorMatrix {
        NavigatorMatrix {
            rows: (0..rows)
                .map(|i| crate::acquisition::NavigatorRow {
                    spoke: 0,
                    position: i,
                    coil: 0,
                })
                .collect(),
            data: ComplexTensor::from_fn2(rows, n, f),
        }
    }

    #[test]
    fn realification_shapes_and_scale() {
        let z = nav(1, 4, |_, j| C64::new(j as f64 - 1.0, 0.5));
        let ts = prepare_training_vectors(&z).unwrap();
        assert_eq!(ts.len(), 2);
        assert_eq!(ts.gamma, 2.0);
        assert_eq!(ts.vectors.iter().fold(0.0f64, |m, v| m.max(v.abs())), 1.0);

        let real = nav(3, 4, |i, j| C64::new((i + j) as f64, 0.0));
        let ts = prepare_training_vectors(&real).unwrap();
        assert_eq!(ts.len(), 6);
        for i in 0..3 {
            assert!(ts.vectors.row(2 * i + 1).iter().all(|&v| v == 0.0));
        }
        let zero = nav(2, 4, |_, _| C64::new(0.0, 0.0));
        assert!(matches!(prepare_training_vectors(&zero), Err(Error::DegenerateInput(_))));
    }

    #[test]
    fn overfits_single_vector() {
        let z = nav(1, 32, |_, j| C64::new((j as f64 * 0.4).sin() + 0.2, 0.0));
        let ts = prepare_training_vectors(&z).unwrap();
        let single = TrainingSet {
            vectors: ts.vectors.select(Axis(0), &[0]),
            gamma: ts.gamma,
        };
        let cfg = TrainConfig {
            noise_levels: vec![0.001],
            realizations_per_level: vec![1],
            epochs: 2000,
            ..Default::default()
        };
        let trained = dae_train(&single, &cfg).unwrap();
        let v = single.vectors.row(0).to_vec();
        let out = dae_apply(&trained.params, &v).unwrap();
        let err: f64 = out.iter().zip(&v).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let nv: f64 = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        assert!(err / nv <= 1e-2, "relative residual {}", err / nv);
    }

    #[test]
    fn divergence_reports_checkpoint() {
        let z = nav(8, 16, |i, j| C64::new((i * j) as f64, 1.0));
        let ts = prepare_training_vectors(&z).unwrap();
        let cfg = TrainConfig {
            learning_rate: 1e300,
            epochs: 50,
            ..Default::default()
        };
        match dae_train(&ts, &cfg) {
            Err(Error::TrainingDiverged { checkpoint, .. }) => assert!(checkpoint.is_finite()),
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn casorati_application_is_nonlinear() {
        // With zero biases a ReLU network is positively homogeneous.
        let mut p = DaeParameters::init(&default_dims(6), RngSeed(3)).unwrap();
        p.biases.iter_mut().for_each(|b| b.fill(0.1));
        let x = CasoratiMatrix::new(2, 2, 6, (0..24).map(|k| C64::new(k as f64 * 0.1 - 1.0, 0.3)).collect()).unwrap();
        let mut x2 = x.clone();
        x2.data_mut().iter_mut().for_each(|v| *v *= 2.0);
        let d1 = dae_apply_casorati(&p, &x, 1.0).unwrap();
        let d2 = dae_apply_casorati(&p, &x2, 1.0).unwrap();
        let gap = d2.data().iter().zip(d1.data()).map(|(a, b)| (a - 2.0 * b).norm()).fold(0.0, f64::max);
        assert!(gap > 1e-6);
    }

    #[test]
    fn casorati_rows_match_vector_application() {
        let p = DaeParameters::init(&default_dims(6), RngSeed(3)).unwrap();
        let x = CasoratiMatrix::new(2, 2, 6, (0..24).map(|k| C64::new((k as f64).cos(), (k as f64 * 0.7).sin())).collect())
            .unwrap();
        let d = dae_apply_casorati(&p, &x, 2.0).unwrap();
        for px in 0..4 {
            let re: Vec<f64> = x.profile(px).iter().map(|c| c.re / 2.0).collect();
            let im: Vec<f64> = x.profile(px).iter().map(|c| c.im / 2.0).collect();
            let dr = dae_apply(&p, &re).unwrap();
            let di = dae_apply(&p, &im).unwrap();
            for j in 0..6 {
                let expect = C64::new(dr[j], di[j]) * 2.0;
                assert!((d.profile(px)[j] - expect).norm() <= 1e-12);
            }
        }
        assert!(matches!(dae_apply_casorati(&p, &x, 0.0), Err(Error::Config(_))));
    }

    #[test]
    fn config_validation() {
        assert!(TrainConfig::default().validate().is_ok());
        let bad = TrainConfig {
            realizations_per_level: vec![8, 8, 4, 4, 2, 2, 1, 1],
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = TrainConfig {
            noise_levels: vec![1.5],
            realizations_per_level: vec![1],
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }
}
