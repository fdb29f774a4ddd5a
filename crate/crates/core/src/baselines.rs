//! Classical comparators: logistic regression and a small 1D CNN trained on
//! squared amplitudes or loop-gas angles.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::datastore::PhaseSample;
use crate::error::{Error, Result};
use crate::optim::{step_decay, Adam};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureKind {
    /// `|psi_b|^2` over the computational basis.
    AmplitudeSq,
    /// Optimized loop-gas angles, one per plaquette.
    PlgcTheta,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub kind: FeatureKind,
    pub rows: Vec<Vec<f64>>,
}

impl FeatureMatrix {
    pub fn extract(samples: &[&PhaseSample], kind: FeatureKind) -> Result<Self> {
        let rows = samples
            .iter()
            .map(|s| match kind {
                FeatureKind::AmplitudeSq => Ok(s.state.probabilities()),
                FeatureKind::PlgcTheta if s.thetas.is_empty() => Err(Error::invalid(format!(
                    "sample at x = {} has no angles",
                    s.x
                ))),
                FeatureKind::PlgcTheta => Ok(s.thetas.thetas().to_vec()),
            })
            .collect::<Result<Vec<_>>>()?;
        if let Some(first) = rows.first() {
            if let Some(bad) = rows.iter().find(|r| r.len() != first.len()) {
                return Err(Error::DimensionMismatch {
                    expected: first.len(),
                    found: bad.len(),
                });
            }
        }
        Ok(Self { kind, rows })
    }

    pub fn num_samples(&self) -> usize {
        self.rows.len()
    }

    pub fn num_features(&self) -> usize {
        self.rows.first().map_or(0, Vec::len)
    }

    pub fn select(&self, indices: &[usize]) -> Self {
        Self {
            kind: self.kind,
            rows: indices.iter().map(|&i| self.rows[i].clone()).collect(),
        }
    }
}

/// Per-feature z-score fitted on one matrix and applied to others.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardization {
    pub mean: Vec<f64>,
    pub stddev: Vec<f64>,
}

impl Standardization {
    pub fn fit(features: &FeatureMatrix) -> Result<Self> {
        let n = features.num_samples();
        if n == 0 {
            return Err(Error::invalid("cannot standardize an empty matrix"));
        }
        let d = features.num_features();
        let mut mean = vec![0.0; d];
        for row in &features.rows {
            for (m, v) in mean.iter_mut().zip(row) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n as f64);
        let mut var = vec![0.0; d];
        for row in &features.rows {
            for ((s, v), m) in var.iter_mut().zip(row).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        let stddev = var.iter().map(|s| (s / n as f64).sqrt()).collect();
        Ok(Self { mean, stddev })
    }

    /// Features with zero spread are left untouched.
    pub fn apply(&self, features: &mut FeatureMatrix) -> Result<()> {
        if features.num_samples() > 0 && features.num_features() != self.mean.len() {
            return Err(Error::DimensionMismatch {
                expected: self.mean.len(),
                found: features.num_features(),
            });
        }
        for row in &mut features.rows {
            for ((v, m), s) in row.iter_mut().zip(&self.mean).zip(&self.stddev) {
                if *s > 1e-12 {
                    *v = (*v - m) / s;
                }
            }
        }
        Ok(())
    }
}

/// A binary classifier producing one logit per feature row.
pub trait Classifier {
    fn num_features(&self) -> usize;
    fn params(&self) -> Vec<f64>;
    fn set_params(&mut self, params: &[f64]);
    fn logit(&self, row: &[f64]) -> f64;
    /// Adds `scale * d logit / d params` into `grad`.
    fn accumulate_logit_gradient(&self, row: &[f64], scale: f64, grad: &mut [f64]);
    /// Leading parameters that carry the L2 penalty; biases come after them.
    fn num_penalized(&self) -> usize;
}

fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn check_dims<M: Classifier>(model: &M, rows: &[&[f64]]) -> Result<()> {
    match rows.iter().find(|r| r.len() != model.num_features()) {
        Some(r) => Err(Error::DimensionMismatch {
            expected: model.num_features(),
            found: r.len(),
        }),
        None => Ok(()),
    }
}

/// Mean binary cross-entropy on logits plus `l2 * |w|^2 / N`.
pub fn classifier_loss<M: Classifier>(
    model: &M,
    rows: &[&[f64]],
    targets: &[f64],
    l2: f64,
) -> Result<f64> {
    Ok(classifier_gradient(model, rows, targets, l2)?.0)
}

pub fn classifier_gradient<M: Classifier>(
    model: &M,
    rows: &[&[f64]],
    targets: &[f64],
    l2: f64,
) -> Result<(f64, Vec<f64>)> {
    if rows.is_empty() {
        return Err(Error::invalid("empty batch"));
    }
    if rows.len() != targets.len() {
        return Err(Error::DimensionMismatch {
            expected: rows.len(),
            found: targets.len(),
        });
    }
    check_dims(model, rows)?;
    let n = rows.len() as f64;
    let params = model.params();
    let mut grad = vec![0.0; params.len()];
    let mut loss = 0.0;
    for (row, &t) in rows.iter().zip(targets) {
        let z = model.logit(row);
        loss += softplus(z) - t * z;
        model.accumulate_logit_gradient(row, (sigmoid(z) - t) / n, &mut grad);
    }
    loss /= n;
    for i in 0..model.num_penalized() {
        loss += l2 * params[i] * params[i] / n;
        grad[i] += 2.0 * l2 * params[i] / n;
    }
    Ok((loss, grad))
}

/// `logit > 0` maps to +1, everything else to -1.
pub fn predict_labels<M: Classifier>(model: &M, features: &FeatureMatrix) -> Result<Vec<i8>> {
    let rows: Vec<&[f64]> = features.rows.iter().map(Vec::as_slice).collect();
    check_dims(model, &rows)?;
    Ok(rows
        .iter()
        .map(|r| if model.logit(r) > 0.0 { 1 } else { -1 })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogReg {
    pub weights: Vec<f64>,
    pub bias: f64,
}

impl LogReg {
    pub fn new(num_features: usize, rng: &mut impl Rng) -> Self {
        let scale = 0.01;
        Self {
            weights: (0..num_features)
                .map(|_| rng.gen_range(-scale..scale))
                .collect(),
            bias: 0.0,
        }
    }
}

impl Classifier for LogReg {
    fn num_features(&self) -> usize {
        self.weights.len()
    }

    fn params(&self) -> Vec<f64> {
        let mut p = self.weights.clone();
        p.push(self.bias);
        p
    }

    fn set_params(&mut self, params: &[f64]) {
        let d = self.weights.len();
        self.weights.copy_from_slice(&params[..d]);
        self.bias = params[d];
    }

    fn logit(&self, row: &[f64]) -> f64 {
        self.weights
            .iter()
            .zip(row)
            .map(|(w, x)| w * x)
            .sum::<f64>()
            + self.bias
    }

    fn accumulate_logit_gradient(&self, row: &[f64], scale: f64, grad: &mut [f64]) {
        let d = self.weights.len();
        for (g, x) in grad[..d].iter_mut().zip(row) {
            *g += scale * x;
        }
        grad[d] += scale;
    }

    fn num_penalized(&self) -> usize {
        self.weights.len()
    }
}

pub const CNN_CHANNELS: usize = 8;
pub const CNN_KERNEL: usize = 3;

/// Valid 1D convolution (8 channels, kernel 3, stride 1) with ReLU, global
/// average pooling, and a dense layer to one logit.
///
/// Flat parameter order: kernels by channel, dense weights, conv biases,
/// dense bias.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cnn1d {
    num_features: usize,
    /// `[channel][tap]`.
    pub kernels: Vec<[f64; CNN_KERNEL]>,
    pub conv_bias: Vec<f64>,
    pub dense: Vec<f64>,
    pub dense_bias: f64,
}

const CNN_PARAMS: usize = CNN_CHANNELS * CNN_KERNEL + 2 * CNN_CHANNELS + 1;

impl Cnn1d {
    pub fn new(num_features: usize, rng: &mut impl Rng) -> Result<Self> {
        if num_features < CNN_KERNEL {
            return Err(Error::invalid(format!(
                "1D CNN needs at least {CNN_KERNEL} features, got {num_features}"
            )));
        }
        let k = (1.0 / CNN_KERNEL as f64).sqrt();
        let h = (1.0 / CNN_CHANNELS as f64).sqrt();
        Ok(Self {
            num_features,
            kernels: (0..CNN_CHANNELS)
                .map(|_| std::array::from_fn(|_| rng.gen_range(-k..k)))
                .collect(),
            conv_bias: vec![0.1; CNN_CHANNELS],
            dense: (0..CNN_CHANNELS).map(|_| rng.gen_range(-h..h)).collect(),
            dense_bias: 0.0,
        })
    }

    fn positions(&self) -> usize {
        self.num_features - CNN_KERNEL + 1
    }

    fn pre_activation(&self, c: usize, row: &[f64], t: usize) -> f64 {
        let w = &self.kernels[c];
        w[0] * row[t] + w[1] * row[t + 1] + w[2] * row[t + 2] + self.conv_bias[c]
    }

    /// Smallest `|pre-activation|` over all channels and positions.
    pub fn min_abs_preactivation(&self, row: &[f64]) -> f64 {
        (0..CNN_CHANNELS)
            .flat_map(|c| (0..self.positions()).map(move |t| (c, t)))
            .map(|(c, t)| self.pre_activation(c, row, t).abs())
            .fold(f64::INFINITY, f64::min)
    }

    fn pooled(&self, row: &[f64]) -> [f64; CNN_CHANNELS] {
        let inv = 1.0 / self.positions() as f64;
        std::array::from_fn(|c| {
            (0..self.positions())
                .map(|t| self.pre_activation(c, row, t).max(0.0))
                .sum::<f64>()
                * inv
        })
    }
}

impl Classifier for Cnn1d {
    fn num_features(&self) -> usize {
        self.num_features
    }

    fn params(&self) -> Vec<f64> {
        let mut p = Vec::with_capacity(CNN_PARAMS);
        for k in &self.kernels {
            p.extend_from_slice(k);
        }
        p.extend_from_slice(&self.dense);
        p.extend_from_slice(&self.conv_bias);
        p.push(self.dense_bias);
        p
    }

    fn set_params(&mut self, params: &[f64]) {
        let mut it = params.iter().copied();
        for k in &mut self.kernels {
            for w in k.iter_mut() {
                *w = it.next().expect("parameter count");
            }
        }
        for v in &mut self.dense {
            *v = it.next().expect("parameter count");
        }
        for b in &mut self.conv_bias {
            *b = it.next().expect("parameter count");
        }
        self.dense_bias = it.next().expect("parameter count");
    }

    fn logit(&self, row: &[f64]) -> f64 {
        let g = self.pooled(row);
        self.dense.iter().zip(&g).map(|(v, g)| v * g).sum::<f64>() + self.dense_bias
    }

    fn accumulate_logit_gradient(&self, row: &[f64], scale: f64, grad: &mut [f64]) {
        let conv_w = 0;
        let dense = CNN_CHANNELS * CNN_KERNEL;
        let conv_b = dense + CNN_CHANNELS;
        let inv = 1.0 / self.positions() as f64;
        let g = self.pooled(row);
        for c in 0..CNN_CHANNELS {
            grad[dense + c] += scale * g[c];
            let upstream = scale * self.dense[c] * inv;
            let mut dw = [0.0; CNN_KERNEL];
            let mut db = 0.0;
            for t in 0..self.positions() {
                if self.pre_activation(c, row, t) > 0.0 {
                    db += 1.0;
                    for (k, d) in dw.iter_mut().enumerate() {
                        *d += row[t + k];
                    }
                }
            }
            for k in 0..CNN_KERNEL {
                grad[conv_w + c * CNN_KERNEL + k] += upstream * dw[k];
            }
            grad[conv_b + c] += upstream * db;
        }
        grad[conv_b + CNN_CHANNELS] += scale;
    }

    fn num_penalized(&self) -> usize {
        CNN_CHANNELS * CNN_KERNEL + CNN_CHANNELS
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BaselineTrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub l2_strength: f64,
    pub lr_decay_factor: f64,
    pub lr_decay_every: usize,
    pub seed: u64,
}

impl Default for BaselineTrainConfig {
    fn default() -> Self {
        Self {
            epochs: 100,
            batch_size: 24,
            learning_rate: 0.01,
            l2_strength: 1e-4,
            lr_decay_factor: 0.5,
            lr_decay_every: 30,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct BaselineOutcome<M> {
    pub model: M,
    pub loss_history: Vec<f64>,
}

fn targets_from_labels(labels: &[i8]) -> Result<Vec<f64>> {
    if labels.iter().any(|&l| l != -1 && l != 1) {
        return Err(Error::invalid("labels must be -1 or +1"));
    }
    if labels.iter().all(|&l| l == labels[0]) {
        return Err(Error::invalid("training set holds a single class"));
    }
    Ok(labels
        .iter()
        .map(|&l| if l > 0 { 1.0 } else { 0.0 })
        .collect())
}

fn fit<M: Classifier>(
    mut model: M,
    features: &FeatureMatrix,
    labels: &[i8],
    config: &BaselineTrainConfig,
    rng: &mut ChaCha8Rng,
) -> Result<BaselineOutcome<M>> {
    if config.batch_size == 0 || config.epochs == 0 || !(config.learning_rate > 0.0) {
        return Err(Error::invalid(
            "epochs, batch size, and learning rate must be positive",
        ));
    }
    let targets = targets_from_labels(labels)?;
    let rows: Vec<&[f64]> = features.rows.iter().map(Vec::as_slice).collect();
    check_dims(&model, &rows)?;
    let mut params = model.params();
    let mut adam = Adam::new(params.len());
    let mut order: Vec<usize> = (0..rows.len()).collect();
    let mut history = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        let lr = step_decay(
            config.learning_rate,
            config.lr_decay_factor,
            config.lr_decay_every,
            epoch,
        );
        order.shuffle(rng);
        let mut total = 0.0;
        let mut batches = 0;
        for chunk in order.chunks(config.batch_size) {
            let batch: Vec<&[f64]> = chunk.iter().map(|&i| rows[i]).collect();
            let t: Vec<f64> = chunk.iter().map(|&i| targets[i]).collect();
            let (loss, grad) = classifier_gradient(&model, &batch, &t, config.l2_strength)?;
            adam.step(&mut params, &grad, lr);
            model.set_params(&params);
            total += loss;
            batches += 1;
        }
        let mean = total / batches as f64;
        if !mean.is_finite() {
            return Err(Error::Numerical("baseline training diverged".into()));
        }
        history.push(mean);
    }
    Ok(BaselineOutcome {
        model,
        loss_history: history,
    })
}

fn check_training_set(features: &FeatureMatrix, labels: &[i8]) -> Result<()> {
    if features.num_samples() == 0 {
        return Err(Error::invalid("empty training set"));
    }
    if features.num_samples() != labels.len() {
        return Err(Error::DimensionMismatch {
            expected: features.num_samples(),
            found: labels.len(),
        });
    }
    Ok(())
}

pub fn train_logreg(
    features: &FeatureMatrix,
    labels: &[i8],
    config: &BaselineTrainConfig,
) -> Result<BaselineOutcome<LogReg>> {
    check_training_set(features, labels)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let model = LogReg::new(features.num_features(), &mut rng);
    fit(model, features, labels, config, &mut rng)
}

pub fn train_cnn1d(
    features: &FeatureMatrix,
    labels: &[i8],
    config: &BaselineTrainConfig,
) -> Result<BaselineOutcome<Cnn1d>> {
    check_training_set(features, labels)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let model = Cnn1d::new(features.num_features(), &mut rng)?;
    fit(model, features, labels, config, &mut rng)
}
