//! Feed-forward classification head.
//!
//! A ReLU multilayer perceptron with a softmax output, trained by seeded
//! mini-batch gradient descent on cross-entropy. Everything runs in `f64`
//! on one thread, so a fixed seed and dataset reproduce the same model.

mod metrics;
mod model_file;

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use metrics::{evaluate, ClassMetrics, Metrics};
pub use model_file::{CEFM_MAGIC, CEFM_VERSION};

#[derive(Debug, Error)]
pub enum ClassifierError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("non-finite loss at epoch {epoch}, batch {batch}")]
    NonFiniteLoss { epoch: usize, batch: usize },
    #[error("empty evaluation set")]
    EmptyEvalSet,
    #[error("model file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum Optimizer {
    Sgd,
    #[default]
    Adam,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum ClassWeights {
    #[default]
    Uniform,
    /// `n / (num_classes * count(c))` per class, from the training labels.
    Balanced,
}

impl FromStr for Optimizer {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_lowercase().as_str() {
            "sgd" => Ok(Optimizer::Sgd),
            "adam" => Ok(Optimizer::Adam),
            other => Err(format!("unknown optimizer {other:?}")),
        }
    }
}

impl FromStr for ClassWeights {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_lowercase().as_str() {
            "none" | "uniform" => Ok(ClassWeights::Uniform),
            "balanced" => Ok(ClassWeights::Balanced),
            other => Err(format!("unknown class weighting {other:?}")),
        }
    }
}

impl fmt::Display for Optimizer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Optimizer::Sgd => "sgd",
            Optimizer::Adam => "adam",
        })
    }
}

impl fmt::Display for ClassWeights {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ClassWeights::Uniform => "none",
            ClassWeights::Balanced => "balanced",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpConfig {
    pub input_dim: usize,
    pub hidden_dims: Vec<usize>,
    pub num_classes: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub l2: f64,
    pub optimizer: Optimizer,
    pub class_weights: ClassWeights,
}

impl MlpConfig {
    pub fn new(input_dim: usize, num_classes: usize) -> Self {
        Self {
            input_dim,
            hidden_dims: vec![256],
            num_classes,
            learning_rate: 1e-3,
            epochs: 30,
            batch_size: 64,
            seed: 0,
            l2: 0.0,
            optimizer: Optimizer::Adam,
            class_weights: ClassWeights::Uniform,
        }
    }

    pub fn validate(&self) -> Result<(), ClassifierError> {
        let bad = |m: &str| Err(ClassifierError::InvalidConfig(m.to_string()));
        if self.num_classes < 2 {
            return bad("num_classes must be at least 2");
        }
        if self.input_dim == 0 {
            return bad("input_dim must be positive");
        }
        if self.hidden_dims.contains(&0) {
            return bad("hidden dims must be positive");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be positive");
        }
        if !(self.learning_rate.is_finite() && self.learning_rate >= 0.0) {
            return bad("learning_rate must be finite and non-negative");
        }
        if !(self.l2.is_finite() && self.l2 >= 0.0) {
            return bad("l2 must be finite and non-negative");
        }
        Ok(())
    }

    /// Layer widths from input to output.
    pub fn widths(&self) -> Vec<usize> {
        let mut w = vec![self.input_dim];
        w.extend(&self.hidden_dims);
        w.push(self.num_classes);
        w
    }
}

/// Fully connected layer; `weights` is `rows x cols` row-major, mapping a
/// `cols`-dim input to a `rows`-dim output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    pub rows: usize,
    pub cols: usize,
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

impl Dense {
    fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            weights: vec![0.0; rows * cols],
            biases: vec![0.0; rows],
        }
    }

    fn forward(&self, input: &[f64]) -> Vec<f64> {
        self.weights
            .chunks_exact(self.cols)
            .zip(&self.biases)
            .map(|(row, b)| row.iter().zip(input).map(|(w, x)| w * x).sum::<f64>() + b)
            .collect()
    }

    fn params(&self) -> impl Iterator<Item = &f64> {
        self.weights.iter().chain(&self.biases)
    }

    fn params_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.weights.iter_mut().chain(self.biases.iter_mut())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Model {
    pub config: MlpConfig,
    pub layers: Vec<Dense>,
    /// Optional display names of the classes, indexed by class id.
    pub class_names: Vec<String>,
}

/// Gradients with the same layout as `Model::layers`.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<Dense>,
}

impl Gradients {
    pub fn flat(&self) -> Vec<f64> {
        self.layers.iter().flat_map(|l| l.params().copied()).collect()
    }
}

fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// Index of the largest value; ties go to the lowest index.
fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}

impl Model {
    /// All-zero parameters.
    pub fn zeros(config: MlpConfig) -> Result<Self, ClassifierError> {
        config.validate()?;
        let layers = config.widths().windows(2).map(|w| Dense::zeros(w[1], w[0])).collect();
        Ok(Self {
            config,
            layers,
            class_names: Vec::new(),
        })
    }

    /// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) for weights and biases.
    pub fn init<R: Rng>(config: MlpConfig, rng: &mut R) -> Result<Self, ClassifierError> {
        let mut model = Self::zeros(config)?;
        for layer in &mut model.layers {
            let bound = 1.0 / (layer.cols as f64).sqrt();
            layer.params_mut().for_each(|p| *p = rng.gen_range(-bound..=bound));
        }
        Ok(model)
    }

    pub fn num_classes(&self) -> usize {
        self.config.num_classes
    }

    fn check_input(&self, x: &[f64]) -> Result<(), ClassifierError> {
        if x.len() != self.config.input_dim {
            return Err(ClassifierError::ShapeMismatch(format!(
                "feature dim {} but model expects {}",
                x.len(),
                self.config.input_dim
            )));
        }
        Ok(())
    }

    /// Activations of every layer: index 0 is the input, the last entry the
    /// raw logits. Hidden entries are post-ReLU.
    fn forward_all(&self, x: &[f64]) -> Vec<Vec<f64>> {
        let mut acts = vec![x.to_vec()];
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            let mut z = layer.forward(acts.last().expect("input present"));
            if i < last {
                z.iter_mut().for_each(|v| *v = v.max(0.0));
            }
            acts.push(z);
        }
        acts
    }

    pub fn probabilities(&self, x: &[f64]) -> Result<Vec<f64>, ClassifierError> {
        self.check_input(x)?;
        Ok(softmax(self.forward_all(x).last().expect("logits present")))
    }

    /// Most probable class (lowest index on ties) and the full distribution.
    pub fn predict(&self, x: &[f64]) -> Result<(usize, Vec<f64>), ClassifierError> {
        let probs = self.probabilities(x)?;
        Ok((argmax(&probs), probs))
    }

    /// Mean (optionally class-weighted) cross-entropy over the batch plus
    /// `l2 / 2 * |W|^2`, and its gradient.
    pub fn loss_and_gradients<X: AsRef<[f64]>>(
        &self,
        features: &[X],
        labels: &[usize],
        sample_weights: Option<&[f64]>,
    ) -> Result<(f64, Gradients), ClassifierError> {
        check_batch(&self.config, features, labels)?;
        let n = features.len() as f64;
        let mut grads: Vec<Dense> = self.layers.iter().map(|l| Dense::zeros(l.rows, l.cols)).collect();
        let mut loss = 0.0;
        for (i, (x, &y)) in features.iter().zip(labels).enumerate() {
            let weight = sample_weights.map_or(1.0, |w| w[i]);
            let acts = self.forward_all(x.as_ref());
            let probs = softmax(acts.last().expect("logits present"));
            loss += -weight * probs[y].max(f64::MIN_POSITIVE).ln();

            // d loss / d logits
            let mut delta: Vec<f64> = probs;
            delta[y] -= 1.0;
            delta.iter_mut().for_each(|d| *d *= weight / n);

            for li in (0..self.layers.len()).rev() {
                let input = &acts[li];
                let g = &mut grads[li];
                for (r, d) in delta.iter().enumerate() {
                    g.biases[r] += d;
                    for (gw, x) in g.weights[r * g.cols..(r + 1) * g.cols].iter_mut().zip(input) {
                        *gw += d * x;
                    }
                }
                if li == 0 {
                    break;
                }
                let layer = &self.layers[li];
                let mut prev = vec![0.0; layer.cols];
                for (r, d) in delta.iter().enumerate() {
                    for (p, w) in prev
                        .iter_mut()
                        .zip(&layer.weights[r * layer.cols..(r + 1) * layer.cols])
                    {
                        *p += d * w;
                    }
                }
                // ReLU derivative, taken as 0 at the kink.
                for (p, a) in prev.iter_mut().zip(input) {
                    if *a <= 0.0 {
                        *p = 0.0;
                    }
                }
                delta = prev;
            }
        }
        loss /= n;
        if self.config.l2 > 0.0 {
            let l2 = self.config.l2;
            for (layer, g) in self.layers.iter().zip(&mut grads) {
                loss += 0.5 * l2 * layer.weights.iter().map(|w| w * w).sum::<f64>();
                for (gw, w) in g.weights.iter_mut().zip(&layer.weights) {
                    *gw += l2 * w;
                }
            }
        }
        Ok((loss, Gradients { layers: grads }))
    }

    /// Flattened parameters in layer order (weights then biases).
    pub fn flat_params(&self) -> Vec<f64> {
        self.layers.iter().flat_map(|l| l.params().copied()).collect()
    }

    fn set_flat_param(&mut self, index: usize, value: f64) {
        *self
            .layers
            .iter_mut()
            .flat_map(|l| l.params_mut())
            .nth(index)
            .expect("parameter index in range") = value;
    }

    pub fn all_finite(&self) -> bool {
        self.layers.iter().all(|l| l.params().all(|p| p.is_finite()))
    }
}

fn check_batch<X: AsRef<[f64]>>(cfg: &MlpConfig, features: &[X], labels: &[usize]) -> Result<(), ClassifierError> {
    if features.len() != labels.len() {
        return Err(ClassifierError::ShapeMismatch(format!(
            "{} feature rows but {} labels",
            features.len(),
            labels.len()
        )));
    }
    if features.is_empty() {
        return Err(ClassifierError::ShapeMismatch("no training examples".into()));
    }
    if let Some(x) = features.iter().find(|x| x.as_ref().len() != cfg.input_dim) {
        return Err(ClassifierError::ShapeMismatch(format!(
            "feature dim {} but config expects {}",
            x.as_ref().len(),
            cfg.input_dim
        )));
    }
    if let Some(&y) = labels.iter().find(|&&y| y >= cfg.num_classes) {
        return Err(ClassifierError::ShapeMismatch(format!(
            "label {y} out of range for {} classes",
            cfg.num_classes
        )));
    }
    Ok(())
}

struct AdamState {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

fn apply_update(model: &mut Model, grads: &Gradients, adam: &mut Option<AdamState>) {
    let lr = model.config.learning_rate;
    let flat = grads.flat();
    match adam {
        None => {
            for (p, g) in model.layers.iter_mut().flat_map(|l| l.params_mut()).zip(&flat) {
                *p -= lr * g;
            }
        }
        Some(state) => {
            state.t += 1;
            let c1 = 1.0 - ADAM_BETA1.powi(state.t);
            let c2 = 1.0 - ADAM_BETA2.powi(state.t);
            let params = model.layers.iter_mut().flat_map(|l| l.params_mut());
            for (((p, g), m), v) in params.zip(&flat).zip(&mut state.m).zip(&mut state.v) {
                *m = ADAM_BETA1 * *m + (1.0 - ADAM_BETA1) * g;
                *v = ADAM_BETA2 * *v + (1.0 - ADAM_BETA2) * g * g;
                *p -= lr * (*m / c1) / ((*v / c2).sqrt() + ADAM_EPS);
            }
        }
    }
}

fn balanced_weights(labels: &[usize], num_classes: usize) -> Vec<f64> {
    let mut counts = vec![0usize; num_classes];
    labels.iter().for_each(|&y| counts[y] += 1);
    let n = labels.len() as f64;
    labels
        .iter()
        .map(|&y| n / (num_classes as f64 * counts[y] as f64))
        .collect()
}

/// Training result with the mean loss of every epoch.
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: Model,
    pub epoch_losses: Vec<f64>,
}

pub fn train<X: AsRef<[f64]>>(features: &[X], labels: &[usize], cfg: &MlpConfig) -> Result<Model, ClassifierError> {
    train_with_history(features, labels, cfg).map(|o| o.model)
}

pub fn train_with_history<X: AsRef<[f64]>>(
    features: &[X],
    labels: &[usize],
    cfg: &MlpConfig,
) -> Result<TrainOutcome, ClassifierError> {
    cfg.validate()?;
    check_batch(cfg, features, labels)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut model = Model::init(cfg.clone(), &mut rng)?;
    let n_params = model.flat_params().len();
    let mut adam = (cfg.optimizer == Optimizer::Adam).then(|| AdamState {
        m: vec![0.0; n_params],
        v: vec![0.0; n_params],
        t: 0,
    });
    let weights = match cfg.class_weights {
        ClassWeights::Uniform => None,
        ClassWeights::Balanced => Some(balanced_weights(labels, cfg.num_classes)),
    };

    let mut order: Vec<usize> = (0..features.len()).collect();
    let mut epoch_losses = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for (batch, chunk) in order.chunks(cfg.batch_size).enumerate() {
            let xs: Vec<&[f64]> = chunk.iter().map(|&i| features[i].as_ref()).collect();
            let ys: Vec<usize> = chunk.iter().map(|&i| labels[i]).collect();
            let ws: Option<Vec<f64>> = weights.as_ref().map(|w| chunk.iter().map(|&i| w[i]).collect());
            let (loss, grads) = model.loss_and_gradients(&xs, &ys, ws.as_deref())?;
            if !loss.is_finite() {
                return Err(ClassifierError::NonFiniteLoss { epoch, batch });
            }
            total += loss * chunk.len() as f64;
            apply_update(&mut model, &grads, &mut adam);
        }
        epoch_losses.push(total / features.len() as f64);
    }
    if !model.all_finite() {
        return Err(ClassifierError::NonFiniteLoss {
            epoch: cfg.epochs.saturating_sub(1),
            batch: 0,
        });
    }
    Ok(TrainOutcome { model, epoch_losses })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradientReport {
    pub max_relative_error: f64,
    pub max_absolute_error: f64,
    pub parameters_checked: usize,
    pub tolerance: f64,
    pub passed: bool,
}

/// Finite-difference step used by `gradient_check`.
pub const FD_STEP: f64 = 1e-5;

/// Compares analytic gradients with central differences on a random model
/// and a random batch drawn from `seed`.
pub fn gradient_check(cfg: &MlpConfig, tolerance: f64, seed: u64) -> Result<GradientReport, ClassifierError> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let model = Model::init(cfg.clone(), &mut rng)?;
    let batch = rng.gen_range(1..=6);
    let xs: Vec<Vec<f64>> = (0..batch)
        .map(|_| (0..cfg.input_dim).map(|_| rng.gen_range(-1.0..1.0)).collect())
        .collect();
    let ys: Vec<usize> = (0..batch).map(|_| rng.gen_range(0..cfg.num_classes)).collect();

    let (_, grads) = model.loss_and_gradients(&xs, &ys, None)?;
    let analytic = grads.flat();
    let base = model.flat_params();
    let mut probe = model.clone();
    let mut max_rel: f64 = 0.0;
    let mut max_abs: f64 = 0.0;
    for (i, (&p, &a)) in base.iter().zip(&analytic).enumerate() {
        probe.set_flat_param(i, p + FD_STEP);
        let (plus, _) = probe.loss_and_gradients(&xs, &ys, None)?;
        probe.set_flat_param(i, p - FD_STEP);
        let (minus, _) = probe.loss_and_gradients(&xs, &ys, None)?;
        probe.set_flat_param(i, p);
        let numeric = (plus - minus) / (2.0 * FD_STEP);
        let abs = (a - numeric).abs();
        let rel = abs / a.abs().max(numeric.abs()).max(1e-6);
        max_abs = max_abs.max(abs);
        max_rel = max_rel.max(rel);
    }
    Ok(GradientReport {
        max_relative_error: max_rel,
        max_absolute_error: max_abs,
        parameters_checked: base.len(),
        tolerance,
        passed: max_rel < tolerance,
    })
}
