//! Fully connected ReLU policies trained by behavior cloning.

use rand::seq::SliceRandom;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::linalg::{mat_from_rows, rows_of, Mat, Vector};
use crate::rng::{derive_seed, seeded};

use super::dataset::CloningDataset;

const STD_FLOOR: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq)]
pub struct DenseLayer {
    /// `out x in`.
    pub weights: Mat,
    pub bias: Vector,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MlpMeta {
    pub epochs: usize,
    pub final_loss: f64,
    pub seed: u64,
}

/// `y = W_L relu(... relu(W_1 s(x) + b_1) ...) + b_L` with input
/// standardization `s(x) = (x - mean) / std`.
#[derive(Clone, Debug, PartialEq)]
pub struct MlpPolicy {
    layers: Vec<DenseLayer>,
    input_mean: Vector,
    input_std: Vector,
    pub meta: MlpMeta,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MlpTrainConfig {
    pub hidden_layers: usize,
    pub width: usize,
    pub epochs: usize,
    pub batch: usize,
    pub learning_rate: f64,
    pub momentum: f64,
    pub seed: u64,
}

impl Default for MlpTrainConfig {
    fn default() -> Self {
        Self { hidden_layers: 6, width: 150, epochs: 20, batch: 64, learning_rate: 0.001, momentum: 0.9, seed: 0 }
    }
}

/// Per-layer `(dL/dW, dL/db)`.
pub type MlpGradient = Vec<(Mat, Vector)>;

impl MlpPolicy {
    pub fn new(layers: Vec<DenseLayer>, input_mean: Vector, input_std: Vector) -> Result<Self> {
        let Some(first) = layers.first() else {
            return invalid("an MLP needs at least one layer");
        };
        let input = first.weights.ncols();
        if input_mean.len() != input || input_std.len() != input {
            return invalid("standardization vectors do not match the input layer");
        }
        if input_std.iter().any(|s| !(*s > 0.0)) {
            return invalid("standardization scales must be positive");
        }
        for (i, l) in layers.iter().enumerate() {
            if l.bias.len() != l.weights.nrows() {
                return invalid(format!("layer {i} bias length differs from its output size"));
            }
            if i > 0 && l.weights.ncols() != layers[i - 1].weights.nrows() {
                return invalid(format!("layer {i} input size does not chain with layer {}", i - 1));
            }
            if l.weights.iter().chain(l.bias.iter()).any(|v| !v.is_finite()) {
                return invalid(format!("layer {i} has non-finite parameters"));
            }
        }
        Ok(Self { layers, input_mean, input_std, meta: MlpMeta::default() })
    }

    /// Fan-in scaled Gaussian weights (variance 2 / fan_in), zero biases.
    pub fn init(input: usize, hidden_layers: usize, width: usize, output: usize, seed: u64) -> Result<Self> {
        if input == 0 || output == 0 || (hidden_layers > 0 && width == 0) {
            return invalid("MLP layer sizes must be positive");
        }
        let mut sizes = vec![input];
        sizes.extend(std::iter::repeat_n(width, hidden_layers));
        sizes.push(output);
        let mut rng = seeded(derive_seed(seed, "mlp-init", 0));
        let layers = sizes
            .windows(2)
            .map(|w| {
                let scale = (2.0 / w[0] as f64).sqrt();
                let weights = Mat::from_fn(w[1], w[0], |_, _| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    scale * z
                });
                DenseLayer { weights, bias: Vector::zeros(w[1]) }
            })
            .collect();
        Self::new(layers, Vector::zeros(input), Vector::from_element(input, 1.0))
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].weights.ncols()
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().map(|l| l.weights.nrows()).unwrap_or(0)
    }

    pub fn layers(&self) -> &[DenseLayer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [DenseLayer] {
        &mut self.layers
    }

    pub fn input_mean(&self) -> &Vector {
        &self.input_mean
    }

    pub fn input_std(&self) -> &Vector {
        &self.input_std
    }

    fn standardize(&self, obs: &Mat) -> Mat {
        let mut s = obs.clone();
        for mut col in s.column_iter_mut() {
            for i in 0..col.len() {
                col[i] = (col[i] - self.input_mean[i]) / self.input_std[i];
            }
        }
        s
    }

    /// Pre-activations of every layer for standardized inputs (one column per sample).
    fn forward(&self, input: &Mat) -> Vec<Mat> {
        let mut pre = Vec::with_capacity(self.layers.len());
        let mut h = input.clone();
        for (i, l) in self.layers.iter().enumerate() {
            let mut z = &l.weights * &h;
            for mut col in z.column_iter_mut() {
                col += &l.bias;
            }
            if i + 1 < self.layers.len() {
                h = z.map(|v| v.max(0.0));
            }
            pre.push(z);
        }
        pre
    }

    /// Actions for a batch of observations, one column each.
    pub fn act_batch(&self, obs: &Mat) -> Result<Mat> {
        if obs.nrows() != self.input_dim() {
            return invalid(format!("observation has dimension {}, network expects {}", obs.nrows(), self.input_dim()));
        }
        Ok(self.forward(&self.standardize(obs)).pop().expect("at least one layer"))
    }

    /// Mean over samples and action components of the squared error, with
    /// its gradient with respect to every weight and bias.
    pub fn loss_and_gradient(&self, obs: &Mat, actions: &Mat) -> Result<(f64, MlpGradient)> {
        if obs.ncols() != actions.ncols() || actions.nrows() != self.output_dim() || obs.ncols() == 0 {
            return invalid("observation and action batches do not match the network");
        }
        let input = self.standardize(obs);
        Ok(self.backprop(&input, actions))
    }

    fn backprop(&self, input: &Mat, targets: &Mat) -> (f64, MlpGradient) {
        let pre = self.forward(input);
        let out = pre.last().expect("at least one layer");
        let err = out - targets;
        let scale = 1.0 / (targets.len() as f64);
        let loss = err.norm_squared() * scale;
        let mut delta = err * (2.0 * scale);
        let mut grads = Vec::with_capacity(self.layers.len());
        for i in (0..self.layers.len()).rev() {
            let h = if i == 0 { input.clone() } else { pre[i - 1].map(|v| v.max(0.0)) };
            let gw = &delta * h.transpose();
            let gb = delta.column_sum();
            if i > 0 {
                let mut back = self.layers[i].weights.transpose() * &delta;
                back.zip_apply(&pre[i - 1], |d, z| {
                    if z <= 0.0 {
                        *d = 0.0
                    }
                });
                delta = back;
            }
            grads.push((gw, gb));
        }
        grads.reverse();
        (loss, grads)
    }

    pub fn to_file(&self) -> MlpFile {
        MlpFile {
            layer_sizes: std::iter::once(self.input_dim()).chain(self.layers.iter().map(|l| l.weights.nrows())).collect(),
            layers: self
                .layers
                .iter()
                .map(|l| LayerFile { weights: rows_of(&l.weights), bias: l.bias.iter().copied().collect() })
                .collect(),
            input_mean: self.input_mean.iter().copied().collect(),
            input_std: self.input_std.iter().copied().collect(),
            meta: self.meta.clone(),
        }
    }

    pub fn from_file(file: &MlpFile) -> Result<Self> {
        if file.layer_sizes.len() != file.layers.len() + 1 {
            return Err(Error::Format("layer_sizes must list the input and every layer output".into()));
        }
        let mut layers = Vec::with_capacity(file.layers.len());
        for (i, l) in file.layers.iter().enumerate() {
            let (inp, out) = (file.layer_sizes[i], file.layer_sizes[i + 1]);
            let weights = mat_from_rows(&l.weights, inp)
                .filter(|m| m.nrows() == out)
                .ok_or_else(|| Error::Format(format!("layer {i} weights have the wrong shape")))?;
            layers.push(DenseLayer { weights, bias: Vector::from_vec(l.bias.clone()) });
        }
        let mut p = Self::new(layers, Vector::from_vec(file.input_mean.clone()), Vector::from_vec(file.input_std.clone()))
            .map_err(|e| Error::Format(e.to_string()))?;
        p.meta = file.meta.clone();
        Ok(p)
    }
}

pub fn mlp_act(policy: &MlpPolicy, obs: &Vector) -> Result<Vector> {
    let a = policy.act_batch(&Mat::from_column_slice(obs.len(), 1, obs.as_slice()))?;
    Ok(a.column(0).into_owned())
}

/// Trained policy, the full-dataset loss before training, then the mean minibatch loss of each epoch.
#[derive(Clone, Debug)]
pub struct MlpTraining {
    pub policy: MlpPolicy,
    pub losses: Vec<f64>,
}

/// Mini-batch SGD with momentum on the mean squared action error.
pub fn train_mlp(data: &CloningDataset, config: &MlpTrainConfig) -> Result<MlpTraining> {
    if data.is_empty() {
        return invalid("cloning dataset is empty");
    }
    if config.batch == 0 || !(config.learning_rate > 0.0) || !(0.0..1.0).contains(&config.momentum) {
        return invalid("MLP training needs batch > 0, learning_rate > 0 and momentum in [0, 1)");
    }
    let n = data.len();
    let obs = Mat::from_columns(&data.observations);
    let targets = Mat::from_columns(&data.actions);

    let mean = obs.column_mean();
    let std = obs.column_variance().map(|v| if v.sqrt() > STD_FLOOR { v.sqrt() } else { 1.0 });
    let mut policy = MlpPolicy::init(obs.nrows(), config.hidden_layers, config.width, targets.nrows(), config.seed)?;
    policy.input_mean = mean;
    policy.input_std = std;
    let input = policy.standardize(&obs);

    let full_loss = |p: &MlpPolicy| {
        let out = p.forward(&input).pop().expect("at least one layer");
        (out - &targets).norm_squared() / targets.len() as f64
    };
    let mut losses = vec![full_loss(&policy)];
    let mut velocity: Vec<(Mat, Vector)> =
        policy.layers.iter().map(|l| (Mat::zeros(l.weights.nrows(), l.weights.ncols()), Vector::zeros(l.bias.len()))).collect();
    let mut order: Vec<usize> = (0..n).collect();
    for epoch in 1..=config.epochs {
        order.shuffle(&mut seeded(derive_seed(config.seed, "mlp-shuffle", epoch as u64)));
        let mut loss = 0.0;
        for chunk in order.chunks(config.batch) {
            let xb = input.select_columns(chunk);
            let yb = targets.select_columns(chunk);
            let (batch_loss, grads) = policy.backprop(&xb, &yb);
            loss += batch_loss * chunk.len() as f64 / n as f64;
            for ((layer, vel), (gw, gb)) in policy.layers.iter_mut().zip(velocity.iter_mut()).zip(grads) {
                vel.0 *= config.momentum;
                vel.0 -= gw * config.learning_rate;
                vel.1 *= config.momentum;
                vel.1 -= gb * config.learning_rate;
                layer.weights += &vel.0;
                layer.bias += &vel.1;
            }
        }
        if !loss.is_finite() {
            return Err(Error::MlpDiverged { epoch, loss });
        }
        losses.push(loss);
    }
    policy.meta = MlpMeta { epochs: config.epochs, final_loss: *losses.last().expect("initial loss"), seed: config.seed };
    Ok(MlpTraining { policy, losses })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MlpFile {
    pub layer_sizes: Vec<usize>,
    pub layers: Vec<LayerFile>,
    pub input_mean: Vec<f64>,
    pub input_std: Vec<f64>,
    pub meta: MlpMeta,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayerFile {
    pub weights: Vec<Vec<f64>>,
    pub bias: Vec<f64>,
}
