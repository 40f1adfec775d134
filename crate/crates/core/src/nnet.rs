//! Feed-forward network with dropout, trained by mini-batch Adam on mean binary
//! cross-entropy.
//!
//! Weights are stored `fan_out x fan_in`; a batch is `rows x features`, so a
//! layer computes `Z = A W^T + b`. Dropout is inverted: surviving hidden units
//! are scaled by `1 / (1 - rate)` at training time and inference is untouched.

use ndarray::{Array1, Array2, ArrayView2, Axis, Zip};
use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::dataset::LabeledDataset;
use crate::error::{Error, Result};
use crate::models::Classifier;
use crate::rng;

/// Probabilities are clipped to `[PROB_CLIP, 1 - PROB_CLIP]` inside the loss.
pub const PROB_CLIP: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Tanh,
    Relu,
    Sigmoid,
}

impl Activation {
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Tanh => z.tanh(),
            Activation::Relu => z.max(0.0),
            Activation::Sigmoid => sigmoid(z),
        }
    }

    /// Derivative expressed through the pre-activation.
    fn derivative(self, z: f64) -> f64 {
        match self {
            Activation::Tanh => {
                let t = z.tanh();
                1.0 - t * t
            }
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Sigmoid => {
                let s = sigmoid(z);
                s * (1.0 - s)
            }
        }
    }
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub width: usize,
    pub activation: Activation,
    #[serde(default)]
    pub dropout_rate: f64,
}

impl LayerSpec {
    pub fn hidden(width: usize, activation: Activation, dropout_rate: f64) -> Self {
        Self {
            width,
            activation,
            dropout_rate,
        }
    }

    /// The single sigmoid unit every network ends with.
    pub fn output() -> Self {
        Self {
            width: 1,
            activation: Activation::Sigmoid,
            dropout_rate: 0.0,
        }
    }
}

fn validate_layers(layers: &[LayerSpec]) -> Result<()> {
    let Some(last) = layers.last() else {
        return Err(Error::invalid("network needs at least one layer"));
    };
    if *last != LayerSpec::output() {
        return Err(Error::invalid(
            "output layer must be a single sigmoid unit without dropout",
        ));
    }
    for (i, l) in layers.iter().enumerate() {
        if l.width == 0 {
            return Err(Error::invalid(format!("layer {i} has zero width")));
        }
        if !(0.0..1.0).contains(&l.dropout_rate) {
            return Err(Error::invalid(format!(
                "layer {i} dropout {} not in [0, 1)",
                l.dropout_rate
            )));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub spec: LayerSpec,
    /// `fan_out x fan_in`
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "NetworkDoc", try_from = "NetworkDoc")]
pub struct NetworkParams {
    pub input_dim: usize,
    pub layers: Vec<Layer>,
}

/// Glorot-uniform weights, zero biases.
pub fn init(input_dim: usize, layers: &[LayerSpec], seed: u64) -> Result<NetworkParams> {
    if input_dim == 0 {
        return Err(Error::invalid("input_dim must be >= 1"));
    }
    validate_layers(layers)?;
    let mut r = rng::rng(seed);
    let mut fan_in = input_dim;
    let layers = layers
        .iter()
        .map(|spec| {
            let fan_out = spec.width;
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            let weights = Array2::from_shape_simple_fn((fan_out, fan_in), || r.random_range(-limit..=limit));
            fan_in = fan_out;
            Layer {
                spec: *spec,
                weights,
                bias: Array1::zeros(fan_out),
            }
        })
        .collect();
    Ok(NetworkParams { input_dim, layers })
}

impl NetworkParams {
    pub fn specs(&self) -> Vec<LayerSpec> {
        self.layers.iter().map(|l| l.spec).collect()
    }

    pub fn n_params(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    /// Parameters in layer order, weights (row-major) before biases.
    pub fn flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n_params());
        for l in &self.layers {
            out.extend(l.weights.iter());
            out.extend(l.bias.iter());
        }
        out
    }

    pub fn set_flat(&mut self, values: &[f64]) {
        let mut it = values.iter();
        for l in &mut self.layers {
            l.weights.iter_mut().chain(l.bias.iter_mut()).for_each(|p| *p = *it.next().expect("length"));
        }
    }

    fn check_shapes(&self) -> Result<()> {
        let mut fan_in = self.input_dim;
        for (i, l) in self.layers.iter().enumerate() {
            if l.weights.dim() != (l.spec.width, fan_in) || l.bias.len() != l.spec.width {
                return Err(Error::invalid(format!("layer {i}: parameter shapes do not chain")));
            }
            fan_in = l.spec.width;
        }
        validate_layers(&self.specs())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Infer,
}

/// Everything backpropagation needs from a forward pass.
#[derive(Debug, Clone)]
pub struct ForwardPass {
    pub input: Array2<f64>,
    /// Pre-activations per layer.
    pub pre: Vec<Array2<f64>>,
    /// Post-activation (and post-dropout) outputs per layer.
    pub post: Vec<Array2<f64>>,
    /// Dropout scale per unit (`0` or `1/(1-rate)`), for layers where it applied.
    pub masks: Vec<Option<Array2<f64>>>,
}

impl ForwardPass {
    pub fn probabilities(&self) -> Vec<f64> {
        self.post.last().expect("non-empty network").column(0).to_vec()
    }
}

pub fn forward(params: &NetworkParams, batch: ArrayView2<f64>, mode: Mode, mask_seed: u64) -> Result<ForwardPass> {
    if batch.ncols() != params.input_dim {
        return Err(Error::invalid(format!(
            "batch has {} columns, network expects {}",
            batch.ncols(),
            params.input_dim
        )));
    }
    let mut pre = Vec::with_capacity(params.layers.len());
    let mut post: Vec<Array2<f64>> = Vec::with_capacity(params.layers.len());
    let mut masks = Vec::with_capacity(params.layers.len());
    for (li, layer) in params.layers.iter().enumerate() {
        let prev = post.last().map_or(batch, |a| a.view());
        let z = prev.dot(&layer.weights.t()) + &layer.bias;
        let mut a = z.mapv(|v| layer.spec.activation.apply(v));
        let rate = layer.spec.dropout_rate;
        let mask = if mode == Mode::Train && rate > 0.0 {
            let mut r = rng::sub_rng(mask_seed, li as u64);
            let keep = 1.0 / (1.0 - rate);
            let m = Array2::from_shape_simple_fn(a.dim(), || if r.random::<f64>() < rate { 0.0 } else { keep });
            a *= &m;
            Some(m)
        } else {
            None
        };
        pre.push(z);
        post.push(a);
        masks.push(mask);
    }
    Ok(ForwardPass {
        input: batch.to_owned(),
        pre,
        post,
        masks,
    })
}

/// Mean binary cross-entropy with probabilities clipped away from 0 and 1.
pub fn bce_loss(probas: &[f64], labels: &[f64]) -> f64 {
    let n = probas.len() as f64;
    probas
        .iter()
        .zip(labels)
        .map(|(&p, &y)| {
            let p = p.clamp(PROB_CLIP, 1.0 - PROB_CLIP);
            -(y * p.ln() + (1.0 - y) * (1.0 - p).ln())
        })
        .sum::<f64>()
        / n
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerGradient {
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<LayerGradient>,
}

impl Gradients {
    pub fn flat(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for l in &self.layers {
            out.extend(l.weights.iter());
            out.extend(l.bias.iter());
        }
        out
    }
}

/// Gradients of the mean BCE with respect to every weight and bias, using the
/// dropout masks recorded in `pass`.
pub fn backward(params: &NetworkParams, labels: &[f64], pass: &ForwardPass) -> Result<Gradients> {
    let n = pass.input.nrows();
    if labels.len() != n {
        return Err(Error::invalid(format!("{} labels for a batch of {n}", labels.len())));
    }
    let last = params.layers.len() - 1;
    // sigmoid output with BCE: dL/dz = (p - y) / n
    let mut delta = pass.post[last].clone();
    Zip::from(delta.column_mut(0))
        .and(labels)
        .for_each(|d, &y| *d = (*d - y) / n as f64);

    let mut grads = Vec::with_capacity(params.layers.len());
    for li in (0..=last).rev() {
        let input = if li == 0 { pass.input.view() } else { pass.post[li - 1].view() };
        grads.push(LayerGradient {
            weights: delta.t().dot(&input),
            bias: delta.sum_axis(Axis(0)),
        });
        if li > 0 {
            let mut d_prev = delta.dot(&params.layers[li].weights);
            if let Some(mask) = &pass.masks[li - 1] {
                d_prev *= mask;
            }
            let act = params.layers[li - 1].spec.activation;
            Zip::from(&mut d_prev)
                .and(&pass.pre[li - 1])
                .for_each(|d, &z| *d *= act.derivative(z));
            delta = d_prev;
        }
    }
    grads.reverse();
    Ok(Gradients { layers: grads })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl AdamConfig {
    pub fn new(learning_rate: f64) -> Self {
        Self {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// First and second moment accumulators over a flat parameter vector.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    /// Completed updates.
    pub t: u64,
}

impl AdamState {
    pub fn new(n_params: usize) -> Self {
        Self {
            m: vec![0.0; n_params],
            v: vec![0.0; n_params],
            t: 0,
        }
    }

    /// One bias-corrected Adam step on `params`.
    pub fn step<'a>(&mut self, params: impl Iterator<Item = &'a mut f64>, grads: &[f64], cfg: &AdamConfig) {
        self.t += 1;
        let c1 = 1.0 - cfg.beta1.powi(self.t as i32);
        let c2 = 1.0 - cfg.beta2.powi(self.t as i32);
        for (((theta, &g), m), v) in params.zip(grads).zip(&mut self.m).zip(&mut self.v) {
            *m = cfg.beta1 * *m + (1.0 - cfg.beta1) * g;
            *v = cfg.beta2 * *v + (1.0 - cfg.beta2) * g * g;
            let m_hat = *m / c1;
            let v_hat = *v / c2;
            *theta -= cfg.learning_rate * m_hat / (v_hat.sqrt() + cfg.epsilon);
        }
    }
}

pub fn adam_update(params: &mut NetworkParams, grads: &Gradients, state: &mut AdamState, cfg: &AdamConfig) {
    let flat = grads.flat();
    let it = params
        .layers
        .iter_mut()
        .flat_map(|l| l.weights.iter_mut().chain(l.bias.iter_mut()));
    state.step(it, &flat, cfg);
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    #[serde(default = "default_beta1")]
    pub adam_beta1: f64,
    #[serde(default = "default_beta2")]
    pub adam_beta2: f64,
    #[serde(default = "default_epsilon")]
    pub adam_epsilon: f64,
    pub seed: u64,
}

fn default_beta1() -> f64 {
    0.9
}

fn default_beta2() -> f64 {
    0.999
}

fn default_epsilon() -> f64 {
    1e-8
}

impl TrainConfig {
    pub fn new(learning_rate: f64, epochs: usize, batch_size: usize, seed: u64) -> Self {
        Self {
            learning_rate,
            epochs,
            batch_size,
            adam_beta1: default_beta1(),
            adam_beta2: default_beta2(),
            adam_epsilon: default_epsilon(),
            seed,
        }
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            learning_rate: self.learning_rate,
            beta1: self.adam_beta1,
            beta2: self.adam_beta2,
            epsilon: self.adam_epsilon,
        }
    }

    fn validate(&self) -> Result<()> {
        let betas_ok = |b: f64| b > 0.0 && b < 1.0;
        if !(self.learning_rate > 0.0) || self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::invalid("train config: lr, epochs and batch_size must be positive"));
        }
        if !betas_ok(self.adam_beta1) || !betas_ok(self.adam_beta2) {
            return Err(Error::invalid("train config: Adam betas must lie in (0, 1)"));
        }
        Ok(())
    }
}

/// A trained network; `predict_proba` is the inference-mode forward pass.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedNetwork {
    pub params: NetworkParams,
    pub config: TrainConfig,
    /// Mean training loss per epoch (over all mini-batches, weighted by size).
    pub loss_trace: Vec<f64>,
}

impl TrainedNetwork {
    pub fn write_loss_csv<W: std::io::Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["epoch", "loss"])?;
        for (e, l) in self.loss_trace.iter().enumerate() {
            w.write_record([e.to_string(), format!("{l}")])?;
        }
        w.flush()?;
        Ok(())
    }
}

impl Classifier for TrainedNetwork {
    fn predict_proba(&self, x: ArrayView2<f64>) -> Result<Vec<f64>> {
        Ok(forward(&self.params, x, Mode::Infer, 0)?.probabilities())
    }
}

/// Mini-batch Adam over `epochs` reshuffles of the data. The last, partial
/// batch of each epoch is trained on.
pub fn train(ds: &LabeledDataset, layers: &[LayerSpec], config: &TrainConfig) -> Result<TrainedNetwork> {
    config.validate()?;
    let n = ds.n_rows();
    if n == 0 {
        return Err(Error::invalid("train: empty dataset"));
    }
    let mut params = init(ds.n_features(), layers, rng::derive_seed(config.seed, u64::MAX))?;
    let mut state = AdamState::new(params.n_params());
    let adam = config.adam();
    let labels = ds.labels_f64();
    let mut order: Vec<usize> = (0..n).collect();
    let mut loss_trace = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        let epoch_seed = rng::derive_seed(config.seed, epoch as u64);
        order.shuffle(&mut rng::rng(epoch_seed));
        let mut total = 0.0;
        for (b, idx) in order.chunks(config.batch_size).enumerate() {
            let x = ds.features().select(Axis(0), idx);
            let y: Vec<f64> = idx.iter().map(|&i| labels[i]).collect();
            let pass = forward(&params, x.view(), Mode::Train, rng::derive_seed(epoch_seed, b as u64 + 1))?;
            let loss = bce_loss(&pass.probabilities(), &y);
            if !loss.is_finite() {
                return Err(Error::Diverged { epoch, batch: b });
            }
            total += loss * idx.len() as f64;
            let grads = backward(&params, &y, &pass)?;
            adam_update(&mut params, &grads, &mut state, &adam);
        }
        loss_trace.push(total / n as f64);
    }
    Ok(TrainedNetwork {
        params,
        config: *config,
        loss_trace,
    })
}

/// A named network architecture plus its training hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnPreset {
    pub name: String,
    pub hidden_widths: Vec<usize>,
    pub activations: Vec<Activation>,
    pub dropout: f64,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
}

/// Library default hidden widths for the four-layer presets.
pub const DEFAULT_HIDDEN_WIDTHS: [usize; 4] = [64, 32, 16, 8];

const PRESET_ACTIVATIONS: [Activation; 4] = [Activation::Tanh, Activation::Relu, Activation::Relu, Activation::Relu];

impl AnnPreset {
    /// tanh + 3 x relu, dropout 0.2, lr 0.000474718, 100 epochs, batch 512.
    pub fn deep_ann_1() -> Self {
        Self {
            name: "deep_ann_1".into(),
            hidden_widths: DEFAULT_HIDDEN_WIDTHS.to_vec(),
            activations: PRESET_ACTIVATIONS.to_vec(),
            dropout: 0.2,
            learning_rate: 0.000474718,
            epochs: 100,
            batch_size: 512,
        }
    }

    /// tanh + 3 x relu, dropout 0.4, lr 0.000012, 100 epochs, batch 512.
    pub fn deep_ann_2() -> Self {
        Self {
            name: "deep_ann_2".into(),
            dropout: 0.4,
            learning_rate: 0.000012,
            ..Self::deep_ann_1()
        }
    }

    pub fn layers(&self) -> Result<Vec<LayerSpec>> {
        if self.hidden_widths.len() != self.activations.len() {
            return Err(Error::invalid(format!(
                "preset {}: {} widths but {} activations",
                self.name,
                self.hidden_widths.len(),
                self.activations.len()
            )));
        }
        let mut layers: Vec<LayerSpec> = self
            .hidden_widths
            .iter()
            .zip(&self.activations)
            .map(|(&w, &a)| LayerSpec::hidden(w, a, self.dropout))
            .collect();
        layers.push(LayerSpec::output());
        Ok(layers)
    }

    pub fn train_config(&self, seed: u64) -> TrainConfig {
        TrainConfig::new(self.learning_rate, self.epochs, self.batch_size, seed)
    }

    pub fn train(&self, ds: &LabeledDataset, seed: u64) -> Result<TrainedNetwork> {
        train(ds, &self.layers()?, &self.train_config(seed))
    }
}

#[derive(Serialize, Deserialize)]
struct LayerDoc {
    #[serde(flatten)]
    spec: LayerSpec,
    fan_in: usize,
    /// Row-major `fan_out x fan_in`.
    weights: Vec<f64>,
    bias: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct NetworkDoc {
    input_dim: usize,
    layers: Vec<LayerDoc>,
}

impl From<NetworkParams> for NetworkDoc {
    fn from(p: NetworkParams) -> Self {
        NetworkDoc {
            input_dim: p.input_dim,
            layers: p
                .layers
                .into_iter()
                .map(|l| LayerDoc {
                    spec: l.spec,
                    fan_in: l.weights.ncols(),
                    weights: l.weights.iter().copied().collect(),
                    bias: l.bias.to_vec(),
                })
                .collect(),
        }
    }
}

impl TryFrom<NetworkDoc> for NetworkParams {
    type Error = Error;

    fn try_from(doc: NetworkDoc) -> Result<Self> {
        let layers = doc
            .layers
            .into_iter()
            .map(|l| {
                let weights = Array2::from_shape_vec((l.spec.width, l.fan_in), l.weights)
                    .map_err(|e| Error::invalid(format!("layer weights: {e}")))?;
                Ok(Layer {
                    spec: l.spec,
                    weights,
                    bias: Array1::from(l.bias),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let p = NetworkParams {
            input_dim: doc.input_dim,
            layers,
        };
        p.check_shapes()?;
        Ok(p)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn tiny() -> Vec<LayerSpec> {
        vec![LayerSpec::hidden(4, Activation::Tanh, 0.0), LayerSpec::output()]
    }

    #[test]
    fn init_is_seeded_and_bounded() {
        let a = init(3, &tiny(), 5).unwrap();
        assert_eq!(a, init(3, &tiny(), 5).unwrap());
        assert_ne!(a, init(3, &tiny(), 6).unwrap());
        assert!(a.layers.iter().all(|l| l.bias.iter().all(|&b| b == 0.0)));
        let limit = (6.0_f64 / 7.0).sqrt();
        assert!(a.layers[0].weights.iter().all(|w| w.abs() <= limit));
        assert_eq!(a.layers[0].weights.dim(), (4, 3));
        assert_eq!(a.layers[1].weights.dim(), (1, 4));
    }

    #[test]
    fn init_rejects_bad_layers() {
        assert!(init(2, &[], 0).is_err());
        assert!(init(2, &[LayerSpec::hidden(3, Activation::Relu, 0.0)], 0).is_err());
        assert!(init(0, &tiny(), 0).is_err());
    }

    #[test]
    fn zero_network_outputs_half() {
        let mut p = init(3, &tiny(), 1).unwrap();
        p.set_flat(&vec![0.0; p.n_params()]);
        let x = array![[1.0, -2.0, 3.0], [0.5, 0.5, 0.5]];
        let out = forward(&p, x.view(), Mode::Infer, 0).unwrap().probabilities();
        assert_eq!(out, vec![0.5, 0.5]);
    }

    #[test]
    fn single_layer_matches_hand_arithmetic() {
        let mut p = init(2, &[LayerSpec::output()], 0).unwrap();
        p.layers[0].weights = array![[0.5, -1.0]];
        p.layers[0].bias = array![0.25];
        let out = forward(&p, array![[2.0, 1.0]].view(), Mode::Infer, 0).unwrap().probabilities();
        // sigmoid(0.5*2 - 1*1 + 0.25) = sigmoid(0.25)
        assert!((out[0] - 1.0 / (1.0 + (-0.25f64).exp())).abs() < 1e-15);
    }

    #[test]
    fn dimension_mismatch() {
        let p = init(3, &tiny(), 1).unwrap();
        assert!(forward(&p, array![[1.0, 2.0]].view(), Mode::Infer, 0).is_err());
    }

    #[test]
    fn inverted_dropout_scaling() {
        let layers = vec![LayerSpec::hidden(50, Activation::Relu, 0.5), LayerSpec::output()];
        let p = init(2, &layers, 3).unwrap();
        let x = array![[1.0, 1.0]];
        let pass = forward(&p, x.view(), Mode::Train, 9).unwrap();
        let mask = pass.masks[0].as_ref().unwrap();
        assert!(mask.iter().all(|&m| m == 0.0 || m == 2.0));
        assert!(mask.iter().any(|&m| m == 0.0));
        let infer = forward(&p, x.view(), Mode::Infer, 9).unwrap();
        assert!(infer.masks.iter().all(Option::is_none));
    }

    #[test]
    fn bias_gradient_vanishes_when_labels_equal_probabilities() {
        let p = init(2, &tiny(), 4).unwrap();
        let x = array![[0.3, -0.2], [1.0, 0.4], [-0.7, 0.9]];
        let pass = forward(&p, x.view(), Mode::Infer, 0).unwrap();
        let y = pass.probabilities();
        let g = backward(&p, &y, &pass).unwrap();
        assert!(g.layers[1].bias[0].abs() < 1e-15);
    }

    #[test]
    fn duplicated_batch_keeps_gradients() {
        let p = init(2, &tiny(), 4).unwrap();
        let x = array![[0.3, -0.2], [1.0, 0.4]];
        let xx = ndarray::concatenate(Axis(0), &[x.view(), x.view()]).unwrap();
        let g1 = backward(&p, &[1.0, 0.0], &forward(&p, x.view(), Mode::Infer, 0).unwrap()).unwrap();
        let g2 = backward(&p, &[1.0, 0.0, 1.0, 0.0], &forward(&p, xx.view(), Mode::Infer, 0).unwrap()).unwrap();
        for (a, b) in g1.flat().iter().zip(g2.flat()) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn adam_zero_gradient_fixpoint() {
        let mut p = init(2, &tiny(), 2).unwrap();
        let before = p.clone();
        let zeros = Gradients {
            layers: p
                .layers
                .iter()
                .map(|l| LayerGradient {
                    weights: Array2::zeros(l.weights.dim()),
                    bias: Array1::zeros(l.bias.len()),
                })
                .collect(),
        };
        let mut s = AdamState::new(p.n_params());
        for _ in 0..50 {
            adam_update(&mut p, &zeros, &mut s, &AdamConfig::new(0.1));
        }
        assert_eq!(p, before);
        assert_eq!(s.t, 50);
    }

    #[test]
    fn params_json_round_trip() {
        let p = init(3, &tiny(), 8).unwrap();
        let json = serde_json::to_string(&p).unwrap();
        let back: NetworkParams = serde_json::from_str(&json).unwrap();
        assert_eq!(back, p);
        let broken = json.replace("\"fan_in\":3", "\"fan_in\":2");
        assert!(serde_json::from_str::<NetworkParams>(&broken).is_err());
    }

    #[test]
    fn presets_follow_architecture_table() {
        let a = AnnPreset::deep_ann_1();
        let b = AnnPreset::deep_ann_2();
        assert_eq!(a.learning_rate, 0.000474718);
        assert_eq!(b.learning_rate, 0.000012);
        assert_eq!((a.dropout, b.dropout), (0.2, 0.4));
        assert_eq!((a.epochs, a.batch_size), (100, 512));
        let layers = a.layers().unwrap();
        assert_eq!(layers.len(), 5);
        assert_eq!(layers[0].activation, Activation::Tanh);
        assert!(layers[1..4].iter().all(|l| l.activation == Activation::Relu));
        assert_eq!(layers[4], LayerSpec::output());
    }
}
