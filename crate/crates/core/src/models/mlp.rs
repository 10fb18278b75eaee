//! Fully connected network with a single sigmoid output, trained by plain
//! mini-batch gradient descent on binary cross-entropy.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{gemm, gemm_nt, gemm_tn, Matrix};
use crate::rng;
use crate::sampling::{class_weights, shuffled_batches, weighted_batch_sampler, ClassWeights};

use super::{check_labels, round_f32, sigmoid, softplus};

pub const LEAKY_SLOPE: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    #[serde(alias = "leaky relu")]
    LeakyRelu,
    Tanh,
}

impl Activation {
    pub const ALL: [Activation; 3] = [Activation::Relu, Activation::LeakyRelu, Activation::Tanh];

    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::LeakyRelu => {
                if z > 0.0 {
                    z
                } else {
                    LEAKY_SLOPE * z
                }
            }
            Activation::Tanh => z.tanh(),
        }
    }

    /// Derivative expressed through the pre-activation `z` and output `a`.
    fn derivative(self, z: f64, a: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::LeakyRelu => {
                if z > 0.0 {
                    1.0
                } else {
                    LEAKY_SLOPE
                }
            }
            Activation::Tanh => 1.0 - a * a,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplerKind {
    Plain,
    Weighted,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossWeighting {
    None,
    ClassWeights,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MlpConfig {
    pub hidden_sizes: Vec<usize>,
    pub activation: Activation,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    /// Drop probability on hidden activations; 0 disables dropout.
    pub dropout: f64,
    pub seed: u64,
    pub sampler: SamplerKind,
    pub loss_weighting: LossWeighting,
}

impl Default for MlpConfig {
    fn default() -> Self {
        MlpConfig {
            hidden_sizes: vec![128, 256, 64, 8],
            activation: Activation::Relu,
            learning_rate: 0.01,
            epochs: 10,
            batch_size: 256,
            dropout: 0.1,
            seed: 0,
            sampler: SamplerKind::Weighted,
            loss_weighting: LossWeighting::None,
        }
    }
}

impl MlpConfig {
    pub fn validate(&self) -> Result<()> {
        if self.hidden_sizes.is_empty() || self.hidden_sizes.contains(&0) {
            return Err(Error::config("hidden_sizes must be non-empty with every layer at least 1 wide"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::config("learning_rate must be positive"));
        }
        if self.epochs == 0 {
            return Err(Error::config("epochs must be at least 1"));
        }
        if self.batch_size == 0 {
            return Err(Error::config("batch_size must be at least 1"));
        }
        if self.sampler == SamplerKind::Weighted && self.batch_size < 2 {
            return Err(Error::config("the weighted sampler needs batch_size >= 2"));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::config("dropout must lie in [0, 1)"));
        }
        Ok(())
    }
}

/// Weights are stored `fan_in x fan_out`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub fan_in: usize,
    pub fan_out: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel {
    pub layers: Vec<Layer>,
    pub activation: Activation,
}

/// Activations retained for the backward pass.
struct Trace {
    /// Input to each layer (the batch itself for layer 0).
    inputs: Vec<Vec<f64>>,
    /// Pre-activations of hidden layers.
    pre: Vec<Vec<f64>>,
    /// Dropout multipliers per hidden layer (empty when disabled).
    masks: Vec<Vec<f64>>,
    logits: Vec<f64>,
}

impl MlpModel {
    /// Network with Glorot-uniform weights and zero biases.
    pub fn init(input_width: usize, hidden: &[usize], activation: Activation, seed: u64) -> Self {
        let mut r = rng::stream(seed, "mlp/init");
        let mut sizes = vec![input_width];
        sizes.extend_from_slice(hidden);
        sizes.push(1);
        let layers = sizes
            .windows(2)
            .map(|w| {
                let limit = (6.0 / (w[0] + w[1]) as f64).sqrt();
                Layer {
                    fan_in: w[0],
                    fan_out: w[1],
                    weights: (0..w[0] * w[1]).map(|_| r.random_range(-limit..limit)).collect(),
                    bias: vec![0.0; w[1]],
                }
            })
            .collect();
        MlpModel { layers, activation }
    }

    /// Network with every parameter zero.
    pub fn zeros(input_width: usize, hidden: &[usize], activation: Activation) -> Self {
        let mut m = Self::init(input_width, hidden, activation, 0);
        m.layers.iter_mut().for_each(|l| l.weights.fill(0.0));
        m
    }

    pub fn input_width(&self) -> usize {
        self.layers[0].fan_in
    }

    pub fn layer_sizes(&self) -> Vec<usize> {
        let mut s = vec![self.input_width()];
        s.extend(self.layers.iter().map(|l| l.fan_out));
        s
    }

    pub fn n_parameters(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    /// Parameters in layer-major order: each layer's weights then its bias.
    pub fn parameters(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n_parameters());
        for l in &self.layers {
            out.extend_from_slice(&l.weights);
            out.extend_from_slice(&l.bias);
        }
        out
    }

    pub fn set_parameters(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.n_parameters() {
            return Err(Error::invalid(format!(
                "expected {} parameters, got {}",
                self.n_parameters(),
                params.len()
            )));
        }
        let mut at = 0;
        for l in &mut self.layers {
            let nw = l.weights.len();
            l.weights.copy_from_slice(&params[at..at + nw]);
            at += nw;
            let nb = l.bias.len();
            l.bias.copy_from_slice(&params[at..at + nb]);
            at += nb;
        }
        Ok(())
    }

    fn forward(&self, x: &[f64], rows: usize, dropout: Option<(f64, &mut rng::Rng)>) -> Trace {
        let hidden = self.layers.len() - 1;
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut pre = Vec::with_capacity(hidden);
        let mut masks = Vec::new();
        let mut current = x.to_vec();
        let mut dropout = dropout;
        for (li, l) in self.layers.iter().enumerate() {
            let mut z = Vec::with_capacity(rows * l.fan_out);
            for _ in 0..rows {
                z.extend_from_slice(&l.bias);
            }
            gemm(rows, l.fan_in, l.fan_out, &current, &l.weights, &mut z, true);
            inputs.push(current);
            if li == hidden {
                return Trace {
                    inputs,
                    pre,
                    masks,
                    logits: z,
                };
            }
            let mut a: Vec<f64> = z.iter().map(|&v| self.activation.apply(v)).collect();
            if let Some((p, r)) = dropout.as_mut() {
                let keep = 1.0 - *p;
                let mask: Vec<f64> = (0..a.len())
                    .map(|_| if r.random::<f64>() < keep { 1.0 / keep } else { 0.0 })
                    .collect();
                a.iter_mut().zip(&mask).for_each(|(v, m)| *v *= m);
                masks.push(mask);
            }
            pre.push(z);
            current = a;
        }
        unreachable!("network has an output layer")
    }

    /// Smallest |pre-activation| over all hidden units and rows; gradient
    /// checks of piecewise-linear activations need this well above the
    /// finite-difference step.
    pub fn preactivation_margin(&self, x: &Matrix) -> f64 {
        let t = self.forward(x.as_slice(), x.rows(), None);
        t.pre.iter().flatten().fold(f64::INFINITY, |m, z| m.min(z.abs()))
    }

    /// Output logits for a block of rows.
    pub fn logits(&self, x: &[f64], rows: usize) -> Vec<f64> {
        self.forward(x, rows, None).logits
    }

    pub fn predict(&self, x: &Matrix) -> Vec<f64> {
        const CHUNK: usize = 4096;
        let d = x.cols();
        x.as_slice()
            .chunks(CHUNK * d.max(1))
            .flat_map(|block| self.logits(block, block.len() / d.max(1)))
            .map(sigmoid)
            .collect()
    }

    /// Mean weighted BCE and its gradient (layer-major order), given a
    /// forward trace.
    fn backward(&self, t: &Trace, y: &[f64], w: &[f64]) -> (f64, Vec<f64>) {
        let rows = y.len();
        let denom = rows as f64;
        let mut loss = 0.0;
        let mut delta: Vec<f64> = Vec::with_capacity(rows);
        for i in 0..rows {
            let z = t.logits[i];
            loss += w[i] * (softplus(z) - y[i] * z);
            delta.push(w[i] * (sigmoid(z) - y[i]) / denom);
        }
        loss /= denom;

        let mut grads: Vec<(Vec<f64>, Vec<f64>)> = Vec::with_capacity(self.layers.len());
        for li in (0..self.layers.len()).rev() {
            let l = &self.layers[li];
            let mut gw = vec![0.0; l.fan_in * l.fan_out];
            gemm_tn(l.fan_in, rows, l.fan_out, &t.inputs[li], &delta, &mut gw, false);
            let mut gb = vec![0.0; l.fan_out];
            for row in delta.chunks(l.fan_out) {
                gb.iter_mut().zip(row).for_each(|(g, d)| *g += d);
            }
            grads.push((gw, gb));
            if li == 0 {
                break;
            }
            let mut back = vec![0.0; rows * l.fan_in];
            gemm_nt(rows, l.fan_out, l.fan_in, &delta, &l.weights, &mut back);
            let z = &t.pre[li - 1];
            let a = &t.inputs[li];
            let mask = t.masks.get(li - 1);
            for (j, b) in back.iter_mut().enumerate() {
                let m = mask.map_or(1.0, |m| m[j]);
                // Recover the pre-dropout activation for tanh's derivative.
                let act = if m == 0.0 { self.activation.apply(z[j]) } else { a[j] / m };
                *b *= m * self.activation.derivative(z[j], act);
            }
            delta = back;
        }
        grads.reverse();
        let mut flat = Vec::with_capacity(self.n_parameters());
        for (gw, gb) in grads {
            flat.extend(gw);
            flat.extend(gb);
        }
        (loss, flat)
    }

    /// Mean binary cross-entropy over `x` and its exact gradient, without
    /// dropout.
    pub fn loss_and_gradients(&self, x: &Matrix, y: &[bool]) -> (f64, Vec<f64>) {
        let yf: Vec<f64> = y.iter().map(|&l| if l { 1.0 } else { 0.0 }).collect();
        let w = vec![1.0; y.len()];
        let t = self.forward(x.as_slice(), x.rows(), None);
        self.backward(&t, &yf, &w)
    }

    pub fn loss(&self, x: &Matrix, y: &[bool]) -> f64 {
        let logits = self.logits(x.as_slice(), x.rows());
        logits
            .iter()
            .zip(y)
            .map(|(&z, &l)| softplus(z) - if l { z } else { 0.0 })
            .sum::<f64>()
            / y.len() as f64
    }

    fn step(&mut self, grad: &[f64], lr: f64) {
        let mut at = 0;
        for l in &mut self.layers {
            for p in l.weights.iter_mut().chain(l.bias.iter_mut()) {
                *p -= lr * grad[at];
                at += 1;
            }
        }
    }

    fn round_to_f32(&mut self) {
        for l in &mut self.layers {
            l.weights.iter_mut().chain(l.bias.iter_mut()).for_each(|p| *p = round_f32(*p));
        }
    }
}

pub fn train_mlp(x: &Matrix, y: &[bool], config: &MlpConfig) -> Result<MlpModel> {
    train_mlp_with_history(x, y, config, false).map(|(m, _)| m)
}

/// Trains and optionally records the full-data training loss (no dropout)
/// at the end of each epoch.
pub fn train_mlp_with_history(
    x: &Matrix,
    y: &[bool],
    config: &MlpConfig,
    track_loss: bool,
) -> Result<(MlpModel, Vec<f64>)> {
    config.validate()?;
    check_labels(x, y)?;
    x.ensure_finite("training matrix")?;
    let n = x.rows();
    let d = x.cols();
    let mut model = MlpModel::init(d, &config.hidden_sizes, config.activation, config.seed);
    let weights: Option<ClassWeights> = match config.loss_weighting {
        LossWeighting::None => None,
        LossWeighting::ClassWeights => Some(class_weights(y)?),
    };
    let yf: Vec<f64> = y.iter().map(|&l| if l { 1.0 } else { 0.0 }).collect();
    let mut shuffle_rng = rng::stream(config.seed, "mlp/shuffle");
    let mut dropout_rng = rng::stream(config.seed, "mlp/dropout");
    let n_batches = n.div_ceil(config.batch_size);
    let mut history = Vec::new();
    let mut xb = Vec::new();
    let mut yb = Vec::new();
    let mut wb = Vec::new();

    for epoch in 0..config.epochs {
        let batches: Vec<Vec<usize>> = match config.sampler {
            SamplerKind::Plain => shuffled_batches(n, config.batch_size, &mut shuffle_rng),
            SamplerKind::Weighted => weighted_batch_sampler(
                y,
                config.batch_size,
                n_batches,
                rng::derive_seed_indexed(config.seed, "mlp/sampler", epoch as u64),
            )?
            .collect(),
        };
        for batch in batches {
            xb.clear();
            yb.clear();
            wb.clear();
            for &i in &batch {
                xb.extend_from_slice(x.row(i));
                yb.push(yf[i]);
                wb.push(weights.map_or(1.0, |w| w.of(y[i])));
            }
            let drop = (config.dropout > 0.0).then_some((config.dropout, &mut dropout_rng));
            let t = model.forward(&xb, batch.len(), drop);
            let (loss, grad) = model.backward(&t, &yb, &wb);
            if !loss.is_finite() {
                return Err(Error::training(format!("MLP loss diverged in epoch {}", epoch + 1)));
            }
            model.step(&grad, config.learning_rate);
        }
        if track_loss {
            history.push(model.loss(x, y));
        }
    }
    model.round_to_f32();
    if model.parameters().iter().any(|p| !p.is_finite()) {
        return Err(Error::training("MLP parameters are not finite"));
    }
    Ok((model, history))
}

/// Largest relative discrepancy between analytic and central-difference
/// gradients of the mean BCE, over every parameter of a freshly
/// initialized network. Dropout is never applied here.
pub fn grad_check(config: &MlpConfig, x: &Matrix, y: &[bool]) -> Result<f64> {
    if y.len() != x.rows() {
        return Err(Error::invalid("labels and rows differ"));
    }
    let model = MlpModel::init(x.cols(), &config.hidden_sizes, config.activation, config.seed);
    Ok(grad_check_model(&model, x, y))
}

pub fn grad_check_model(model: &MlpModel, x: &Matrix, y: &[bool]) -> f64 {
    const STEP: f64 = 1e-4;
    let (_, analytic) = model.loss_and_gradients(x, y);
    let params = model.parameters();
    let mut probe = model.clone();
    let mut worst: f64 = 0.0;
    for (j, &ga) in analytic.iter().enumerate() {
        let mut p = params.clone();
        p[j] = params[j] + STEP;
        probe.set_parameters(&p).expect("same shape");
        let up = probe.loss(x, y);
        p[j] = params[j] - STEP;
        probe.set_parameters(&p).expect("same shape");
        let down = probe.loss(x, y);
        let gn = (up - down) / (2.0 * STEP);
        worst = worst.max((ga - gn).abs() / 1f64.max(ga.abs()).max(gn.abs()));
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Rows redrawn until every hidden pre-activation clears 0.01.
    fn kink_free(model: &MlpModel, seed: u64, rows: usize) -> (Matrix, Vec<bool>) {
        let cols = model.input_width();
        let mut r = rng::stream(seed, "kink-free");
        let mut data = Vec::with_capacity(rows * cols);
        while data.len() < rows * cols {
            let row: Vec<f64> = (0..cols).map(|_| r.random_range(-1.0..1.0)).collect();
            let one = Matrix::from_vec(1, cols, row.clone()).unwrap();
            if model.preactivation_margin(&one) > 0.01 {
                data.extend(row);
            }
        }
        let y = (0..rows).map(|i| i % 3 == 0).collect();
        (Matrix::from_vec(rows, cols, data).unwrap(), y)
    }

    fn fixture(seed: u64, rows: usize, cols: usize) -> (Matrix, Vec<bool>) {
        let mut r = rng::stream(seed, "mlp-fixture");
        let data: Vec<f64> = (0..rows * cols).map(|_| r.random_range(-1.0..1.0)).collect();
        let y = (0..rows).map(|i| data[i * cols] + 0.3 * r.random::<f64>() > 0.1).collect();
        (Matrix::from_vec(rows, cols, data).unwrap(), y)
    }

    #[test]
    fn grad_check_every_activation() {
        for act in Activation::ALL {
            for seed in 0..3 {
                let cfg = MlpConfig {
                    hidden_sizes: vec![4, 3],
                    activation: act,
                    seed,
                    dropout: 0.0,
                    ..Default::default()
                };
                let model = MlpModel::init(3, &cfg.hidden_sizes, act, seed);
                let (x, y) = kink_free(&model, seed, 10);
                let err = grad_check(&cfg, &x, &y).unwrap();
                assert!(err < 1e-5, "{act:?} seed {seed}: {err}");
            }
        }
    }

    #[test]
    fn zero_network_bias_gradient_is_mean_residual() {
        let rows = [[1.0, -1.0], [-1.0, 1.0], [0.5, -0.5], [-0.5, 0.5]];
        let x = Matrix::from_rows(&rows).unwrap();
        let y = [true, false, true, true];
        let m = MlpModel::zeros(2, &[3], Activation::Tanh);
        let (_, g) = m.loss_and_gradients(&x, &y);
        let mean_residual = y.iter().map(|&l| 0.5 - if l { 1.0 } else { 0.0 }).sum::<f64>() / 4.0;
        assert_eq!(*g.last().unwrap(), mean_residual);
    }

    #[test]
    fn xor_is_learned() {
        let mut r = rng::stream(11, "xor");
        let mut rows = Vec::new();
        let mut y = Vec::new();
        for i in 0..200 {
            let (a, b) = ((i % 2) as f64, ((i / 2) % 2) as f64);
            rows.push([
                2.0 * a - 1.0 + 0.1 * r.random_range(-1.0..1.0),
                2.0 * b - 1.0 + 0.1 * r.random_range(-1.0..1.0),
            ]);
            y.push((i % 2) != ((i / 2) % 2));
        }
        let x = Matrix::from_rows(&rows).unwrap();
        let cfg = MlpConfig {
            hidden_sizes: vec![8, 8],
            activation: Activation::Tanh,
            learning_rate: 0.1,
            epochs: 200,
            batch_size: 16,
            dropout: 0.0,
            seed: 1,
            sampler: SamplerKind::Plain,
            ..Default::default()
        };
        let m = train_mlp(&x, &y, &cfg).unwrap();
        let p = m.predict(&x);
        let worst_pos = (0..200).filter(|&i| y[i]).map(|i| p[i]).fold(1.0, f64::min);
        let best_neg = (0..200).filter(|&i| !y[i]).map(|i| p[i]).fold(0.0, f64::max);
        assert!(worst_pos > best_neg);
    }

    #[test]
    fn deterministic_without_dropout() {
        let (x, y) = fixture(4, 60, 4);
        let cfg = MlpConfig {
            hidden_sizes: vec![6, 4],
            epochs: 3,
            batch_size: 8,
            dropout: 0.0,
            ..Default::default()
        };
        assert_eq!(train_mlp(&x, &y, &cfg).unwrap(), train_mlp(&x, &y, &cfg).unwrap());
    }

    #[test]
    fn loss_decreases_on_separable_data() {
        let mut r = rng::stream(8, "sep");
        let rows: Vec<[f64; 2]> = (0..100)
            .map(|i| {
                let s = if i % 2 == 0 { 1.0 } else { -1.0 };
                [s * (1.0 + r.random::<f64>()), r.random_range(-1.0..1.0)]
            })
            .collect();
        let y: Vec<bool> = (0..100).map(|i| i % 2 == 0).collect();
        let x = Matrix::from_rows(&rows).unwrap();
        let cfg = MlpConfig {
            hidden_sizes: vec![4],
            activation: Activation::Tanh,
            learning_rate: 0.01,
            epochs: 30,
            batch_size: 100,
            dropout: 0.0,
            sampler: SamplerKind::Plain,
            ..Default::default()
        };
        let (_, h) = train_mlp_with_history(&x, &y, &cfg, true).unwrap();
        assert_eq!(h.len(), 30);
        for w in h.windows(2) {
            assert!(w[1] <= w[0] + 1e-6);
        }
    }

    #[test]
    fn inference_ignores_dropout_seed() {
        let (x, y) = fixture(2, 40, 3);
        let cfg = MlpConfig {
            hidden_sizes: vec![5],
            epochs: 2,
            batch_size: 8,
            dropout: 0.5,
            ..Default::default()
        };
        let m = train_mlp(&x, &y, &cfg).unwrap();
        assert_eq!(m.predict(&x), m.predict(&x));
        assert!(m.parameters().iter().all(|p| *p == (*p as f32) as f64));
    }

    #[test]
    fn config_validation() {
        assert!(MlpConfig { hidden_sizes: vec![], ..Default::default() }.validate().is_err());
        assert!(MlpConfig { dropout: 1.0, ..Default::default() }.validate().is_err());
        let a: Activation = serde_json::from_str("\"leaky relu\"").unwrap();
        assert_eq!(a, Activation::LeakyRelu);
    }
}
