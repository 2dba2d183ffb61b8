//! Small ReLU MLP trained on pre-aggregated node features.
//!
//! Rows of the SIGN tensor are independent samples, so mini-batching is a
//! plain shuffle-and-split. With `quantize_activations` every hidden-layer
//! activation kept for the backward pass is stored b-bit quantized and
//! dequantized again when the gradient needs it; the forward values
//! themselves stay exact.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::metrics::{self, MetricsReport};
use crate::quant;
use crate::{Error, Matrix, Result, TaskKind};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Optimizer {
    Sgd,
    Momentum { beta: f64 },
    Adam { beta1: f64, beta2: f64, eps: f64 },
}

impl Optimizer {
    pub fn adam() -> Self {
        Optimizer::Adam {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpConfig {
    pub hidden: Vec<usize>,
    pub dropout: f64,
    pub learning_rate: f64,
    pub batches_per_epoch: usize,
    pub epochs: usize,
    pub seed: u64,
    pub quantize_activations: bool,
    pub quant_bits: u8,
    pub optimizer: Optimizer,
    pub task: TaskKind,
}

impl Default for MlpConfig {
    fn default() -> Self {
        Self {
            hidden: vec![64],
            dropout: 0.0,
            learning_rate: 0.05,
            batches_per_epoch: 1,
            epochs: 100,
            seed: 0,
            quantize_activations: false,
            quant_bits: 2,
            optimizer: Optimizer::Sgd,
            task: TaskKind::MultiClass,
        }
    }
}

impl MlpConfig {
    pub fn layer_sizes(&self, input: usize, output: usize) -> Vec<usize> {
        let mut sizes = Vec::with_capacity(self.hidden.len() + 2);
        sizes.push(input);
        sizes.extend_from_slice(&self.hidden);
        sizes.push(output);
        sizes
    }

    fn validate(&self) -> Result<()> {
        if self.hidden.is_empty() || self.hidden.contains(&0) {
            return Err(Error::InvalidParameter(
                "need at least one hidden layer, all of positive width".into(),
            ));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::InvalidParameter(format!("dropout must lie in [0, 1), got {}", self.dropout)));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidParameter("learning rate must be positive".into()));
        }
        if self.batches_per_epoch == 0 {
            return Err(Error::InvalidParameter("need at least one batch per epoch".into()));
        }
        if self.quantize_activations && !(1..=8).contains(&self.quant_bits) {
            return Err(Error::InvalidParameter(format!("bit width {} outside 1..=8", self.quant_bits)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    /// `inputs x outputs`.
    pub weights: Matrix,
    pub bias: Vec<f64>,
}

impl Layer {
    fn forward(&self, x: &Matrix) -> Matrix {
        let mut out = x.matmul(&self.weights).expect("layer widths chain");
        let cols = out.cols();
        for row in out.as_mut_slice().chunks_mut(cols.max(1)) {
            for (o, b) in row.iter_mut().zip(&self.bias) {
                *o += b;
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    layers: Vec<Layer>,
    task: TaskKind,
}

/// Gradient of one layer's parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerGrad {
    pub weights: Matrix,
    pub bias: Vec<f64>,
}

/// What the forward pass keeps for the backward pass.
struct Tape {
    /// Input of each layer, possibly after a quantize/dequantize round trip.
    inputs: Vec<Matrix>,
    /// Per hidden layer: ReLU gate times inverted-dropout scale.
    gates: Vec<Vec<f64>>,
    logits: Matrix,
}

fn softmax_in_place(row: &mut [f64]) {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in row.iter_mut() {
        *v = libm::exp(*v - max);
        sum += *v;
    }
    row.iter_mut().for_each(|v| *v /= sum);
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + libm::exp(-x))
}

/// `log(1 + e^x)` without overflow.
fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + libm::log1p(libm::exp(-x))
    } else {
        libm::log1p(libm::exp(x))
    }
}

impl Mlp {
    /// Glorot-uniform weights, zero biases.
    pub fn new(sizes: &[usize], task: TaskKind, seed: u64) -> Result<Self> {
        if sizes.len() < 2 || sizes.contains(&0) {
            return Err(Error::InvalidParameter(format!("bad layer sizes {sizes:?}")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layers = sizes
            .windows(2)
            .map(|w| {
                let limit = libm::sqrt(6.0 / (w[0] + w[1]) as f64);
                let data = (0..w[0] * w[1]).map(|_| rng.random_range(-limit..limit)).collect();
                Layer {
                    weights: Matrix::from_vec(w[0], w[1], data).expect("sized above"),
                    bias: vec![0.0; w[1]],
                }
            })
            .collect();
        Ok(Self { layers, task })
    }

    pub fn from_layers(layers: Vec<Layer>, task: TaskKind) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::InvalidParameter("an MLP needs at least one layer".into()));
        }
        for (i, l) in layers.iter().enumerate() {
            if l.bias.len() != l.weights.cols() {
                return Err(Error::Shape(format!("layer {i} bias does not match its weights")));
            }
            if i > 0 && layers[i - 1].weights.cols() != l.weights.rows() {
                return Err(Error::Shape(format!("layer {i} input width does not chain")));
            }
        }
        Ok(Self { layers, task })
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub fn task(&self) -> TaskKind {
        self.task
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].weights.rows()
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().expect("non-empty").weights.cols()
    }

    /// Raw outputs (pre-softmax / pre-sigmoid) in inference mode.
    pub fn logits(&self, x: &Matrix) -> Result<Matrix> {
        if x.cols() != self.input_dim() {
            return Err(Error::Shape(format!(
                "model expects {} input columns, got {}",
                self.input_dim(),
                x.cols()
            )));
        }
        let last = self.layers.len() - 1;
        let mut h = x.clone();
        for (i, layer) in self.layers.iter().enumerate() {
            h = layer.forward(&h);
            if i < last {
                h.as_mut_slice().iter_mut().for_each(|v| *v = v.max(0.0));
            }
        }
        Ok(h)
    }

    fn forward_train(
        &self,
        x: &Matrix,
        dropout: f64,
        quant_bits: Option<u8>,
        rng: &mut ChaCha8Rng,
    ) -> Result<Tape> {
        let last = self.layers.len() - 1;
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut gates = Vec::with_capacity(last);
        let mut h = x.clone();
        for (i, layer) in self.layers.iter().enumerate() {
            let mut out = layer.forward(&h);
            let cached = match quant_bits {
                Some(bits) if i > 0 => {
                    let q = quant::quantize(&h, bits, h.cols().max(1))?;
                    quant::dequantize(&q)?
                }
                _ => h,
            };
            inputs.push(cached);
            if i < last {
                let keep_scale = 1.0 / (1.0 - dropout);
                let gate: Vec<f64> = out
                    .as_slice()
                    .iter()
                    .map(|&v| {
                        let dropped = dropout > 0.0 && rng.random::<f64>() < dropout;
                        if v > 0.0 && !dropped {
                            keep_scale
                        } else {
                            0.0
                        }
                    })
                    .collect();
                out.as_mut_slice().iter_mut().zip(&gate).for_each(|(v, g)| *v *= g);
                gates.push(gate);
            }
            h = out;
        }
        Ok(Tape {
            inputs,
            gates,
            logits: h,
        })
    }

    /// Mean loss and the gradient of the loss with respect to the logits.
    fn loss_and_output_grad(&self, logits: &Matrix, y: &Matrix) -> (f64, Matrix) {
        let batch = logits.rows() as f64;
        let mut grad = logits.clone();
        let mut loss = 0.0;
        match self.task {
            TaskKind::MultiClass => {
                for (g, t) in grad.as_mut_slice().chunks_mut(y.cols()).zip(y.row_iter()) {
                    let max = g.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                    let lse = max + libm::log(g.iter().map(|v| libm::exp(v - max)).sum::<f64>());
                    loss += g.iter().zip(t).map(|(z, t)| t * (lse - z)).sum::<f64>();
                    softmax_in_place(g);
                    g.iter_mut().zip(t).for_each(|(p, t)| *p = (*p - t) / batch);
                }
                loss /= batch;
            }
            TaskKind::MultiLabel => {
                let count = batch * y.cols() as f64;
                for (g, &t) in grad.as_mut_slice().iter_mut().zip(y.as_slice()) {
                    let z = *g;
                    loss += softplus(z) - t * z;
                    *g = (sigmoid(z) - t) / count;
                }
                loss /= count;
            }
        }
        (loss, grad)
    }

    fn backward(&self, tape: &Tape, mut delta: Matrix) -> Vec<LayerGrad> {
        let mut grads = Vec::with_capacity(self.layers.len());
        for i in (0..self.layers.len()).rev() {
            let weights = tape.inputs[i].t_matmul(&delta).expect("tape shapes chain");
            let mut bias = vec![0.0; delta.cols()];
            for row in delta.row_iter() {
                bias.iter_mut().zip(row).for_each(|(b, d)| *b += d);
            }
            grads.push(LayerGrad { weights, bias });
            if i > 0 {
                delta = delta.matmul_t(&self.layers[i].weights).expect("tape shapes chain");
                delta
                    .as_mut_slice()
                    .iter_mut()
                    .zip(&tape.gates[i - 1])
                    .for_each(|(d, g)| *d *= g);
            }
        }
        grads.reverse();
        grads
    }

    /// Mean loss over `x`, inference mode.
    pub fn loss(&self, x: &Matrix, y: &Matrix) -> Result<f64> {
        let logits = self.logits(x)?;
        check_targets(&logits, y)?;
        Ok(self.loss_and_output_grad(&logits, y).0)
    }

    /// Exact loss gradient without dropout or quantization.
    pub fn loss_gradients(&self, x: &Matrix, y: &Matrix) -> Result<(f64, Vec<LayerGrad>)> {
        if x.cols() != self.input_dim() {
            return Err(Error::Shape(format!(
                "model expects {} input columns, got {}",
                self.input_dim(),
                x.cols()
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let tape = self.forward_train(x, 0.0, None, &mut rng)?;
        check_targets(&tape.logits, y)?;
        let (loss, delta) = self.loss_and_output_grad(&tape.logits, y);
        Ok((loss, self.backward(&tape, delta)))
    }
}

fn check_targets(logits: &Matrix, y: &Matrix) -> Result<()> {
    if logits.shape() != y.shape() {
        return Err(Error::Shape(format!(
            "model produces {:?} but targets are {:?}",
            logits.shape(),
            y.shape()
        )));
    }
    Ok(())
}

/// Per-parameter optimizer state.
struct OptimizerState {
    kind: Optimizer,
    step: i32,
    first: Vec<(Vec<f64>, Vec<f64>)>,
    second: Vec<(Vec<f64>, Vec<f64>)>,
}

impl OptimizerState {
    fn new(kind: Optimizer, model: &Mlp) -> Self {
        let zeros = || {
            model
                .layers
                .iter()
                .map(|l| (vec![0.0; l.weights.as_slice().len()], vec![0.0; l.bias.len()]))
                .collect::<Vec<_>>()
        };
        Self {
            kind,
            step: 0,
            first: zeros(),
            second: zeros(),
        }
    }

    fn apply(&mut self, model: &mut Mlp, grads: &[LayerGrad], lr: f64) {
        self.step += 1;
        for (i, (layer, grad)) in model.layers.iter_mut().zip(grads).enumerate() {
            let (m_w, m_b) = &mut self.first[i];
            let (v_w, v_b) = &mut self.second[i];
            update(self.kind, self.step, lr, layer.weights.as_mut_slice(), grad.weights.as_slice(), m_w, v_w);
            update(self.kind, self.step, lr, &mut layer.bias, &grad.bias, m_b, v_b);
        }
    }
}

fn update(kind: Optimizer, step: i32, lr: f64, params: &mut [f64], grads: &[f64], m: &mut [f64], v: &mut [f64]) {
    match kind {
        Optimizer::Sgd => params.iter_mut().zip(grads).for_each(|(p, g)| *p -= lr * g),
        Optimizer::Momentum { beta } => {
            for ((p, g), m) in params.iter_mut().zip(grads).zip(m) {
                *m = beta * *m + g;
                *p -= lr * *m;
            }
        }
        Optimizer::Adam { beta1, beta2, eps } => {
            let c1 = 1.0 - libm::pow(beta1, step as f64);
            let c2 = 1.0 - libm::pow(beta2, step as f64);
            for (((p, g), m), v) in params.iter_mut().zip(grads).zip(m).zip(v) {
                *m = beta1 * *m + (1.0 - beta1) * g;
                *v = beta2 * *v + (1.0 - beta2) * g * g;
                *p -= lr * (*m / c1) / (libm::sqrt(*v / c2) + eps);
            }
        }
    }
}

/// Rows of a feature/target pair that take part in a computation.
#[derive(Debug, Clone, Copy)]
pub struct RowSet<'a> {
    pub z: &'a Matrix,
    pub y: &'a Matrix,
    pub rows: &'a [usize],
}

impl<'a> RowSet<'a> {
    pub fn new(z: &'a Matrix, y: &'a Matrix, rows: &'a [usize]) -> Result<Self> {
        if z.rows() != y.rows() {
            return Err(Error::Shape(format!(
                "features have {} rows but targets have {}",
                z.rows(),
                y.rows()
            )));
        }
        if let Some(&bad) = rows.iter().find(|&&r| r >= z.rows()) {
            return Err(Error::Shape(format!("row {bad} out of range for {} rows", z.rows())));
        }
        Ok(Self { z, y, rows })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    /// `None` without validation rows.
    pub val_accuracy: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    /// The best model by validation accuracy (or the last one without
    /// validation rows).
    pub model: Mlp,
    pub history: Vec<EpochRecord>,
    pub best_epoch: Option<usize>,
}

pub fn train_mlp(train: RowSet<'_>, val: Option<RowSet<'_>>, cfg: &MlpConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    if train.rows.is_empty() {
        return Err(Error::EmptyInput("no training rows"));
    }
    if !train.z.all_finite() {
        return Err(Error::Data("training features contain NaN or infinite values".into()));
    }
    let sizes = cfg.layer_sizes(train.z.cols(), train.y.cols());
    let mut model = Mlp::new(&sizes, cfg.task, cfg.seed)?;
    let mut optimizer = OptimizerState::new(cfg.optimizer, &model);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5eed_0f_ba7c4);
    let quant_bits = cfg.quantize_activations.then_some(cfg.quant_bits);
    let val = val.filter(|v| !v.rows.is_empty());

    let mut history = Vec::with_capacity(cfg.epochs);
    let mut best: Option<(f64, usize, Mlp)> = None;
    let mut order = train.rows.to_vec();
    let batches = cfg.batches_per_epoch.min(order.len());

    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for b in 0..batches {
            let (start, end) = (b * order.len() / batches, (b + 1) * order.len() / batches);
            let rows = &order[start..end];
            let x = train.z.select_rows(rows);
            let y = train.y.select_rows(rows);
            let tape = model.forward_train(&x, cfg.dropout, quant_bits, &mut rng)?;
            let (loss, delta) = model.loss_and_output_grad(&tape.logits, &y);
            if !loss.is_finite() {
                return Err(Error::Diverged { epoch, batch: b, loss });
            }
            let grads = model.backward(&tape, delta);
            optimizer.apply(&mut model, &grads, cfg.learning_rate);
            epoch_loss += loss * rows.len() as f64;
        }
        let train_loss = epoch_loss / order.len() as f64;
        let val_accuracy = match val {
            Some(v) => Some(evaluate(&model, v.z, v.y, v.rows)?.accuracy),
            None => None,
        };
        history.push(EpochRecord {
            epoch,
            train_loss,
            val_accuracy,
        });
        if let Some(acc) = val_accuracy {
            if best.as_ref().is_none_or(|(b, _, _)| acc > *b) {
                best = Some((acc, epoch, model.clone()));
            }
        }
    }

    let (model, best_epoch) = match best {
        Some((_, epoch, m)) => (m, Some(epoch)),
        None => (model, None),
    };
    Ok(TrainOutcome {
        model,
        history,
        best_epoch,
    })
}

/// Metrics of `model` on the given rows.
pub fn evaluate(model: &Mlp, z: &Matrix, y: &Matrix, rows: &[usize]) -> Result<MetricsReport> {
    if rows.is_empty() {
        return Err(Error::EmptyInput("no rows to evaluate"));
    }
    let set = RowSet::new(z, y, rows)?;
    let logits = model.logits(&set.z.select_rows(rows))?;
    metrics::score_logits(&logits, &set.y.select_rows(rows), model.task())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::AttributeSet;

    /// Two separable blobs in 2-D, labels by blob.
    fn blobs(n: usize) -> (Matrix, Matrix) {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut rows = Vec::new();
        let mut classes = Vec::new();
        for i in 0..n {
            let c = i % 2;
            let center = if c == 0 { -2.0 } else { 2.0 };
            rows.push([center + rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)]);
            classes.push(c);
        }
        (Matrix::from_rows(&rows).unwrap(), AttributeSet::one_hot(&classes, 2).unwrap())
    }

    #[test]
    fn zero_epochs_returns_initial_model() {
        let (x, y) = blobs(20);
        let rows: Vec<usize> = (0..20).collect();
        let cfg = MlpConfig { epochs: 0, ..Default::default() };
        let out = train_mlp(RowSet::new(&x, &y, &rows).unwrap(), None, &cfg).unwrap();
        assert!(out.history.is_empty());
        assert_eq!(out.model, Mlp::new(&[2, 64, 2], TaskKind::MultiClass, 0).unwrap());
        evaluate(&out.model, &x, &y, &rows).unwrap();
    }

    #[test]
    fn loss_decreases_on_separable_data() {
        let (x, y) = blobs(100);
        let rows: Vec<usize> = (0..100).collect();
        let cfg = MlpConfig { epochs: 10, batches_per_epoch: 4, ..Default::default() };
        let out = train_mlp(RowSet::new(&x, &y, &rows).unwrap(), None, &cfg).unwrap();
        let first = out.history[0].train_loss;
        let best_late = out.history[5..].iter().map(|r| r.train_loss).fold(f64::INFINITY, f64::min);
        assert!(best_late < first, "{:?}", out.history);
    }

    #[test]
    fn training_is_deterministic() {
        let (x, y) = blobs(60);
        let rows: Vec<usize> = (0..40).collect();
        let val: Vec<usize> = (40..60).collect();
        let cfg = MlpConfig {
            epochs: 5,
            dropout: 0.3,
            batches_per_epoch: 3,
            quantize_activations: true,
            ..Default::default()
        };
        let run = || {
            train_mlp(
                RowSet::new(&x, &y, &rows).unwrap(),
                Some(RowSet::new(&x, &y, &val).unwrap()),
                &cfg,
            )
            .unwrap()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn config_validation() {
        let (x, y) = blobs(10);
        let rows: Vec<usize> = (0..10).collect();
        let set = RowSet::new(&x, &y, &rows).unwrap();
        for cfg in [
            MlpConfig { hidden: vec![], ..Default::default() },
            MlpConfig { dropout: 1.0, ..Default::default() },
            MlpConfig { batches_per_epoch: 0, ..Default::default() },
            MlpConfig { learning_rate: 0.0, ..Default::default() },
        ] {
            assert!(matches!(train_mlp(set, None, &cfg), Err(Error::InvalidParameter(_))));
        }
        assert!(matches!(train_mlp(RowSet::new(&x, &y, &[]).unwrap(), None, &MlpConfig::default()), Err(Error::EmptyInput(_))));
    }

    #[test]
    fn divergence_is_reported() {
        let (mut x, y) = blobs(10);
        x.as_mut_slice().iter_mut().for_each(|v| *v *= 1e200);
        let rows: Vec<usize> = (0..10).collect();
        let cfg = MlpConfig { learning_rate: 1e10, epochs: 5, ..Default::default() };
        let err = train_mlp(RowSet::new(&x, &y, &rows).unwrap(), None, &cfg).unwrap_err();
        assert!(matches!(err, Error::Diverged { .. }), "{err:?}");
    }

    #[test]
    fn multilabel_loss_is_finite_for_large_logits() {
        let layer = Layer {
            weights: Matrix::from_rows(&[[1000.0, -1000.0]]).unwrap(),
            bias: vec![0.0, 0.0],
        };
        let hidden = Layer {
            weights: Matrix::from_rows(&[[1.0]]).unwrap(),
            bias: vec![0.0],
        };
        let m = Mlp::from_layers(vec![hidden, layer], TaskKind::MultiLabel).unwrap();
        let x = Matrix::from_rows(&[[1.0]]).unwrap();
        let y = Matrix::from_rows(&[[0.0, 1.0]]).unwrap();
        let loss = m.loss(&x, &y).unwrap();
        assert!((loss - 1000.0).abs() < 1e-9);
    }
}
