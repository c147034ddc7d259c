//! Small differentiable models with exact per-sample gradients.
//!
//! Parameters are stored flat. For every dense layer the weight block
//! (row-major, `out x in`) comes first, followed by its bias. `Logistic1D`
//! is the single-intercept model `P(y|x) = sigmoid(y (theta + x))` and has
//! exactly one parameter.

mod synthetic;

pub use synthetic::{gen_synthetic, SyntheticKind, SyntheticSpec};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{LayerPartition, Matrix, RngStream, Vector};

use rand::Rng;

pub type ParamVector = Vector;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Linear,
    #[serde(rename = "logistic_1d")]
    Logistic1D,
    Logistic,
    Mlp,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    #[default]
    Relu,
    Tanh,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    Mse,
    BinaryCe,
    SoftmaxCe,
    /// Sum of per-output binary cross-entropies; the label is a bitmask.
    MultiLabelBce,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub kind: ModelKind,
    /// `[inputs, hidden..., outputs]`; linear and logistic models have no hidden sizes.
    pub layer_sizes: Vec<usize>,
    #[serde(default)]
    pub activation: Activation,
    pub loss: LossKind,
}

impl ModelSpec {
    pub fn linear(inputs: usize) -> Self {
        ModelSpec { kind: ModelKind::Linear, layer_sizes: vec![inputs, 1], activation: Activation::Relu, loss: LossKind::Mse }
    }

    pub fn logistic_1d() -> Self {
        ModelSpec { kind: ModelKind::Logistic1D, layer_sizes: vec![1, 1], activation: Activation::Relu, loss: LossKind::BinaryCe }
    }

    /// Binary logistic regression with labels in {-1, +1}.
    pub fn logistic(inputs: usize) -> Self {
        ModelSpec { kind: ModelKind::Logistic, layer_sizes: vec![inputs, 1], activation: Activation::Relu, loss: LossKind::BinaryCe }
    }

    pub fn softmax(inputs: usize, classes: usize) -> Self {
        ModelSpec { kind: ModelKind::Logistic, layer_sizes: vec![inputs, classes], activation: Activation::Relu, loss: LossKind::SoftmaxCe }
    }

    pub fn mlp(layer_sizes: Vec<usize>, activation: Activation, loss: LossKind) -> Self {
        ModelSpec { kind: ModelKind::Mlp, layer_sizes, activation, loss }
    }

    pub fn inputs(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn outputs(&self) -> usize {
        *self.layer_sizes.last().expect("validated spec has layer sizes")
    }

    pub fn validate(&self) -> Result<()> {
        let sizes = &self.layer_sizes;
        if sizes.len() < 2 {
            return Err(Error::invalid("layer_sizes needs at least [inputs, outputs]"));
        }
        if sizes[1..].contains(&0) {
            return Err(Error::invalid("layer sizes after the input must be positive"));
        }
        let out = self.outputs();
        match self.kind {
            ModelKind::Linear => {
                if sizes.len() != 2 || out != 1 || self.loss != LossKind::Mse {
                    return Err(Error::invalid("linear model is [inputs, 1] with MSE loss"));
                }
            }
            ModelKind::Logistic1D => {
                if sizes.as_slice() != [1, 1] || self.loss != LossKind::BinaryCe {
                    return Err(Error::invalid("logistic_1d model is [1, 1] with binary CE loss"));
                }
            }
            ModelKind::Logistic => {
                if sizes.len() != 2 {
                    return Err(Error::invalid("logistic model has no hidden layers"));
                }
                match self.loss {
                    LossKind::BinaryCe if out == 1 => {}
                    LossKind::SoftmaxCe if out >= 2 => {}
                    LossKind::MultiLabelBce if out <= 52 => {}
                    _ => return Err(Error::invalid(format!("logistic model cannot use {:?} with {out} outputs", self.loss))),
                }
            }
            ModelKind::Mlp => match self.loss {
                LossKind::Mse | LossKind::BinaryCe if out != 1 => {
                    return Err(Error::invalid(format!("{:?} loss needs a single output", self.loss)));
                }
                LossKind::SoftmaxCe if out < 2 => return Err(Error::invalid("softmax loss needs >= 2 outputs")),
                LossKind::MultiLabelBce if out > 52 => return Err(Error::invalid("at most 52 labels fit in a bitmask")),
                _ => {}
            },
        }
        if self.param_dim() == 0 {
            return Err(Error::invalid("model has no parameters"));
        }
        Ok(())
    }

    pub fn is_classification(&self) -> bool {
        self.loss != LossKind::Mse
    }

    /// Parameter dimension `d`.
    pub fn param_dim(&self) -> usize {
        if self.kind == ModelKind::Logistic1D {
            return 1;
        }
        self.layer_sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
    }

    /// One block per dense layer (weights and bias together).
    pub fn layer_partition(&self) -> Result<LayerPartition> {
        if self.kind == ModelKind::Logistic1D {
            return LayerPartition::single(1);
        }
        let sizes: Vec<usize> = self.layer_sizes.windows(2).map(|w| w[0] * w[1] + w[1]).collect();
        LayerPartition::from_sizes(&sizes)
    }

    /// Glorot-uniform weights and zero biases for MLPs; zeros otherwise.
    pub fn init_params(&self, rng: &RngStream) -> ParamVector {
        let mut w = Vector::zeros(self.param_dim());
        if self.kind != ModelKind::Mlp {
            return w;
        }
        let mut g = rng.generator();
        let mut off = 0;
        for pair in self.layer_sizes.windows(2) {
            let (fan_in, fan_out) = (pair[0], pair[1]);
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            for v in &mut w[off..off + fan_in * fan_out] {
                *v = g.random_range(-limit..limit);
            }
            off += fan_in * fan_out + fan_out;
        }
        w
    }
}

/// Features, labels and a name.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub features: Matrix,
    pub labels: Vec<f64>,
    pub name: String,
}

impl Dataset {
    pub fn new(features: Matrix, labels: Vec<f64>, name: impl Into<String>) -> Result<Self> {
        if features.rows() == 0 {
            return Err(Error::invalid("dataset must have at least one row"));
        }
        if features.rows() != labels.len() {
            return Err(Error::invalid(format!("{} feature rows but {} labels", features.rows(), labels.len())));
        }
        if !features.is_finite() || labels.iter().any(|l| !l.is_finite()) {
            return Err(Error::invalid("dataset contains non-finite values"));
        }
        Ok(Dataset { features, labels, name: name.into() })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn width(&self) -> usize {
        self.features.cols()
    }

    /// Rows `idx`, in order. Fails on an empty index set.
    pub fn subset(&self, idx: &[usize]) -> Result<Dataset> {
        let labels = idx.iter().map(|&i| self.labels[i]).collect();
        Dataset::new(self.features.select_rows(idx), labels, self.name.clone())
    }

    /// Checks feature width and label domain against `spec`.
    pub fn validate_for(&self, spec: &ModelSpec) -> Result<()> {
        spec.validate()?;
        if self.width() != spec.inputs() {
            return Err(Error::invalid(format!("dataset '{}' has {} features, model expects {}", self.name, self.width(), spec.inputs())));
        }
        for (i, &y) in self.labels.iter().enumerate() {
            check_label(spec, y).map_err(|e| Error::invalid(format!("row {i}: {e}")))?;
        }
        Ok(())
    }
}

fn check_label(spec: &ModelSpec, y: f64) -> std::result::Result<(), String> {
    let k = spec.outputs();
    let ok = match spec.loss {
        LossKind::Mse => true,
        LossKind::BinaryCe => y == 1.0 || y == -1.0,
        LossKind::SoftmaxCe => y.fract() == 0.0 && y >= 0.0 && (y as usize) < k,
        LossKind::MultiLabelBce => y.fract() == 0.0 && y >= 0.0 && y < (1u64 << k) as f64,
    };
    if ok {
        Ok(())
    } else {
        Err(format!("label {y} outside the domain of {:?} with {k} outputs", spec.loss))
    }
}

fn check_shapes(spec: &ModelSpec, w: &[f64], data: &Dataset) -> Result<()> {
    spec.validate()?;
    if w.len() != spec.param_dim() {
        return Err(Error::invalid(format!("parameter vector has {} entries, model needs {}", w.len(), spec.param_dim())));
    }
    if data.width() != spec.inputs() {
        return Err(Error::invalid(format!("batch has {} features, model expects {}", data.width(), spec.inputs())));
    }
    Ok(())
}

/// `B x d` matrix whose row `i` is the gradient of sample `i`'s loss.
pub fn per_sample_gradients(spec: &ModelSpec, w: &[f64], batch: &Dataset) -> Result<Matrix> {
    check_shapes(spec, w, batch)?;
    let d = spec.param_dim();
    let mut out = Matrix::zeros(batch.len(), d);
    for i in 0..batch.len() {
        let (x, y) = (batch.features.row(i), batch.labels[i]);
        let row = out.row_mut(i);
        match spec.kind {
            ModelKind::Logistic1D => {
                row[0] = -y * (1.0 - sigmoid(y * (w[0] + x[0])));
            }
            ModelKind::Linear | ModelKind::Logistic => single_layer_gradient(spec, w, x, y, row),
            ModelKind::Mlp => {
                backprop(spec, w, x, y, row);
            }
        }
    }
    Ok(out)
}

/// Gradients for rows `idx` of `data`.
pub fn per_sample_gradients_at(spec: &ModelSpec, w: &[f64], data: &Dataset, idx: &[usize]) -> Result<Matrix> {
    per_sample_gradients(spec, w, &data.subset(idx)?)
}

/// Per-sample losses.
pub fn sample_losses(spec: &ModelSpec, w: &[f64], data: &Dataset) -> Result<Vec<f64>> {
    check_shapes(spec, w, data)?;
    Ok((0..data.len())
        .map(|i| {
            let out = forward(spec, w, data.features.row(i));
            output_loss(spec, &out, data.labels[i])
        })
        .collect())
}

pub fn mean_loss(spec: &ModelSpec, w: &[f64], data: &Dataset) -> Result<f64> {
    let l = sample_losses(spec, w, data)?;
    Ok(l.iter().sum::<f64>() / l.len() as f64)
}

/// Fraction of correct predictions. Multi-label accuracy averages over labels.
pub fn accuracy(spec: &ModelSpec, w: &[f64], data: &Dataset) -> Result<f64> {
    if !spec.is_classification() {
        return Err(Error::UnsupportedMetric("accuracy is undefined for regression".into()));
    }
    check_shapes(spec, w, data)?;
    let k = spec.outputs();
    let mut correct = 0.0;
    for i in 0..data.len() {
        let out = forward(spec, w, data.features.row(i));
        let y = data.labels[i];
        correct += match spec.loss {
            LossKind::BinaryCe => {
                let pred = if out[0] >= 0.0 { 1.0 } else { -1.0 };
                f64::from(u8::from(pred == y))
            }
            LossKind::SoftmaxCe => f64::from(u8::from(argmax(&out) == y as usize)),
            LossKind::MultiLabelBce => {
                let mask = y as u64;
                let hits = (0..k).filter(|&j| (out[j] >= 0.0) == (mask >> j & 1 == 1)).count();
                hits as f64 / k as f64
            }
            LossKind::Mse => unreachable!(),
        };
    }
    Ok(correct / data.len() as f64)
}

/// Mean loss and accuracy over `data`.
pub fn batch_loss_accuracy(spec: &ModelSpec, w: &[f64], data: &Dataset) -> Result<(f64, f64)> {
    let acc = accuracy(spec, w, data)?;
    Ok((mean_loss(spec, w, data)?, acc))
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^z)` without overflow.
fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

fn argmax(v: &[f64]) -> usize {
    v.iter().enumerate().fold((0, f64::NEG_INFINITY), |(bi, bv), (i, &x)| if x > bv { (i, x) } else { (bi, bv) }).0
}

fn softmax(z: &[f64]) -> Vec<f64> {
    let m = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = z.iter().map(|v| (v - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

fn output_loss(spec: &ModelSpec, out: &[f64], y: f64) -> f64 {
    match spec.loss {
        LossKind::Mse => 0.5 * (out[0] - y).powi(2),
        LossKind::BinaryCe => softplus(-y * out[0]),
        LossKind::SoftmaxCe => {
            let m = out.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let lse = m + out.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
            lse - out[y as usize]
        }
        LossKind::MultiLabelBce => {
            let mask = y as u64;
            out.iter().enumerate().map(|(j, &z)| softplus(z) - if mask >> j & 1 == 1 { z } else { 0.0 }).sum()
        }
    }
}

/// d(loss)/d(output).
fn output_delta(spec: &ModelSpec, out: &[f64], y: f64) -> Vec<f64> {
    match spec.loss {
        LossKind::Mse => vec![out[0] - y],
        LossKind::BinaryCe => vec![-y * (1.0 - sigmoid(y * out[0]))],
        LossKind::SoftmaxCe => {
            let mut p = softmax(out);
            p[y as usize] -= 1.0;
            p
        }
        LossKind::MultiLabelBce => {
            let mask = y as u64;
            out.iter().enumerate().map(|(j, &z)| sigmoid(z) - if mask >> j & 1 == 1 { 1.0 } else { 0.0 }).collect()
        }
    }
}

fn dense(w: &[f64], off: usize, fan_in: usize, fan_out: usize, x: &[f64]) -> Vec<f64> {
    let (weights, bias) = (&w[off..off + fan_in * fan_out], &w[off + fan_in * fan_out..off + fan_in * fan_out + fan_out]);
    (0..fan_out).map(|o| bias[o] + crate::numeric::dot(&weights[o * fan_in..(o + 1) * fan_in], x)).collect()
}

fn activate(act: Activation, z: f64) -> f64 {
    match act {
        Activation::Relu => z.max(0.0),
        Activation::Tanh => z.tanh(),
    }
}

/// Derivative of the activation given the pre-activation; ReLU'(0) = 0.
fn activate_grad(act: Activation, z: f64) -> f64 {
    match act {
        Activation::Relu => f64::from(u8::from(z > 0.0)),
        Activation::Tanh => 1.0 - z.tanh().powi(2),
    }
}

/// Model output (logits or prediction).
pub fn forward(spec: &ModelSpec, w: &[f64], x: &[f64]) -> Vec<f64> {
    if spec.kind == ModelKind::Logistic1D {
        return vec![w[0] + x[0]];
    }
    let n_layers = spec.layer_sizes.len() - 1;
    let mut h = x.to_vec();
    let mut off = 0;
    for (l, pair) in spec.layer_sizes.windows(2).enumerate() {
        let z = dense(w, off, pair[0], pair[1], &h);
        off += pair[0] * pair[1] + pair[1];
        h = if l + 1 < n_layers { z.into_iter().map(|v| activate(spec.activation, v)).collect() } else { z };
    }
    h
}

fn single_layer_gradient(spec: &ModelSpec, w: &[f64], x: &[f64], y: f64, row: &mut [f64]) {
    let (m, k) = (spec.inputs(), spec.outputs());
    let z = dense(w, 0, m, k, x);
    let delta = output_delta(spec, &z, y);
    for o in 0..k {
        for (j, xj) in x.iter().enumerate() {
            row[o * m + j] = delta[o] * xj;
        }
        row[m * k + o] = delta[o];
    }
}

/// Reverse accumulation through the dense stack.
fn backprop(spec: &ModelSpec, w: &[f64], x: &[f64], y: f64, row: &mut [f64]) {
    let sizes = &spec.layer_sizes;
    let n_layers = sizes.len() - 1;
    let mut offsets = Vec::with_capacity(n_layers);
    // inputs[l] feeds layer l, pre[l] is layer l's pre-activation
    let mut inputs: Vec<Vec<f64>> = Vec::with_capacity(n_layers);
    let mut pre: Vec<Vec<f64>> = Vec::with_capacity(n_layers);
    let mut h = x.to_vec();
    let mut off = 0;
    for l in 0..n_layers {
        let (fi, fo) = (sizes[l], sizes[l + 1]);
        offsets.push(off);
        let z = dense(w, off, fi, fo, &h);
        off += fi * fo + fo;
        inputs.push(h);
        h = if l + 1 < n_layers { z.iter().map(|&v| activate(spec.activation, v)).collect() } else { z.clone() };
        pre.push(z);
    }
    let mut delta = output_delta(spec, &h, y);
    for l in (0..n_layers).rev() {
        let (fi, fo, off) = (sizes[l], sizes[l + 1], offsets[l]);
        let input = &inputs[l];
        for o in 0..fo {
            for j in 0..fi {
                row[off + o * fi + j] = delta[o] * input[j];
            }
            row[off + fi * fo + o] = delta[o];
        }
        if l > 0 {
            let weights = &w[off..off + fi * fo];
            delta = (0..fi)
                .map(|j| {
                    let back: f64 = (0..fo).map(|o| weights[o * fi + j] * delta[o]).sum();
                    back * activate_grad(spec.activation, pre[l - 1][j])
                })
                .collect();
        }
    }
}
