//! Small feed-forward networks with explicit backpropagation and a
//! mean softmax cross-entropy loss.
//!
//! Dense weights are stored `[output, input]`; conv weights
//! `[out_channels, in_channels, kernel, kernel]` (valid convolution, stride 1,
//! channel-major activations). Biases are one entry per output unit or
//! output channel and are never pruned.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::data::Batch;
use crate::error::{invalid, Error, Result};
use crate::rng::Rng;
use crate::tensor::Tensor;
use crate::weights::WeightSet;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Identity,
    /// Output layer whose values are logits fed to softmax cross-entropy.
    Softmax,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LayerKind {
    Dense,
    Conv2d {
        in_channels: usize,
        out_channels: usize,
        height: usize,
        width: usize,
        kernel: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LayerSpec {
    pub kind: LayerKind,
    pub input_dim: usize,
    pub output_dim: usize,
    pub activation: Activation,
}

impl LayerSpec {
    pub fn dense(input_dim: usize, output_dim: usize, activation: Activation) -> Self {
        Self {
            kind: LayerKind::Dense,
            input_dim,
            output_dim,
            activation,
        }
    }

    pub fn conv2d(
        in_channels: usize,
        out_channels: usize,
        height: usize,
        width: usize,
        kernel: usize,
        activation: Activation,
    ) -> Self {
        let out_h = (height + 1).saturating_sub(kernel);
        let out_w = (width + 1).saturating_sub(kernel);
        Self {
            kind: LayerKind::Conv2d {
                in_channels,
                out_channels,
                height,
                width,
                kernel,
            },
            input_dim: in_channels * height * width,
            output_dim: out_channels * out_h * out_w,
            activation,
        }
    }

    pub fn weight_shape(&self) -> Vec<usize> {
        match self.kind {
            LayerKind::Dense => vec![self.output_dim, self.input_dim],
            LayerKind::Conv2d {
                in_channels,
                out_channels,
                kernel,
                ..
            } => vec![out_channels, in_channels, kernel, kernel],
        }
    }

    pub fn bias_len(&self) -> usize {
        match self.kind {
            LayerKind::Dense => self.output_dim,
            LayerKind::Conv2d { out_channels, .. } => out_channels,
        }
    }

    fn fan_in(&self) -> usize {
        match self.kind {
            LayerKind::Dense => self.input_dim,
            LayerKind::Conv2d {
                in_channels,
                kernel,
                ..
            } => in_channels * kernel * kernel,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.output_dim == 0 {
            return Err(invalid("layer", "dimensions must be positive"));
        }
        if let LayerKind::Conv2d {
            in_channels,
            out_channels,
            height,
            width,
            kernel,
        } = self.kind
        {
            if in_channels == 0 || out_channels == 0 || kernel == 0 {
                return Err(invalid("layer", "conv channels and kernel must be positive"));
            }
            if kernel > height || kernel > width {
                return Err(invalid("layer", "conv kernel larger than its input"));
            }
        }
        Ok(())
    }
}

/// Per-layer derivatives of the loss.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub weights: WeightSet,
    pub biases: Vec<Tensor>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    layers: Vec<LayerSpec>,
    weights: WeightSet,
    biases: Vec<Tensor>,
}

impl Network {
    /// Seeded fan-in scaled uniform init, `U(-√(6/fan_in), √(6/fan_in))`, zero biases.
    pub fn new(layers: Vec<LayerSpec>, rng: &mut Rng) -> Result<Self> {
        validate_layers(&layers)?;
        let mut weights = Vec::with_capacity(layers.len());
        let mut biases = Vec::with_capacity(layers.len());
        for spec in &layers {
            let shape = spec.weight_shape();
            let bound = libm::sqrt(6.0 / spec.fan_in() as f64);
            let len: usize = shape.iter().product();
            let data = (0..len).map(|_| rng.uniform(-bound, bound)).collect();
            weights.push(Tensor::from_vec(&shape, data)?);
            biases.push(Tensor::zeros(&[spec.bias_len()])?);
        }
        Ok(Self {
            layers,
            weights: WeightSet::new(weights),
            biases,
        })
    }

    pub fn from_parts(layers: Vec<LayerSpec>, weights: WeightSet, biases: Vec<Tensor>) -> Result<Self> {
        validate_layers(&layers)?;
        if weights.len() != layers.len() || biases.len() != layers.len() {
            return Err(Error::LayerCountMismatch {
                expected: layers.len(),
                found: weights.len().min(biases.len()),
            });
        }
        for ((spec, w), b) in layers.iter().zip(weights.layers()).zip(&biases) {
            if w.shape() != spec.weight_shape().as_slice() {
                return Err(Error::ShapeMismatch {
                    expected: spec.weight_shape(),
                    found: w.shape().to_vec(),
                });
            }
            if b.shape() != [spec.bias_len()] {
                return Err(Error::ShapeMismatch {
                    expected: vec![spec.bias_len()],
                    found: b.shape().to_vec(),
                });
            }
        }
        Ok(Self {
            layers,
            weights,
            biases,
        })
    }

    pub fn layers(&self) -> &[LayerSpec] {
        &self.layers
    }

    pub fn weights(&self) -> &WeightSet {
        &self.weights
    }

    pub fn weights_mut(&mut self) -> &mut WeightSet {
        &mut self.weights
    }

    /// Replaces the weights; shapes must match the current ones.
    pub fn set_weights(&mut self, weights: WeightSet) -> Result<()> {
        self.weights.check_parallel(&weights)?;
        self.weights = weights;
        Ok(())
    }

    pub fn biases(&self) -> &[Tensor] {
        &self.biases
    }

    pub fn biases_mut(&mut self) -> &mut [Tensor] {
        &mut self.biases
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].input_dim
    }

    pub fn num_outputs(&self) -> usize {
        self.layers[self.layers.len() - 1].output_dim
    }

    fn check_batch(&self, batch: &Batch) -> Result<()> {
        if batch.input_dim() != self.input_dim() {
            return Err(Error::DimensionMismatch(format!(
                "batch has {} features, network expects {}",
                batch.input_dim(),
                self.input_dim()
            )));
        }
        if batch.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let classes = self.num_outputs();
        if let Some(&bad) = batch.labels.iter().find(|&&l| l >= classes) {
            return Err(Error::DimensionMismatch(format!(
                "label {bad} outside [0, {classes})"
            )));
        }
        Ok(())
    }

    /// Logits for every row, `batch_size × num_outputs`, without computing a loss.
    pub fn predict(&self, inputs: &Tensor) -> Result<Tensor> {
        if inputs.shape().len() != 2 || inputs.shape()[1] != self.input_dim() {
            return Err(Error::DimensionMismatch(format!(
                "inputs of shape {:?} do not match network input {}",
                inputs.shape(),
                self.input_dim()
            )));
        }
        let rows = inputs.shape()[0];
        let trace = self.run(inputs.data(), rows);
        Tensor::from_vec(&[rows, self.num_outputs()], trace.into_output())
    }

    /// Logits and mean cross-entropy.
    pub fn forward(&self, batch: &Batch) -> Result<(Tensor, f64)> {
        self.check_batch(batch)?;
        let rows = batch.len();
        let trace = self.run(batch.inputs.data(), rows);
        let logits = trace.into_output();
        let loss = cross_entropy(&logits, &batch.labels, self.num_outputs());
        if !loss.is_finite() {
            return Err(Error::NonFinite("loss"));
        }
        Ok((Tensor::from_vec(&[rows, self.num_outputs()], logits)?, loss))
    }

    /// Mean cross-entropy only.
    pub fn loss(&self, batch: &Batch) -> Result<f64> {
        self.forward(batch).map(|(_, l)| l)
    }

    /// Loss and the gradient with respect to every weight and bias.
    pub fn backward(&self, batch: &Batch) -> Result<(f64, Gradients)> {
        self.check_batch(batch)?;
        let rows = batch.len();
        let trace = self.run(batch.inputs.data(), rows);
        let classes = self.num_outputs();
        let logits = &trace.post[self.layers.len() - 1];
        let loss = cross_entropy(logits, &batch.labels, classes);
        if !loss.is_finite() {
            return Err(Error::NonFinite("loss"));
        }

        // d loss / d logits = (softmax - onehot) / batch
        let mut delta = vec![0.0; rows * classes];
        for (r, row) in logits.chunks(classes).enumerate() {
            let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let sum: f64 = row.iter().map(|v| libm::exp(v - max)).sum();
            for c in 0..classes {
                let p = libm::exp(row[c] - max) / sum;
                let y = if batch.labels[r] == c { 1.0 } else { 0.0 };
                delta[r * classes + c] = (p - y) / rows as f64;
            }
        }

        let mut grad_w = Vec::with_capacity(self.layers.len());
        let mut grad_b = Vec::with_capacity(self.layers.len());
        for n in (0..self.layers.len()).rev() {
            let spec = &self.layers[n];
            if n != self.layers.len() - 1 && spec.activation == Activation::Relu {
                for (d, z) in delta.iter_mut().zip(&trace.pre[n]) {
                    if *z <= 0.0 {
                        *d = 0.0;
                    }
                }
            }
            let input = if n == 0 {
                batch.inputs.data()
            } else {
                &trace.post[n - 1]
            };
            let w = self.weights.layers()[n].data();
            let (gw, gb, dx) = match spec.kind {
                LayerKind::Dense => dense_backward(spec, w, input, &delta, rows, n > 0),
                LayerKind::Conv2d { .. } => conv_backward(spec, w, input, &delta, rows, n > 0),
            };
            grad_w.push(Tensor::from_vec(&spec.weight_shape(), gw)?);
            grad_b.push(Tensor::from_vec(&[spec.bias_len()], gb)?);
            delta = dx;
        }
        grad_w.reverse();
        grad_b.reverse();
        Ok((
            loss,
            Gradients {
                weights: WeightSet::new(grad_w),
                biases: grad_b,
            },
        ))
    }

    fn run(&self, input: &[f64], rows: usize) -> Trace {
        let last = self.layers.len() - 1;
        let mut pre = Vec::with_capacity(self.layers.len());
        let mut post: Vec<Vec<f64>> = Vec::with_capacity(self.layers.len());
        for (n, spec) in self.layers.iter().enumerate() {
            let x = if n == 0 { input } else { &post[n - 1] };
            let w = self.weights.layers()[n].data();
            let b = self.biases[n].data();
            let z = match spec.kind {
                LayerKind::Dense => dense_forward(spec, w, b, x, rows),
                LayerKind::Conv2d { .. } => conv_forward(spec, w, b, x, rows),
            };
            let a = if n != last && spec.activation == Activation::Relu {
                z.iter().map(|v| v.max(0.0)).collect()
            } else {
                z.clone()
            };
            pre.push(z);
            post.push(a);
        }
        Trace { pre, post }
    }
}

struct Trace {
    pre: Vec<Vec<f64>>,
    post: Vec<Vec<f64>>,
}

impl Trace {
    fn into_output(mut self) -> Vec<f64> {
        self.post.pop().unwrap_or_default()
    }
}

fn validate_layers(layers: &[LayerSpec]) -> Result<()> {
    if layers.is_empty() {
        return Err(invalid("layers", "network needs at least one layer"));
    }
    for (i, spec) in layers.iter().enumerate() {
        spec.validate()?;
        if i > 0 && layers[i - 1].output_dim != spec.input_dim {
            return Err(Error::DimensionMismatch(format!(
                "layer {} outputs {} values but layer {i} expects {}",
                i - 1,
                layers[i - 1].output_dim,
                spec.input_dim
            )));
        }
        if spec.activation == Activation::Softmax && i != layers.len() - 1 {
            return Err(invalid("layers", "softmax is only allowed on the output layer"));
        }
    }
    Ok(())
}

/// Mean softmax cross-entropy via a stable log-sum-exp.
fn cross_entropy(logits: &[f64], labels: &[usize], classes: usize) -> f64 {
    let total: f64 = logits
        .chunks(classes)
        .zip(labels)
        .map(|(row, &label)| {
            let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let lse = max + libm::log(row.iter().map(|v| libm::exp(v - max)).sum::<f64>());
            lse - row[label]
        })
        .sum();
    total / labels.len() as f64
}

fn dense_forward(spec: &LayerSpec, w: &[f64], b: &[f64], x: &[f64], rows: usize) -> Vec<f64> {
    let (din, dout) = (spec.input_dim, spec.output_dim);
    let mut z = vec![0.0; rows * dout];
    for r in 0..rows {
        let xr = &x[r * din..(r + 1) * din];
        for o in 0..dout {
            let wo = &w[o * din..(o + 1) * din];
            z[r * dout + o] = b[o] + wo.iter().zip(xr).map(|(a, c)| a * c).sum::<f64>();
        }
    }
    z
}

fn dense_backward(
    spec: &LayerSpec,
    w: &[f64],
    x: &[f64],
    delta: &[f64],
    rows: usize,
    need_dx: bool,
) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let (din, dout) = (spec.input_dim, spec.output_dim);
    let mut gw = vec![0.0; dout * din];
    let mut gb = vec![0.0; dout];
    let mut dx = if need_dx { vec![0.0; rows * din] } else { Vec::new() };
    for r in 0..rows {
        let xr = &x[r * din..(r + 1) * din];
        for o in 0..dout {
            let d = delta[r * dout + o];
            if d == 0.0 {
                continue;
            }
            gb[o] += d;
            let go = &mut gw[o * din..(o + 1) * din];
            for (g, xi) in go.iter_mut().zip(xr) {
                *g += d * xi;
            }
            if need_dx {
                let wo = &w[o * din..(o + 1) * din];
                for (dxi, wi) in dx[r * din..(r + 1) * din].iter_mut().zip(wo) {
                    *dxi += d * wi;
                }
            }
        }
    }
    (gw, gb, dx)
}

fn conv_dims(spec: &LayerSpec) -> (usize, usize, usize, usize, usize, usize, usize) {
    match spec.kind {
        LayerKind::Conv2d {
            in_channels,
            out_channels,
            height,
            width,
            kernel,
        } => (
            in_channels,
            out_channels,
            height,
            width,
            kernel,
            height + 1 - kernel,
            width + 1 - kernel,
        ),
        LayerKind::Dense => unreachable!("conv_dims on a dense layer"),
    }
}

fn conv_forward(spec: &LayerSpec, w: &[f64], b: &[f64], x: &[f64], rows: usize) -> Vec<f64> {
    let (ic, oc, h, wd, k, oh, ow) = conv_dims(spec);
    let mut z = vec![0.0; rows * spec.output_dim];
    for r in 0..rows {
        let xr = &x[r * spec.input_dim..(r + 1) * spec.input_dim];
        let zr = &mut z[r * spec.output_dim..(r + 1) * spec.output_dim];
        for o in 0..oc {
            for i in 0..oh {
                for j in 0..ow {
                    let mut acc = b[o];
                    for c in 0..ic {
                        for u in 0..k {
                            let wrow = &w[((o * ic + c) * k + u) * k..][..k];
                            let xrow = &xr[(c * h + i + u) * wd + j..][..k];
                            acc += wrow.iter().zip(xrow).map(|(a, c)| a * c).sum::<f64>();
                        }
                    }
                    zr[(o * oh + i) * ow + j] = acc;
                }
            }
        }
    }
    z
}

fn conv_backward(
    spec: &LayerSpec,
    w: &[f64],
    x: &[f64],
    delta: &[f64],
    rows: usize,
    need_dx: bool,
) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let (ic, oc, h, wd, k, oh, ow) = conv_dims(spec);
    let mut gw = vec![0.0; oc * ic * k * k];
    let mut gb = vec![0.0; oc];
    let mut dx = if need_dx {
        vec![0.0; rows * spec.input_dim]
    } else {
        Vec::new()
    };
    for r in 0..rows {
        let xr = &x[r * spec.input_dim..(r + 1) * spec.input_dim];
        let dr = &delta[r * spec.output_dim..(r + 1) * spec.output_dim];
        for o in 0..oc {
            for i in 0..oh {
                for j in 0..ow {
                    let d = dr[(o * oh + i) * ow + j];
                    if d == 0.0 {
                        continue;
                    }
                    gb[o] += d;
                    for c in 0..ic {
                        for u in 0..k {
                            let base_w = ((o * ic + c) * k + u) * k;
                            let base_x = (c * h + i + u) * wd + j;
                            for v in 0..k {
                                gw[base_w + v] += d * xr[base_x + v];
                                if need_dx {
                                    dx[r * spec.input_dim + base_x + v] += d * w[base_w + v];
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    (gw, gb, dx)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OptimizerKind {
    Sgd,
    Adam,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimizerConfig {
    pub kind: OptimizerKind,
    pub learning_rate: f64,
    pub batch_size: usize,
}

impl OptimizerConfig {
    pub fn new(kind: OptimizerKind, learning_rate: f64, batch_size: usize) -> Result<Self> {
        let cfg = Self {
            kind,
            learning_rate,
            batch_size,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(invalid("learning_rate", "must be a finite nonnegative number"));
        }
        if self.batch_size == 0 {
            return Err(invalid("batch_size", "must be positive"));
        }
        Ok(())
    }
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            kind: OptimizerKind::Adam,
            learning_rate: 0.01,
            batch_size: 128,
        }
    }
}

const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
struct AdamMoments {
    t: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

/// First-order optimizer with per-tensor Adam moments (weights then biases).
#[derive(Debug, Clone, PartialEq)]
pub struct Optimizer {
    config: OptimizerConfig,
    adam: Option<AdamMoments>,
}

impl Optimizer {
    pub fn new(config: OptimizerConfig) -> Self {
        Self { config, adam: None }
    }

    pub fn config(&self) -> &OptimizerConfig {
        &self.config
    }

    /// Applies one update in place.
    pub fn step(&mut self, net: &mut Network, grad: &Gradients) -> Result<()> {
        net.weights.check_parallel(&grad.weights)?;
        let lr = self.config.learning_rate;
        let params = net
            .weights
            .layers_mut()
            .iter_mut()
            .chain(net.biases.iter_mut());
        let grads = grad.weights.layers().iter().chain(&grad.biases);
        match self.config.kind {
            OptimizerKind::Sgd => {
                for (p, g) in params.zip(grads) {
                    p.same_shape(g)?;
                    for (pi, gi) in p.data_mut().iter_mut().zip(g.data()) {
                        *pi -= lr * gi;
                    }
                }
            }
            OptimizerKind::Adam => {
                let state = self.adam.get_or_insert_with(|| AdamMoments {
                    t: 0,
                    m: Vec::new(),
                    v: Vec::new(),
                });
                if state.m.is_empty() {
                    for g in grad.weights.layers().iter().chain(&grad.biases) {
                        state.m.push(vec![0.0; g.len()]);
                        state.v.push(vec![0.0; g.len()]);
                    }
                }
                state.t += 1;
                let bc1 = 1.0 - libm::pow(ADAM_BETA1, state.t as f64);
                let bc2 = 1.0 - libm::pow(ADAM_BETA2, state.t as f64);
                for ((p, g), (m, v)) in params
                    .zip(grads)
                    .zip(state.m.iter_mut().zip(state.v.iter_mut()))
                {
                    p.same_shape(g)?;
                    for (((pi, gi), mi), vi) in p
                        .data_mut()
                        .iter_mut()
                        .zip(g.data())
                        .zip(m.iter_mut())
                        .zip(v.iter_mut())
                    {
                        *mi = ADAM_BETA1 * *mi + (1.0 - ADAM_BETA1) * gi;
                        *vi = ADAM_BETA2 * *vi + (1.0 - ADAM_BETA2) * gi * gi;
                        let mhat = *mi / bc1;
                        let vhat = *vi / bc2;
                        *pi -= lr * mhat / (libm::sqrt(vhat) + ADAM_EPS);
                    }
                }
            }
        }
        if net.weights.layers().iter().all(Tensor::is_all_finite)
            && net.biases.iter().all(Tensor::is_all_finite)
        {
            Ok(())
        } else {
            Err(Error::NonFinite("network parameters after optimizer step"))
        }
    }
}

/// One optimizer update; convenience wrapper around [`Optimizer::step`].
pub fn sgd_step(net: &mut Network, grad: &Gradients, optimizer: &mut Optimizer) -> Result<()> {
    optimizer.step(net, grad)
}

/// Fraction of rows whose argmax logit equals the label. Ties resolve to
/// the lowest class index.
pub fn accuracy(net: &Network, batch: &Batch) -> Result<f64> {
    if batch.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let logits = net.predict(&batch.inputs)?;
    let classes = net.num_outputs();
    let correct = logits
        .data()
        .chunks(classes)
        .zip(&batch.labels)
        .filter(|(row, &label)| argmax(row) == label)
        .count();
    Ok(correct as f64 / batch.len() as f64)
}

fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in row.iter().enumerate() {
        if *v > row[best] {
            best = i;
        }
    }
    best
}
