//! Minimal feed-forward network engine.
//!
//! Data flows column-wise: a batch is a matrix whose columns are samples,
//! so layer `m` receives `A_prev` of shape `in_dim × b` and produces
//! `W·A_prev + bias` of shape `out_dim × b`.
//!
//! Loss convention: the loss is the mean over the batch of the per-sample
//! loss (`½‖y − t‖²` for MSE). `LayerCapture::g` holds per-sample gradients
//! with respect to the layer pre-activation, so the weight gradient is
//! `(1/b)·G·A_prevᵀ`.

mod checkpoint;

pub use checkpoint::{read_checkpoint, write_checkpoint, CHECKPOINT_MAGIC};

use crate::error::{Error, Result};
use crate::linalg::{matmul, matmul_transpose_b, mean_columns, scale, transpose, Matrix, Vector};
use crate::rng::Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Identity,
    Relu,
    Tanh,
    Sigmoid,
}

impl Activation {
    pub fn tag(self) -> u8 {
        match self {
            Activation::Identity => 0,
            Activation::Relu => 1,
            Activation::Tanh => 2,
            Activation::Sigmoid => 3,
        }
    }

    pub fn from_tag(tag: u8) -> Option<Self> {
        Some(match tag {
            0 => Activation::Identity,
            1 => Activation::Relu,
            2 => Activation::Tanh,
            3 => Activation::Sigmoid,
            _ => return None,
        })
    }

    pub fn parse(name: &str) -> Option<Self> {
        Some(match name {
            "identity" | "linear" => Activation::Identity,
            "relu" => Activation::Relu,
            "tanh" => Activation::Tanh,
            "sigmoid" => Activation::Sigmoid,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Activation::Identity => "identity",
            Activation::Relu => "relu",
            Activation::Tanh => "tanh",
            Activation::Sigmoid => "sigmoid",
        }
    }

    #[inline]
    pub fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Identity => z,
            Activation::Relu => z.max(0.0),
            Activation::Tanh => z.tanh(),
            Activation::Sigmoid => 1.0 / (1.0 + (-z).exp()),
        }
    }

    /// Derivative expressed through the pre-activation `z` and output `a`.
    #[inline]
    fn derivative(self, z: f64, a: f64) -> f64 {
        match self {
            Activation::Identity => 1.0,
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => 1.0 - a * a,
            Activation::Sigmoid => a * (1.0 - a),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub in_dim: usize,
    pub out_dim: usize,
    pub activation: Activation,
    pub has_bias: bool,
}

impl LayerSpec {
    pub fn new(in_dim: usize, out_dim: usize, activation: Activation, has_bias: bool) -> Self {
        LayerSpec {
            in_dim,
            out_dim,
            activation,
            has_bias,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub spec: LayerSpec,
    /// `out_dim × in_dim`.
    pub weight: Matrix,
    pub bias: Option<Vector>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    Mse,
    SoftmaxCrossEntropy,
}

impl LossKind {
    pub fn parse(name: &str) -> Option<Self> {
        Some(match name {
            "mse" => LossKind::Mse,
            "ce" | "cross_entropy" | "softmax_cross_entropy" => LossKind::SoftmaxCrossEntropy,
            _ => return None,
        })
    }
}

/// Per-layer quantities consumed by the optimizers.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerCapture {
    /// Layer input activations, `in_dim × b`.
    pub a_prev: Matrix,
    /// Per-sample loss gradients w.r.t. the pre-activation, `out_dim × b`.
    pub g: Matrix,
    /// `(1/b)·G·A_prevᵀ`, `out_dim × in_dim`.
    pub w_grad: Matrix,
    /// Mean of the columns of `G`, present when the layer has a bias.
    pub b_grad: Option<Vector>,
}

impl LayerCapture {
    pub fn batch(&self) -> usize {
        self.a_prev.cols()
    }
}

/// Activations retained by [`Network::forward`] for the backward pass.
#[derive(Debug, Clone)]
pub struct Trace {
    /// Input of each layer (`inputs[0]` is the network input).
    pub inputs: Vec<Matrix>,
    pub preacts: Vec<Matrix>,
    pub output: Matrix,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    pub layers: Vec<Layer>,
}

fn check_specs(specs: &[LayerSpec]) -> Result<()> {
    if specs.is_empty() {
        return Err(Error::InvalidArgument("network needs at least one layer".into()));
    }
    for (i, s) in specs.iter().enumerate() {
        if s.in_dim == 0 || s.out_dim == 0 {
            return Err(Error::InvalidArgument(format!("layer {i} has a zero dimension")));
        }
        if i > 0 && specs[i - 1].out_dim != s.in_dim {
            return Err(Error::dims(
                "network",
                format!(
                    "layer {} outputs {} but layer {} takes {}",
                    i - 1,
                    specs[i - 1].out_dim,
                    i,
                    s.in_dim
                ),
            ));
        }
    }
    Ok(())
}

impl Network {
    /// Weights drawn from N(0, 1/in_dim), biases zero.
    pub fn init(specs: &[LayerSpec], rng: &mut Rng) -> Result<Self> {
        check_specs(specs)?;
        let layers = specs
            .iter()
            .map(|&spec| Layer {
                spec,
                weight: Matrix::random_normal(spec.out_dim, spec.in_dim, (1.0 / spec.in_dim as f64).sqrt(), rng),
                bias: spec.has_bias.then(|| Vector::zeros(spec.out_dim)),
            })
            .collect();
        Ok(Network { layers })
    }

    /// Builds a network from explicit weights; biases default to zero.
    pub fn from_weights(specs: &[LayerSpec], weights: Vec<Matrix>) -> Result<Self> {
        check_specs(specs)?;
        if specs.len() != weights.len() {
            return Err(Error::dims("from_weights", "one weight matrix per layer"));
        }
        let mut layers = Vec::with_capacity(specs.len());
        for (spec, w) in specs.iter().zip(weights) {
            if w.shape() != (spec.out_dim, spec.in_dim) {
                return Err(Error::dims(
                    "from_weights",
                    format!("expected {}x{}", spec.out_dim, spec.in_dim),
                ));
            }
            layers.push(Layer {
                spec: *spec,
                weight: w,
                bias: spec.has_bias.then(|| Vector::zeros(spec.out_dim)),
            });
        }
        Ok(Network { layers })
    }

    pub fn specs(&self) -> Vec<LayerSpec> {
        self.layers.iter().map(|l| l.spec).collect()
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].spec.in_dim
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().map(|l| l.spec.out_dim).unwrap_or(0)
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weight.is_finite() && l.bias.as_ref().is_none_or(|b| b.is_finite()))
    }

    pub fn forward(&self, x: &Matrix) -> Result<(Matrix, Trace)> {
        if x.rows() != self.input_dim() {
            return Err(Error::dims(
                "forward",
                format!("input has {} rows, network expects {}", x.rows(), self.input_dim()),
            ));
        }
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut preacts = Vec::with_capacity(self.layers.len());
        let mut a = x.clone();
        for layer in &self.layers {
            let mut z = matmul(&layer.weight, &a)?;
            if let Some(bias) = &layer.bias {
                for i in 0..z.rows() {
                    let bi = bias.get(i);
                    for v in z.row_mut(i) {
                        *v += bi;
                    }
                }
            }
            let act = layer.spec.activation;
            let next = z.map(|v| act.apply(v));
            inputs.push(a);
            preacts.push(z);
            a = next;
        }
        let output = a.clone();
        Ok((
            a,
            Trace {
                inputs,
                preacts,
                output,
            },
        ))
    }

    pub fn predict(&self, x: &Matrix) -> Result<Matrix> {
        self.forward(x).map(|(y, _)| y)
    }

    pub fn loss(&self, x: &Matrix, targets: &Matrix, kind: LossKind) -> Result<f64> {
        let y = self.predict(x)?;
        loss_and_output_grad(&y, targets, kind).map(|(l, _)| l)
    }

    pub fn backward(&self, trace: &Trace, targets: &Matrix, kind: LossKind) -> Result<(f64, Vec<LayerCapture>)> {
        if trace.inputs.len() != self.layers.len() {
            return Err(Error::dims("backward", "trace does not match the network"));
        }
        let (loss, mut upstream) = loss_and_output_grad(&trace.output, targets, kind)?;
        let b = trace.output.cols() as f64;
        let mut captures = Vec::with_capacity(self.layers.len());
        for (m, layer) in self.layers.iter().enumerate().rev() {
            let z = &trace.preacts[m];
            let act = layer.spec.activation;
            // `upstream` holds dℓ/dA per sample; fold in the activation.
            let mut g = upstream;
            {
                let out = if m + 1 == self.layers.len() {
                    &trace.output
                } else {
                    &trace.inputs[m + 1]
                };
                for ((gv, &zv), &av) in g.as_mut_slice().iter_mut().zip(z.as_slice()).zip(out.as_slice()) {
                    *gv *= act.derivative(zv, av);
                }
            }
            let a_prev = &trace.inputs[m];
            let w_grad = scale(&matmul_transpose_b(&g, a_prev)?, 1.0 / b);
            let b_grad = layer.bias.as_ref().map(|_| mean_columns(&g));
            upstream = if m > 0 {
                matmul(&transpose(&layer.weight), &g)?
            } else {
                Matrix::zeros(1, 1)
            };
            captures.push(LayerCapture {
                a_prev: a_prev.clone(),
                g,
                w_grad,
                b_grad,
            });
        }
        captures.reverse();
        Ok((loss, captures))
    }

    /// Forward then backward on one batch.
    pub fn gradients(&self, x: &Matrix, targets: &Matrix, kind: LossKind) -> Result<(f64, Vec<LayerCapture>)> {
        let (_, trace) = self.forward(x)?;
        self.backward(&trace, targets, kind)
    }

    /// Central-difference estimate of `∂loss/∂W` for every layer weight.
    pub fn finite_difference_grad(&self, x: &Matrix, targets: &Matrix, kind: LossKind, h: f64) -> Result<Vec<Matrix>> {
        if !(h > 1e-8 && h < 1e-2) {
            return Err(Error::InvalidArgument(format!(
                "finite-difference step {h} outside (1e-8, 1e-2)"
            )));
        }
        let mut probe = self.clone();
        let mut grads = Vec::with_capacity(self.layers.len());
        for m in 0..self.layers.len() {
            let (rows, cols) = self.layers[m].weight.shape();
            let mut g = Matrix::zeros(rows, cols);
            for i in 0..rows {
                for j in 0..cols {
                    let w0 = self.layers[m].weight.get(i, j);
                    probe.layers[m].weight.set(i, j, w0 + h);
                    let lp = probe.loss(x, targets, kind)?;
                    probe.layers[m].weight.set(i, j, w0 - h);
                    let lm = probe.loss(x, targets, kind)?;
                    probe.layers[m].weight.set(i, j, w0);
                    g.set(i, j, (lp - lm) / (2.0 * h));
                }
            }
            grads.push(g);
        }
        Ok(grads)
    }
}

/// Batch-mean loss and per-sample `dℓ/dy`.
pub fn loss_and_output_grad(y: &Matrix, targets: &Matrix, kind: LossKind) -> Result<(f64, Matrix)> {
    if y.shape() != targets.shape() {
        return Err(Error::dims(
            "loss",
            format!(
                "output {}x{} vs targets {}x{}",
                y.rows(),
                y.cols(),
                targets.rows(),
                targets.cols()
            ),
        ));
    }
    let (k, b) = y.shape();
    let mut grad = Matrix::zeros(k, b);
    let mut total = 0.0;
    match kind {
        LossKind::Mse => {
            for s in 0..b {
                let mut ls = 0.0;
                for i in 0..k {
                    let r = y.get(i, s) - targets.get(i, s);
                    ls += r * r;
                    grad.set(i, s, r);
                }
                total += 0.5 * ls;
            }
        }
        LossKind::SoftmaxCrossEntropy => {
            for s in 0..b {
                let mut mx = f64::NEG_INFINITY;
                for i in 0..k {
                    mx = mx.max(y.get(i, s));
                }
                let mut sum = 0.0;
                for i in 0..k {
                    sum += (y.get(i, s) - mx).exp();
                }
                let log_z = mx + sum.ln();
                let mut ls = 0.0;
                for i in 0..k {
                    let t = targets.get(i, s);
                    let log_p = y.get(i, s) - log_z;
                    if t != 0.0 {
                        ls -= t * log_p;
                    }
                    grad.set(i, s, log_p.exp() - t);
                }
                total += ls;
            }
        }
    }
    Ok((total / b as f64, grad))
}
