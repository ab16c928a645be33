//! Small differentiable building blocks: a dense MLP with hand-written
//! backprop, set max-pooling, sigmoid, L2 and binary cross-entropy losses,
//! and SGD/Adam optimizers over flat parameter vectors.

pub mod affinity;
pub mod encoder;
pub mod train;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Probability clamp used by [`bce_loss`].
pub const BCE_EPS: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    Linear,
}

impl Activation {
    fn apply(self, v: f64) -> f64 {
        match self {
            Activation::Relu => v.max(0.0),
            Activation::Linear => v,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpSpec {
    /// Layer widths including input and output, e.g. `[128, 32, 8, 1]`.
    pub widths: Vec<usize>,
    pub hidden: Activation,
    pub output: Activation,
    pub seed: u64,
}

impl MlpSpec {
    pub fn new(widths: &[usize], seed: u64) -> Self {
        MlpSpec {
            widths: widths.to_vec(),
            hidden: Activation::Relu,
            output: Activation::Linear,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.widths.len() < 2 || self.widths.contains(&0) {
            return Err(Error::Model(format!("invalid MLP widths {:?}", self.widths)));
        }
        Ok(())
    }
}

/// Fully connected network. Parameters are stored flat, layer by layer, each
/// layer as a row-major `out x in` weight block followed by its bias.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    spec: MlpSpec,
    params: Vec<f64>,
    offsets: Vec<usize>,
}

/// Activations recorded by [`Mlp::forward_trace`] for backprop.
#[derive(Debug, Clone)]
pub struct Trace {
    /// `acts[0]` is the input; `acts[k]` the post-activation output of layer `k-1`.
    pub acts: Vec<Vec<f64>>,
}

impl Trace {
    pub fn output(&self) -> &[f64] {
        self.acts.last().expect("trace has at least the input")
    }
}

impl Mlp {
    /// Glorot-uniform weights, zero biases, seeded from `spec.seed`.
    pub fn new(spec: MlpSpec) -> Result<Self> {
        spec.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        let offsets = layer_offsets(&spec.widths);
        let mut params = Vec::with_capacity(*offsets.last().unwrap());
        for win in spec.widths.windows(2) {
            let (fan_in, fan_out) = (win[0], win[1]);
            let a = (6.0 / (fan_in + fan_out) as f64).sqrt();
            params.extend((0..fan_in * fan_out).map(|_| rng.gen_range(-a..a)));
            params.extend(std::iter::repeat_n(0.0, fan_out));
        }
        Ok(Mlp { spec, params, offsets })
    }

    pub fn zeros(spec: MlpSpec) -> Result<Self> {
        let mut m = Mlp::new(spec)?;
        m.params.iter_mut().for_each(|p| *p = 0.0);
        Ok(m)
    }

    /// Rebuilds a network from explicit parameters.
    pub fn from_params(spec: MlpSpec, params: Vec<f64>) -> Result<Self> {
        spec.validate()?;
        let offsets = layer_offsets(&spec.widths);
        let expected = *offsets.last().unwrap();
        if params.len() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                got: params.len(),
            });
        }
        Ok(Mlp { spec, params, offsets })
    }

    pub fn spec(&self) -> &MlpSpec {
        &self.spec
    }

    pub fn widths(&self) -> &[usize] {
        &self.spec.widths
    }

    pub fn input_len(&self) -> usize {
        self.spec.widths[0]
    }

    pub fn output_len(&self) -> usize {
        *self.spec.widths.last().unwrap()
    }

    pub fn num_layers(&self) -> usize {
        self.spec.widths.len() - 1
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    /// `(weights, bias)` of layer `k`.
    pub fn layer(&self, k: usize) -> (&[f64], &[f64]) {
        let (i, o) = (self.spec.widths[k], self.spec.widths[k + 1]);
        let start = self.offsets[k];
        let w = &self.params[start..start + i * o];
        let b = &self.params[start + i * o..start + i * o + o];
        (w, b)
    }

    /// Parameter range of layer `k` inside [`Mlp::params`].
    pub fn layer_range(&self, k: usize) -> std::ops::Range<usize> {
        self.offsets[k]..self.offsets[k + 1]
    }

    fn activation(&self, k: usize) -> Activation {
        if k + 1 == self.num_layers() {
            self.spec.output
        } else {
            self.spec.hidden
        }
    }

    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        Ok(self.forward_trace(input)?.acts.pop().unwrap())
    }

    pub fn forward_trace(&self, input: &[f64]) -> Result<Trace> {
        if input.len() != self.input_len() {
            return Err(Error::DimensionMismatch {
                expected: self.input_len(),
                got: input.len(),
            });
        }
        let mut acts = Vec::with_capacity(self.num_layers() + 1);
        acts.push(input.to_vec());
        for k in 0..self.num_layers() {
            let out = self.layer_forward(k, acts.last().unwrap());
            acts.push(out);
        }
        Ok(Trace { acts })
    }

    fn layer_forward(&self, k: usize, x: &[f64]) -> Vec<f64> {
        let (w, b) = self.layer(k);
        let act = self.activation(k);
        let n_in = x.len();
        b.iter()
            .enumerate()
            .map(|(o, &bias)| {
                let row = &w[o * n_in..(o + 1) * n_in];
                act.apply(bias + dot(row, x))
            })
            .collect()
    }

    /// Backpropagates `grad_out` through a recorded forward pass, adding the
    /// parameter gradient into `grad` (same layout as [`Mlp::params`]) and
    /// returning the gradient with respect to the input.
    pub fn backward(&self, trace: &Trace, grad_out: &[f64], grad: &mut [f64]) -> Vec<f64> {
        debug_assert_eq!(grad.len(), self.params.len());
        let mut g = grad_out.to_vec();
        for k in (0..self.num_layers()).rev() {
            let x = &trace.acts[k];
            let y = &trace.acts[k + 1];
            if self.activation(k) == Activation::Relu {
                for (gi, yi) in g.iter_mut().zip(y) {
                    if *yi <= 0.0 {
                        *gi = 0.0;
                    }
                }
            }
            let n_in = x.len();
            let (w, _) = self.layer(k);
            let start = self.offsets[k];
            let (gw, gb) = grad[start..self.offsets[k + 1]].split_at_mut(n_in * g.len());
            let mut gx = vec![0.0; n_in];
            for (o, &go) in g.iter().enumerate() {
                if go == 0.0 {
                    continue;
                }
                gb[o] += go;
                let row = &w[o * n_in..(o + 1) * n_in];
                let grow = &mut gw[o * n_in..(o + 1) * n_in];
                for i in 0..n_in {
                    grow[i] += go * x[i];
                    gx[i] += go * row[i];
                }
            }
            g = gx;
        }
        g
    }
}

fn layer_offsets(widths: &[usize]) -> Vec<usize> {
    let mut offsets = vec![0];
    for win in widths.windows(2) {
        let last = *offsets.last().unwrap();
        offsets.push(last + win[0] * win[1] + win[1]);
    }
    offsets
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Convenience wrapper over [`Mlp::forward`].
pub fn mlp_forward(mlp: &Mlp, input: &[f64]) -> Result<Vec<f64>> {
    mlp.forward(input)
}

/// Elementwise maximum over a non-empty set of equal-length vectors, plus
/// the index of the winning vector per element (lowest index on ties).
pub fn maxpool_set<V: AsRef<[f64]>>(vectors: &[V]) -> Result<(Vec<f64>, Vec<usize>)> {
    let first = vectors.first().ok_or(Error::EmptySet)?.as_ref();
    let mut out = first.to_vec();
    let mut arg = vec![0usize; out.len()];
    for (idx, v) in vectors.iter().enumerate().skip(1) {
        let v = v.as_ref();
        if v.len() != out.len() {
            return Err(Error::DimensionMismatch {
                expected: out.len(),
                got: v.len(),
            });
        }
        for (k, &x) in v.iter().enumerate() {
            if x > out[k] {
                out[k] = x;
                arg[k] = idx;
            }
        }
    }
    Ok((out, arg))
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

pub fn l2_loss(pred: f64, target: f64) -> f64 {
    (pred - target).powi(2)
}

pub fn l2_grad(pred: f64, target: f64) -> f64 {
    2.0 * (pred - target)
}

pub fn bce_loss(pred: f64, target: f64) -> f64 {
    let p = pred.clamp(BCE_EPS, 1.0 - BCE_EPS);
    -(target * p.ln() + (1.0 - target) * (1.0 - p).ln())
}

/// Derivative of [`bce_loss`] with respect to `pred`; zero where the clamp is active.
pub fn bce_grad(pred: f64, target: f64) -> f64 {
    if !(BCE_EPS..=1.0 - BCE_EPS).contains(&pred) {
        return 0.0;
    }
    -target / pred + (1.0 - target) / (1.0 - pred)
}

/// BCE applied to `sigmoid(logit)`: returns `(probability, loss, d loss / d logit)`.
pub fn sigmoid_bce(logit: f64, target: f64) -> (f64, f64, f64) {
    let p = sigmoid(logit);
    let loss = bce_loss(p, target);
    let g = bce_grad(p, target) * p * (1.0 - p);
    (p, loss, g)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    Sgd,
    Adam,
}

/// First-order optimizer over one flat parameter vector.
#[derive(Debug, Clone)]
pub enum Optimizer {
    Sgd {
        lr: f64,
    },
    Adam {
        lr: f64,
        beta1: f64,
        beta2: f64,
        eps: f64,
        t: i32,
        m: Vec<f64>,
        v: Vec<f64>,
    },
}

impl Optimizer {
    pub fn new(kind: OptimizerKind, lr: f64, num_params: usize) -> Self {
        match kind {
            OptimizerKind::Sgd => Optimizer::Sgd { lr },
            OptimizerKind::Adam => Optimizer::Adam {
                lr,
                beta1: 0.9,
                beta2: 0.999,
                eps: 1e-8,
                t: 0,
                m: vec![0.0; num_params],
                v: vec![0.0; num_params],
            },
        }
    }

    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        match self {
            Optimizer::Sgd { lr } => {
                for (p, g) in params.iter_mut().zip(grad) {
                    *p -= *lr * g;
                }
            }
            Optimizer::Adam {
                lr,
                beta1,
                beta2,
                eps,
                t,
                m,
                v,
            } => {
                *t += 1;
                let c1 = 1.0 - beta1.powi(*t);
                let c2 = 1.0 - beta2.powi(*t);
                for i in 0..params.len() {
                    let g = grad[i];
                    m[i] = *beta1 * m[i] + (1.0 - *beta1) * g;
                    v[i] = *beta2 * v[i] + (1.0 - *beta2) * g * g;
                    let mh = m[i] / c1;
                    let vh = v[i] / c2;
                    params[i] -= *lr * mh / (vh.sqrt() + *eps);
                }
            }
        }
    }
}
