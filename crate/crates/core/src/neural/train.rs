//! Training of [`SelectorModel`]: per-frame losses with hand-written
//! gradients, minibatch optimization, and the loss curve.
//!
//! The per-frame objective is
//! `selection_weight * L_sel + affinity_weight * L_aff`, where `L_sel` is the
//! squared threshold error (frame mode) or the mean binary cross-entropy over
//! detections (instance mode), and `L_aff` is the mean binary cross-entropy
//! of the edge head against the ground-truth correspondence matrix. Both
//! heads share the encoder.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::affinity::{edge_backward, edge_forward};
use super::{l2_grad, l2_loss, maxpool_set, sigmoid_bce, Optimizer, OptimizerKind, Trace};
use crate::error::{Error, Result};
use crate::selection::{SelectorMode, SelectorModel};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub optimizer: OptimizerKind,
    pub seed: u64,
    pub selection_weight: f64,
    pub affinity_weight: f64,
    /// Extra weight on the true-positive term of the instance loss; values
    /// above 1 trade FP removal for recall.
    pub positive_weight: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-3,
            batch_size: 32,
            epochs: 200,
            optimizer: OptimizerKind::Sgd,
            seed: 0,
            selection_weight: 1.0,
            affinity_weight: 1.0,
            positive_weight: 10.0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate >= 0.0) || !self.learning_rate.is_finite() {
            return Err(Error::Config(format!(
                "learning rate must be finite and non-negative, got {}",
                self.learning_rate
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch size must be positive".into()));
        }
        if self.selection_weight < 0.0 || self.affinity_weight < 0.0 || !(self.positive_weight > 0.0) {
            return Err(Error::Config(
                "loss weights must be non-negative and positive_weight positive".into(),
            ));
        }
        Ok(())
    }
}

/// Supervision for one frame, with encoder inputs already built.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingSample {
    pub detections: Vec<Vec<f64>>,
    pub tracklets: Vec<Vec<f64>>,
    /// Oracle threshold (frame mode); `None` for frames without true positives.
    pub tau: Option<f64>,
    /// Per-detection true-positiveness targets (instance mode).
    pub lambda: Vec<f64>,
    /// Ground-truth correspondence, row-major `tracklets x detections`.
    pub affinity: Option<Vec<f64>>,
}

impl TrainingSample {
    /// Whether the sample carries any loss for a model in `mode`.
    pub fn usable(&self, mode: SelectorMode) -> bool {
        match mode {
            SelectorMode::Frame => self.tau.is_some() && !(self.detections.is_empty() && self.tracklets.is_empty()),
            SelectorMode::Instance => !self.detections.is_empty(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    /// Mean per-sample loss of each epoch.
    pub loss_curve: Vec<f64>,
}

impl TrainReport {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("epoch,loss\n");
        for (e, l) in self.loss_curve.iter().enumerate() {
            s.push_str(&format!("{},{:.9}\n", e + 1, l));
        }
        s
    }

    pub fn final_loss(&self) -> Option<f64> {
        self.loss_curve.last().copied()
    }
}

/// Loss of one sample without gradients.
pub fn sample_loss(model: &SelectorModel, sample: &TrainingSample, cfg: &TrainConfig) -> f64 {
    evaluate(model, sample, cfg, None)
}

/// Loss of one sample and its gradient with respect to
/// [`SelectorModel::flat_params`].
pub fn loss_and_grad(model: &SelectorModel, sample: &TrainingSample, cfg: &TrainConfig) -> (f64, Vec<f64>) {
    let mut grad = vec![0.0; model.num_params()];
    let loss = evaluate(model, sample, cfg, Some(&mut grad));
    (loss, grad)
}

fn evaluate(model: &SelectorModel, sample: &TrainingSample, cfg: &TrainConfig, grad: Option<&mut [f64]>) -> f64 {
    let enc_n = model.encoder.num_params();
    let head_n = model.head.num_params();
    let det_traces: Vec<Trace> = sample
        .detections
        .iter()
        .map(|x| model.encoder.forward_trace(x).expect("encoder input length"))
        .collect();
    let trk_traces: Vec<Trace> = sample
        .tracklets
        .iter()
        .map(|x| model.encoder.forward_trace(x).expect("encoder input length"))
        .collect();
    let det_f: Vec<Vec<f64>> = det_traces.iter().map(|t| t.output().to_vec()).collect();
    let trk_f: Vec<Vec<f64>> = trk_traces.iter().map(|t| t.output().to_vec()).collect();
    let flen = model.feature_len();

    let want_grad = grad.is_some();
    let mut d_det = vec![vec![0.0; flen]; det_f.len()];
    let mut d_trk = vec![vec![0.0; flen]; trk_f.len()];
    let mut g_head = vec![0.0; if want_grad { head_n } else { 0 }];
    let mut g_edge = vec![
        0.0;
        if want_grad {
            model.edge.as_ref().map_or(0, |e| e.num_params())
        } else {
            0
        }
    ];
    let mut total = 0.0;

    if cfg.selection_weight > 0.0 {
        match model.mode {
            SelectorMode::Frame => {
                if let Some(target) = sample.tau {
                    let all: Vec<&Vec<f64>> = det_f.iter().chain(trk_f.iter()).collect();
                    if !all.is_empty() {
                        let (pooled, arg) = maxpool_set(&all).expect("non-empty");
                        let trace = model.head.forward_trace(&pooled).expect("head input length");
                        let pred = trace.output()[0];
                        total += cfg.selection_weight * l2_loss(pred, target);
                        if want_grad {
                            let g = cfg.selection_weight * l2_grad(pred, target);
                            let dp = model.head.backward(&trace, &[g], &mut g_head);
                            let nd = det_f.len();
                            for (k, &src) in arg.iter().enumerate() {
                                if src < nd {
                                    d_det[src][k] += dp[k];
                                } else {
                                    d_trk[src - nd][k] += dp[k];
                                }
                            }
                        }
                    }
                }
            }
            SelectorMode::Instance => {
                let n = det_f.len();
                if n > 0 {
                    let (ctx, arg) = if trk_f.is_empty() {
                        (vec![0.0; flen], Vec::new())
                    } else {
                        maxpool_set(&trk_f).expect("non-empty")
                    };
                    let mut d_ctx = vec![0.0; flen];
                    let scale = cfg.selection_weight / n as f64;
                    for (j, f) in det_f.iter().enumerate() {
                        let mut x = f.clone();
                        x.extend_from_slice(&ctx);
                        let trace = model.head.forward_trace(&x).expect("head input length");
                        let (_, loss, dlogit) = sigmoid_bce(trace.output()[0], sample.lambda[j]);
                        let w = if sample.lambda[j] > 0.5 {
                            scale * cfg.positive_weight
                        } else {
                            scale
                        };
                        total += w * loss;
                        if want_grad {
                            let dx = model.head.backward(&trace, &[w * dlogit], &mut g_head);
                            for k in 0..flen {
                                d_det[j][k] += dx[k];
                                d_ctx[k] += dx[flen + k];
                            }
                        }
                    }
                    if want_grad {
                        for (k, &src) in arg.iter().enumerate() {
                            d_trk[src][k] += d_ctx[k];
                        }
                    }
                }
            }
        }
    }

    if cfg.affinity_weight > 0.0 {
        if let (Some(edge), Some(target)) = (&model.edge, &sample.affinity) {
            let (m, n) = (trk_f.len(), det_f.len());
            if m > 0 && n > 0 {
                let trace = edge_forward(edge, &trk_f, &det_f);
                let scale = cfg.affinity_weight / (m * n) as f64;
                let mut g_logits = vec![0.0; m * n];
                for k in 0..m * n {
                    let (_, loss, dl) = sigmoid_bce(trace.logits[k], target[k]);
                    total += scale * loss;
                    g_logits[k] = scale * dl;
                }
                if want_grad {
                    let (dt, dd) = edge_backward(edge, &trace, &g_logits, &mut g_edge);
                    for (acc, g) in d_trk.iter_mut().zip(dt) {
                        acc.iter_mut().zip(g).for_each(|(a, b)| *a += b);
                    }
                    for (acc, g) in d_det.iter_mut().zip(dd) {
                        acc.iter_mut().zip(g).for_each(|(a, b)| *a += b);
                    }
                }
            }
        }
    }

    if let Some(grad) = grad {
        let (g_enc, rest) = grad.split_at_mut(enc_n);
        for (trace, d) in det_traces.iter().zip(&d_det).chain(trk_traces.iter().zip(&d_trk)) {
            if d.iter().any(|&v| v != 0.0) {
                model.encoder.backward(trace, d, g_enc);
            }
        }
        let (gh, ge) = rest.split_at_mut(head_n);
        gh.iter_mut().zip(&g_head).for_each(|(a, b)| *a += b);
        ge.iter_mut().zip(&g_edge).for_each(|(a, b)| *a += b);
    }
    total
}

/// Minibatch training. Sample order is reshuffled every epoch from
/// `cfg.seed`; the batch gradient is the mean of per-sample gradients,
/// accumulated in sample order.
pub fn train(model: &mut SelectorModel, data: &[TrainingSample], cfg: &TrainConfig) -> Result<TrainReport> {
    cfg.validate()?;
    let usable: Vec<&TrainingSample> = data.iter().filter(|s| s.usable(model.mode)).collect();
    if usable.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut params = model.flat_params();
    let mut opt = Optimizer::new(cfg.optimizer, cfg.learning_rate, params.len());
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..usable.len()).collect();
    let mut curve = Vec::with_capacity(cfg.epochs);
    let mut batch_grad = vec![0.0; params.len()];

    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            batch_grad.iter_mut().for_each(|g| *g = 0.0);
            for &i in batch {
                let (loss, g) = loss_and_grad(model, usable[i], cfg);
                epoch_loss += loss;
                batch_grad.iter_mut().zip(&g).for_each(|(a, b)| *a += b);
            }
            let inv = 1.0 / batch.len() as f64;
            batch_grad.iter_mut().for_each(|g| *g *= inv);
            opt.step(&mut params, &batch_grad);
            model.set_flat_params(&params);
        }
        let mean = epoch_loss / usable.len() as f64;
        if !mean.is_finite() || params.iter().any(|p| !p.is_finite()) {
            return Err(Error::DivergenceDetected { epoch, loss: mean });
        }
        curve.push(mean);
    }
    Ok(TrainReport { loss_curve: curve })
}

/// Mean loss over a dataset under the current weights.
pub fn dataset_loss(model: &SelectorModel, data: &[TrainingSample], cfg: &TrainConfig) -> f64 {
    let usable: Vec<&TrainingSample> = data.iter().filter(|s| s.usable(model.mode)).collect();
    if usable.is_empty() {
        return 0.0;
    }
    usable.iter().map(|s| sample_loss(model, s, cfg)).sum::<f64>() / usable.len() as f64
}
