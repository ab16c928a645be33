//! Detection selection: ground-truth threshold construction, the strict
//! score and probability filters, and the learned selector model (frame-level
//! threshold regression or instance-level true-positiveness).

use serde::{Deserialize, Serialize};

use crate::assignment::{match_tp_fp, MatchCriterion, TpFpLabels};
use crate::detection::Detection;
use crate::error::{Error, Result};
use crate::geometry::Box3D;
use crate::neural::affinity::edge_forward;
use crate::neural::encoder::{self, ScoredBox};
use crate::neural::{maxpool_set, sigmoid, Activation, Mlp, MlpSpec};

/// Current model file format version.
pub const MODEL_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SelectorConfig {
    /// Margin kept below the weakest true positive, in score units.
    pub s_buff: f64,
    /// Upper bound of the ground-truth threshold, in score units.
    pub s_upper: f64,
    /// Probability cutoff of instance-level selection.
    pub lambda_thres: f64,
    /// IoU needed for a detection to count as a true positive.
    pub iou_min: f64,
}

impl Default for SelectorConfig {
    fn default() -> Self {
        SelectorConfig {
            s_buff: 3.0,
            s_upper: 3.0,
            lambda_thres: 0.1,
            iou_min: 0.25,
        }
    }
}

impl SelectorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.s_buff >= 0.0) || !self.s_buff.is_finite() {
            return Err(Error::Config(format!("s_buff must be >= 0, got {}", self.s_buff)));
        }
        if !self.s_upper.is_finite() {
            return Err(Error::Config("s_upper must be finite".into()));
        }
        if !(self.lambda_thres >= 0.0 && self.lambda_thres < 1.0) {
            return Err(Error::Config(format!(
                "lambda_thres must lie in [0, 1), got {}",
                self.lambda_thres
            )));
        }
        if !(self.iou_min > 0.0 && self.iou_min <= 1.0) {
            return Err(Error::Config(format!(
                "iou_min must lie in (0, 1], got {}",
                self.iou_min
            )));
        }
        Ok(())
    }

    pub fn criterion(&self) -> MatchCriterion {
        MatchCriterion::Iou3d(self.iou_min)
    }
}

/// Scores of one frame split by TP/FP label.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ScoreSplit {
    pub tp: Vec<f64>,
    pub fp: Vec<f64>,
}

impl ScoreSplit {
    pub fn from_labels(dets: &[Detection], labels: &TpFpLabels) -> Self {
        let mut split = ScoreSplit::default();
        for (d, &tp) in dets.iter().zip(&labels.is_tp) {
            if tp {
                split.tp.push(d.score);
            } else {
                split.fp.push(d.score);
            }
        }
        split
    }
}

/// Oracle threshold `min(min(S_TP) - s_buff, s_upper)`.
pub fn gt_threshold(split: &ScoreSplit, cfg: &SelectorConfig) -> Result<f64> {
    if cfg.s_buff < 0.0 {
        return Err(Error::Config(format!("s_buff must be >= 0, got {}", cfg.s_buff)));
    }
    let min_tp = split.tp.iter().copied().fold(f64::INFINITY, f64::min);
    if split.tp.is_empty() {
        return Err(Error::EmptyTp);
    }
    Ok((min_tp - cfg.s_buff).min(cfg.s_upper))
}

/// [`gt_threshold`], falling back to `s_upper` for frames without true positives.
pub fn gt_threshold_or_fallback(split: &ScoreSplit, cfg: &SelectorConfig) -> f64 {
    match gt_threshold(split, cfg) {
        Ok(t) => t,
        Err(_) => cfg.s_upper,
    }
}

/// Per-detection targets: 1 for true positives, 0 otherwise.
pub fn gt_instance_labels(dets: &[Detection], gts: &[Box3D], cfg: &SelectorConfig) -> Vec<f64> {
    let boxes: Vec<Box3D> = dets.iter().map(|d| d.bbox).collect();
    let labels = match_tp_fp(&boxes, gts, cfg.criterion());
    labels.is_tp.iter().map(|&t| if t { 1.0 } else { 0.0 }).collect()
}

/// Keeps detections scoring strictly above `tau`, in input order.
pub fn high_pass_filter(dets: &[Detection], tau: f64) -> Vec<Detection> {
    dets.iter().filter(|d| d.score > tau).copied().collect()
}

/// Keep mask of [`high_pass_filter`].
pub fn high_pass_mask(dets: &[Detection], tau: f64) -> Vec<bool> {
    dets.iter().map(|d| d.score > tau).collect()
}

/// Keeps detections whose probability is strictly above `cfg.lambda_thres`.
pub fn select_instances(dets: &[Detection], probs: &[f64], cfg: &SelectorConfig) -> Result<Vec<Detection>> {
    if probs.len() != dets.len() {
        return Err(Error::LengthMismatch {
            expected: dets.len(),
            got: probs.len(),
        });
    }
    Ok(dets
        .iter()
        .zip(probs)
        .filter(|(_, &p)| p > cfg.lambda_thres)
        .map(|(d, _)| *d)
        .collect())
}

/// Outcome of applying a selector to one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct SelectionDecision {
    pub keep: Vec<bool>,
    pub kind: DecisionKind,
}

#[derive(Debug, Clone, PartialEq)]
pub enum DecisionKind {
    /// Nothing was filtered.
    PassThrough,
    /// One threshold for the whole frame.
    Threshold(f64),
    /// Per-detection true-positiveness.
    Probabilities(Vec<f64>),
}

impl SelectionDecision {
    pub fn pass_through(n: usize) -> Self {
        SelectionDecision {
            keep: vec![true; n],
            kind: DecisionKind::PassThrough,
        }
    }

    pub fn threshold(dets: &[Detection], tau: f64) -> Self {
        SelectionDecision {
            keep: high_pass_mask(dets, tau),
            kind: DecisionKind::Threshold(tau),
        }
    }

    pub fn probabilities(probs: Vec<f64>, lambda_thres: f64) -> Self {
        SelectionDecision {
            keep: probs.iter().map(|&p| p > lambda_thres).collect(),
            kind: DecisionKind::Probabilities(probs),
        }
    }

    /// The value the decision for detection `i` was based on.
    pub fn value_for(&self, i: usize) -> Option<f64> {
        match &self.kind {
            DecisionKind::PassThrough => None,
            DecisionKind::Threshold(t) => Some(*t),
            DecisionKind::Probabilities(p) => p.get(i).copied(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectorMode {
    /// Regresses one score threshold per frame.
    Frame,
    /// Estimates a true-positive probability per detection.
    Instance,
}

/// Network sizes of a [`SelectorModel`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelDims {
    pub feature_len: usize,
    pub encoder_hidden: usize,
    /// Hidden widths of the selection head.
    pub head_hidden: Vec<usize>,
    /// Hidden width of the edge MLP; `0` disables the association head.
    pub edge_hidden: usize,
    pub history_len: usize,
}

impl Default for ModelDims {
    fn default() -> Self {
        ModelDims {
            feature_len: 128,
            encoder_hidden: 64,
            head_hidden: vec![32, 8],
            edge_hidden: 32,
            history_len: 5,
        }
    }
}

impl ModelDims {
    pub fn validate(&self) -> Result<()> {
        if self.feature_len == 0 || self.encoder_hidden == 0 || self.head_hidden.contains(&0) {
            return Err(Error::Config(format!("invalid model dims {self:?}")));
        }
        Ok(())
    }
}

/// Learned selector: a shared raw-box encoder, the selection head, and an
/// optional association (edge) head trained jointly with it.
#[derive(Debug, Clone, PartialEq)]
pub struct SelectorModel {
    pub mode: SelectorMode,
    pub config: SelectorConfig,
    pub history_len: usize,
    pub encoder: Mlp,
    pub head: Mlp,
    pub edge: Option<Mlp>,
}

impl SelectorModel {
    pub fn new(mode: SelectorMode, dims: &ModelDims, config: SelectorConfig, seed: u64) -> Result<Self> {
        dims.validate()?;
        config.validate()?;
        let enc_in = encoder::input_len(dims.history_len);
        let encoder = Mlp::new(MlpSpec::new(&[enc_in, dims.encoder_hidden, dims.feature_len], seed))?;
        let head_in = match mode {
            SelectorMode::Frame => dims.feature_len,
            SelectorMode::Instance => 2 * dims.feature_len,
        };
        let mut widths = vec![head_in];
        widths.extend(&dims.head_hidden);
        widths.push(1);
        let head = Mlp::new(MlpSpec::new(&widths, seed.wrapping_add(1)))?;
        let edge = if dims.edge_hidden > 0 {
            Some(Mlp::new(MlpSpec::new(
                &[2 * dims.feature_len, dims.edge_hidden, 1],
                seed.wrapping_add(2),
            ))?)
        } else {
            None
        };
        Ok(SelectorModel {
            mode,
            config,
            history_len: dims.history_len,
            encoder,
            head,
            edge,
        })
    }

    pub fn feature_len(&self) -> usize {
        self.encoder.output_len()
    }

    pub fn dims(&self) -> ModelDims {
        let hw = self.head.widths();
        ModelDims {
            feature_len: self.feature_len(),
            encoder_hidden: self.encoder.widths()[1],
            head_hidden: hw[1..hw.len() - 1].to_vec(),
            edge_hidden: self.edge.as_ref().map_or(0, |e| e.widths()[1]),
            history_len: self.history_len,
        }
    }

    /// Encodes an object with its (most-recent-first) history.
    pub fn encode(&self, current: &ScoredBox, history: &[ScoredBox]) -> Vec<f64> {
        let input = encoder::raw_input(current, history, self.history_len);
        self.encoder.forward(&input).expect("encoder input length is fixed")
    }

    pub fn encode_detection(&self, d: &Detection) -> Vec<f64> {
        self.encode(&d.scored(), &[])
    }

    /// Frame threshold from the max-pooled features of all objects in the frame.
    pub fn frame_threshold(&self, feats: &[Vec<f64>]) -> Result<f64> {
        if self.mode != SelectorMode::Frame {
            return Err(Error::Model("frame_threshold needs a frame-mode model".into()));
        }
        let (pooled, _) = maxpool_set(feats).map_err(|_| Error::EmptyInput)?;
        Ok(self.head.forward(&pooled)?[0])
    }

    /// True-positive probability of a detection given the tracked objects.
    pub fn instance_prob(&self, det_feat: &[f64], tracklet_feats: &[Vec<f64>]) -> Result<f64> {
        if self.mode != SelectorMode::Instance {
            return Err(Error::Model("instance_prob needs an instance-mode model".into()));
        }
        let ctx = self.context(tracklet_feats)?;
        let mut x = det_feat.to_vec();
        x.extend_from_slice(&ctx);
        Ok(sigmoid(self.head.forward(&x)?[0]))
    }

    /// Max-pooled tracklet context; zeros when there are no tracklets.
    pub fn context(&self, tracklet_feats: &[Vec<f64>]) -> Result<Vec<f64>> {
        if tracklet_feats.is_empty() {
            Ok(vec![0.0; self.feature_len()])
        } else {
            Ok(maxpool_set(tracklet_feats)?.0)
        }
    }

    /// Affinity matrix (tracklets x detections) from the association head.
    pub fn affinity(&self, trk_feats: &[Vec<f64>], det_feats: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        let edge = self
            .edge
            .as_ref()
            .ok_or_else(|| Error::Model("model has no association head".into()))?;
        let n = det_feats.len();
        if trk_feats.is_empty() || n == 0 {
            return Ok(vec![Vec::new(); trk_feats.len()]);
        }
        let probs = edge_forward(edge, trk_feats, det_feats).probabilities();
        Ok(probs.chunks(n).map(<[f64]>::to_vec).collect())
    }

    pub fn num_params(&self) -> usize {
        self.encoder.num_params() + self.head.num_params() + self.edge.as_ref().map_or(0, Mlp::num_params)
    }

    /// All parameters as one vector: encoder, head, then edge head.
    pub fn flat_params(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.num_params());
        v.extend_from_slice(self.encoder.params());
        v.extend_from_slice(self.head.params());
        if let Some(e) = &self.edge {
            v.extend_from_slice(e.params());
        }
        v
    }

    pub fn set_flat_params(&mut self, flat: &[f64]) {
        assert_eq!(flat.len(), self.num_params());
        let (a, rest) = flat.split_at(self.encoder.num_params());
        let (b, c) = rest.split_at(self.head.num_params());
        self.encoder.params_mut().copy_from_slice(a);
        self.head.params_mut().copy_from_slice(b);
        if let Some(e) = &mut self.edge {
            e.params_mut().copy_from_slice(c);
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&ModelFile::from_model(self))?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: ModelFile = serde_json::from_str(text)?;
        file.into_model()
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

/// On-disk model document.
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    version: u32,
    mode: SelectorMode,
    history_len: usize,
    config: SelectorConfig,
    encoder: NetFile,
    head: NetFile,
    edge: Option<NetFile>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NetFile {
    widths: Vec<usize>,
    hidden: Activation,
    output: Activation,
    /// Per layer, row-major `out x in`.
    weights: Vec<Vec<f64>>,
    biases: Vec<Vec<f64>>,
}

impl NetFile {
    fn from_mlp(m: &Mlp) -> Self {
        let (weights, biases) = (0..m.num_layers())
            .map(|k| {
                let (w, b) = m.layer(k);
                (w.to_vec(), b.to_vec())
            })
            .unzip();
        NetFile {
            widths: m.widths().to_vec(),
            hidden: m.spec().hidden,
            output: m.spec().output,
            weights,
            biases,
        }
    }

    fn into_mlp(self) -> Result<Mlp> {
        if self.weights.len() + 1 != self.widths.len() || self.biases.len() + 1 != self.widths.len() {
            return Err(Error::Model("layer count does not match widths".into()));
        }
        let mut params = Vec::new();
        for (k, (w, b)) in self.weights.into_iter().zip(self.biases).enumerate() {
            let (i, o) = (self.widths[k], self.widths[k + 1]);
            if w.len() != i * o || b.len() != o {
                return Err(Error::Model(format!("layer {k} has wrong parameter count")));
            }
            params.extend(w);
            params.extend(b);
        }
        if params.iter().any(|p| !p.is_finite()) {
            return Err(Error::Model("non-finite weight".into()));
        }
        let spec = MlpSpec {
            widths: self.widths,
            hidden: self.hidden,
            output: self.output,
            seed: 0,
        };
        Mlp::from_params(spec, params)
    }
}

impl ModelFile {
    fn from_model(m: &SelectorModel) -> Self {
        ModelFile {
            version: MODEL_VERSION,
            mode: m.mode,
            history_len: m.history_len,
            config: m.config,
            encoder: NetFile::from_mlp(&m.encoder),
            head: NetFile::from_mlp(&m.head),
            edge: m.edge.as_ref().map(NetFile::from_mlp),
        }
    }

    fn into_model(self) -> Result<SelectorModel> {
        if self.version != MODEL_VERSION {
            return Err(Error::Model(format!("unsupported model version {}", self.version)));
        }
        self.config.validate()?;
        let encoder = self.encoder.into_mlp()?;
        let head = self.head.into_mlp()?;
        let edge = self.edge.map(NetFile::into_mlp).transpose()?;
        let f = encoder.output_len();
        if encoder.input_len() != encoder::input_len(self.history_len) {
            return Err(Error::Model("encoder input does not match history length".into()));
        }
        let head_in = match self.mode {
            SelectorMode::Frame => f,
            SelectorMode::Instance => 2 * f,
        };
        if head.input_len() != head_in || head.output_len() != 1 {
            return Err(Error::Model("head shape does not match mode".into()));
        }
        if let Some(e) = &edge {
            if e.input_len() != 2 * f || e.output_len() != 1 || e.num_layers() != 2 {
                return Err(Error::Model("edge head must be [2F, hidden, 1]".into()));
            }
        }
        Ok(SelectorModel {
            mode: self.mode,
            config: self.config,
            history_len: self.history_len,
            encoder,
            head,
            edge,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn det(score: f64) -> Detection {
        Detection::new(0, Box3D::new(0.0, 0.0, 0.0, 4.0, 1.8, 1.5, 0.0).unwrap(), score)
    }

    fn split(tp: &[f64], fp: &[f64]) -> ScoreSplit {
        ScoreSplit {
            tp: tp.to_vec(),
            fp: fp.to_vec(),
        }
    }

    #[test]
    fn threshold_weak_tps() {
        let cfg = SelectorConfig::default();
        let t = gt_threshold(&split(&[13.0, 3.5, 3.1], &[]), &cfg).unwrap();
        assert!((t - 0.1).abs() < 1e-12);
    }

    #[test]
    fn threshold_lone_confident_tp_is_capped() {
        let cfg = SelectorConfig::default();
        assert_eq!(gt_threshold(&split(&[13.0], &[]), &cfg).unwrap(), 3.0);
        // the buffered branch alone would give 10
        assert_eq!(13.0 - cfg.s_buff, 10.0);
    }

    #[test]
    fn threshold_branch_boundary() {
        let cfg = SelectorConfig {
            s_buff: 1.5,
            s_upper: 2.25,
            ..Default::default()
        };
        let t = gt_threshold(&split(&[cfg.s_upper + cfg.s_buff], &[1.0]), &cfg).unwrap();
        assert_eq!(t, cfg.s_upper);
    }

    #[test]
    fn threshold_without_tps() {
        let cfg = SelectorConfig::default();
        assert!(matches!(gt_threshold(&split(&[], &[1.0]), &cfg), Err(Error::EmptyTp)));
        assert_eq!(gt_threshold_or_fallback(&split(&[], &[1.0]), &cfg), cfg.s_upper);
        let bad = SelectorConfig {
            s_buff: -1.0,
            ..Default::default()
        };
        assert!(gt_threshold(&split(&[1.0], &[]), &bad).is_err());
    }

    #[test]
    fn high_pass_cases() {
        let dets: Vec<_> = [-0.39, 1.00, 1.77, 5.22].iter().map(|&s| det(s)).collect();
        assert_eq!(high_pass_filter(&dets, f64::NEG_INFINITY).len(), 4);
        assert!(high_pass_filter(&dets, 5.22).is_empty());
        let kept = high_pass_filter(&dets, 2.0);
        assert_eq!(kept.len(), 1);
        assert_eq!(kept[0].score, 5.22);
    }

    #[test]
    fn instance_selection_cases() {
        let cfg = SelectorConfig::default();
        let dets: Vec<_> = (0..3).map(|i| det(i as f64)).collect();
        assert_eq!(select_instances(&dets, &[1.0; 3], &cfg).unwrap().len(), 3);
        assert!(select_instances(&dets, &[0.0; 3], &cfg).unwrap().is_empty());
        let kept = select_instances(&dets, &[0.05, 0.1, 0.11], &cfg).unwrap();
        assert_eq!(kept.len(), 1);
        assert_eq!(kept[0].score, 2.0);
        assert!(matches!(
            select_instances(&dets, &[0.5], &cfg),
            Err(Error::LengthMismatch { expected: 3, got: 1 })
        ));
        let zero = SelectorConfig {
            lambda_thres: 0.0,
            ..cfg
        };
        assert_eq!(select_instances(&dets, &[0.0, 1e-300, 0.3], &zero).unwrap().len(), 2);
    }

    #[test]
    fn instance_labels() {
        let cfg = SelectorConfig::default();
        let dets = vec![det(1.0), det(2.0)];
        assert!(gt_instance_labels(&dets, &[], &cfg).iter().all(|&l| l == 0.0));
        let gts = vec![dets[0].bbox];
        assert_eq!(gt_instance_labels(&dets[..1], &gts, &cfg), vec![1.0]);
    }

    fn small_dims() -> ModelDims {
        ModelDims {
            feature_len: 8,
            encoder_hidden: 6,
            head_hidden: vec![5, 3],
            edge_hidden: 4,
            history_len: 2,
        }
    }

    #[test]
    fn zero_weights_give_trivial_outputs() {
        let cfg = SelectorConfig::default();
        let mut frame = SelectorModel::new(SelectorMode::Frame, &small_dims(), cfg, 1).unwrap();
        let zeros = vec![0.0; frame.num_params()];
        frame.set_flat_params(&zeros);
        let f = frame.encode_detection(&det(4.0));
        assert_eq!(frame.frame_threshold(std::slice::from_ref(&f)).unwrap(), 0.0);

        let mut inst = SelectorModel::new(SelectorMode::Instance, &small_dims(), cfg, 1).unwrap();
        let zeros = vec![0.0; inst.num_params()];
        inst.set_flat_params(&zeros);
        assert_eq!(inst.instance_prob(&f, &[]).unwrap(), 0.5);
        let a = inst
            .affinity(&[f.clone(), f.clone()], std::slice::from_ref(&f))
            .unwrap();
        assert_eq!(a, vec![vec![0.5], vec![0.5]]);
    }

    #[test]
    fn frame_threshold_pooling_properties() {
        let m = SelectorModel::new(SelectorMode::Frame, &small_dims(), SelectorConfig::default(), 3).unwrap();
        let f = m.encode_detection(&det(6.0));
        let g = m.encode_detection(&Detection::new(
            0,
            Box3D::new(5.0, 1.0, 0.0, 3.0, 1.0, 1.0, 1.0).unwrap(),
            -1.0,
        ));
        let single = m.frame_threshold(std::slice::from_ref(&f)).unwrap();
        assert_eq!(m.frame_threshold(&[f.clone(), f.clone(), f.clone()]).unwrap(), single);
        assert_eq!(
            m.frame_threshold(&[f.clone(), g.clone()]).unwrap(),
            m.frame_threshold(&[g, f]).unwrap()
        );
        assert!(matches!(m.frame_threshold(&[]), Err(Error::EmptyInput)));
        assert!(m.instance_prob(&single_vec(8), &[]).is_err());
    }

    fn single_vec(n: usize) -> Vec<f64> {
        vec![0.1; n]
    }

    #[test]
    fn shared_network_is_deterministic() {
        let m = SelectorModel::new(SelectorMode::Instance, &small_dims(), SelectorConfig::default(), 4).unwrap();
        let a = m.encode_detection(&det(2.0));
        let b = m.encode_detection(&det(2.0));
        assert_eq!(a, b);
        let ctx = vec![m.encode_detection(&det(9.0))];
        let pa = m.instance_prob(&a, &ctx).unwrap();
        assert_eq!(pa, m.instance_prob(&b, &ctx).unwrap());
        assert!(pa > 0.0 && pa < 1.0);
    }

    #[test]
    fn json_round_trip_is_bit_exact() {
        for mode in [SelectorMode::Frame, SelectorMode::Instance] {
            let m = SelectorModel::new(mode, &small_dims(), SelectorConfig::default(), 77).unwrap();
            let text = m.to_json().unwrap();
            let back = SelectorModel::from_json(&text).unwrap();
            let a: Vec<u64> = m.flat_params().iter().map(|v| v.to_bits()).collect();
            let b: Vec<u64> = back.flat_params().iter().map(|v| v.to_bits()).collect();
            assert_eq!(a, b);
            assert_eq!(back.dims(), small_dims());
            assert_eq!(back.to_json().unwrap(), text);
        }
    }

    #[test]
    fn json_rejects_bad_documents() {
        let m = SelectorModel::new(SelectorMode::Frame, &small_dims(), SelectorConfig::default(), 1).unwrap();
        let text = m.to_json().unwrap();
        let bumped = text.replacen("\"version\": 1", "\"version\": 9", 1);
        assert!(SelectorModel::from_json(&bumped).is_err());
        let extra = text.replacen("{", "{\n  \"bogus\": 1,", 1);
        assert!(SelectorModel::from_json(&extra).is_err());
        assert!(SelectorModel::from_json("{}").is_err());
    }

    proptest! {
        #[test]
        fn oracle_threshold_preserves_tps(
            tp in proptest::collection::vec(-5.0..15.0f64, 1..10),
            fp in proptest::collection::vec(-5.0..15.0f64, 0..10),
            s_buff in 0.0..5.0f64,
            s_upper in -2.0..6.0f64,
        ) {
            let cfg = SelectorConfig { s_buff, s_upper, ..Default::default() };
            let t = gt_threshold(&split(&tp, &fp), &cfg).unwrap();
            prop_assert!(tp.iter().all(|&s| s > t) || s_buff == 0.0 && tp.iter().all(|&s| s >= t));
            // ordering and multiplicity of FP scores are irrelevant
            let mut fp2 = fp.clone();
            fp2.reverse();
            fp2.extend(fp.iter().copied());
            prop_assert_eq!(gt_threshold(&split(&tp, &fp2), &cfg).unwrap(), t);
        }

        #[test]
        fn shifting_tps_shifts_unclamped_threshold(
            tp in proptest::collection::vec(-5.0..5.0f64, 1..8),
            c in -3.0..3.0f64,
        ) {
            let cfg = SelectorConfig { s_upper: 100.0, ..Default::default() };
            let shifted: Vec<f64> = tp.iter().map(|s| s + c).collect();
            let a = gt_threshold(&split(&tp, &[]), &cfg).unwrap();
            let b = gt_threshold(&split(&shifted, &[]), &cfg).unwrap();
            prop_assert!((b - a - c).abs() < 1e-9);
        }

        #[test]
        fn filter_monotone(scores in proptest::collection::vec(-5.0..10.0f64, 0..12), t1 in -5.0..10.0f64, dt in 0.0..5.0f64) {
            let dets: Vec<_> = scores.iter().map(|&s| det(s)).collect();
            let lo = high_pass_mask(&dets, t1);
            let hi = high_pass_mask(&dets, t1 + dt);
            for (a, b) in lo.iter().zip(&hi) {
                prop_assert!(!*b || *a);
            }
        }
    }
}
