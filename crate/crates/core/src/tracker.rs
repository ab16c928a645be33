//! Online tracking-by-detection: selection, affinity, gated Hungarian
//! association and tracklet birth/death management.

use std::cmp::Ordering;
use std::collections::{HashMap, VecDeque};

use serde::{Deserialize, Serialize};

use crate::assignment::{greedy, hungarian, CostMatrix};
use crate::detection::{Detection, Sequence};
use crate::error::{Error, Result};
use crate::geometry::{iou_3d, Box3D};
use crate::neural::encoder::ScoredBox;
use crate::selection::{SelectorMode, SelectorModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AssociationMode {
    /// 3D IoU between the predicted tracklet box and each detection.
    Iou,
    /// Learned edge head over encoder features.
    Feature,
    /// IoU affinity with greedy instead of optimal assignment.
    Greedy,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum SelectorSetting {
    Off,
    /// One fixed score threshold for every frame.
    Global {
        threshold: f64,
    },
    Frame,
    Instance,
}

impl SelectorSetting {
    pub fn needs_model(&self) -> Option<SelectorMode> {
        match self {
            SelectorSetting::Frame => Some(SelectorMode::Frame),
            SelectorSetting::Instance => Some(SelectorMode::Instance),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            SelectorSetting::Off => "off",
            SelectorSetting::Global { .. } => "global",
            SelectorSetting::Frame => "frame",
            SelectorSetting::Instance => "instance",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrackerConfig {
    pub min_hits: u32,
    pub max_age: u32,
    pub association: AssociationMode,
    pub selector: SelectorSetting,
    /// Minimum affinity for a match; `None` picks 0.1 (IoU) or 0.5 (feature).
    pub gate: Option<f64>,
    pub history_len: usize,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        TrackerConfig {
            min_hits: 3,
            max_age: 2,
            association: AssociationMode::Iou,
            selector: SelectorSetting::Off,
            gate: None,
            history_len: 5,
        }
    }
}

impl TrackerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.min_hits < 1 || self.max_age < 1 {
            return Err(Error::Config("min_hits and max_age must be >= 1".into()));
        }
        if let Some(g) = self.gate {
            if !g.is_finite() {
                return Err(Error::Config("gate must be finite".into()));
            }
        }
        if let SelectorSetting::Global { threshold } = self.selector {
            if threshold.is_nan() {
                return Err(Error::Config("global threshold must not be NaN".into()));
            }
        }
        Ok(())
    }

    pub fn effective_gate(&self) -> f64 {
        self.gate.unwrap_or(match self.association {
            AssociationMode::Feature => 0.5,
            AssociationMode::Iou | AssociationMode::Greedy => 0.1,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrackState {
    Tentative,
    Confirmed,
    Dead,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tracklet {
    pub id: u64,
    /// Associated detections with their frame index, oldest first.
    pub history: VecDeque<(u32, ScoredBox)>,
    pub hits: u32,
    pub misses: u32,
    pub state: TrackState,
    pub feature: Option<Vec<f64>>,
    score_sum: f64,
}

impl Tracklet {
    fn new(id: u64, frame: u32, obj: ScoredBox) -> Self {
        Tracklet {
            id,
            history: VecDeque::from([(frame, obj)]),
            hits: 1,
            misses: 0,
            state: TrackState::Tentative,
            feature: None,
            score_sum: obj.score,
        }
    }

    pub fn last(&self) -> &(u32, ScoredBox) {
        self.history.back().expect("alive tracklets keep history")
    }

    /// Mean score of every detection associated over the tracklet's life.
    pub fn mean_score(&self) -> f64 {
        self.score_sum / self.hits as f64
    }

    /// Latest entry and the older ones, most recent first.
    pub fn encoder_view(&self) -> (ScoredBox, Vec<ScoredBox>) {
        let mut it = self.history.iter().rev().map(|(_, o)| *o);
        let current = it.next().expect("alive tracklets keep history");
        (current, it.collect())
    }
}

/// Constant-velocity prediction of a tracklet at `frame` from its last two
/// entries; size and heading are carried forward.
pub fn predict_at(t: &Tracklet, frame: u32) -> Box3D {
    let (f1, last) = *t.last();
    if t.history.len() < 2 {
        return last.bbox;
    }
    let (f0, prev) = t.history[t.history.len() - 2];
    let dt = (f1 - f0).max(1) as f64;
    let ahead = frame.saturating_sub(f1) as f64;
    let k = ahead / dt;
    let (a, b) = (prev.bbox, last.bbox);
    b.translated((b.x - a.x) * k, (b.y - a.y) * k, (b.z - a.z) * k)
}

/// Prediction one frame after the last entry.
pub fn predict(t: &Tracklet) -> Box3D {
    predict_at(t, t.last().0 + 1)
}

/// Tracklet x detection IoU affinity against the predicted boxes.
pub fn iou_affinity(tracklets: &[Tracklet], dets: &[Detection], frame: u32) -> Vec<Vec<f64>> {
    tracklets
        .iter()
        .map(|t| {
            let p = predict_at(t, frame);
            dets.iter().map(|d| iou_3d(&p, &d.bbox)).collect()
        })
        .collect()
}

/// One output box of the tracker.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrackedObject {
    pub frame: u32,
    pub id: u64,
    pub bbox: Box3D,
    /// Score of the detection associated in this frame.
    pub score: f64,
    /// Track-level confidence used by recall sweeps.
    pub confidence: f64,
}

/// A detection removed by the selector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FilteredDetection {
    pub frame: u32,
    pub score: f64,
    /// Frame threshold or instance probability behind the decision.
    pub value: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct StepOutput {
    /// `(tracklet id, index into kept)` for existing tracklets.
    pub assignments: Vec<(u64, usize)>,
    /// `(tracklet id, index into kept)` for tracklets born this frame.
    pub births: Vec<(u64, usize)>,
    pub reported: Vec<TrackedObject>,
    pub filtered: Vec<FilteredDetection>,
    /// Frame threshold used by the frame-level selector.
    pub threshold: Option<f64>,
    pub kept: Vec<Detection>,
}

/// Canonical in-frame order so results do not depend on input order.
fn canonical(a: &Detection, b: &Detection) -> Ordering {
    let key = |d: &Detection| {
        [
            d.score,
            d.bbox.x,
            d.bbox.y,
            d.bbox.z,
            d.bbox.l,
            d.bbox.w,
            d.bbox.h,
            d.bbox.theta,
        ]
    };
    let (ka, kb) = (key(a), key(b));
    for (x, y) in ka.iter().zip(&kb) {
        match y.total_cmp(x) {
            Ordering::Equal => continue,
            o => return o,
        }
    }
    Ordering::Equal
}

pub struct Tracker<'m> {
    cfg: TrackerConfig,
    model: Option<&'m SelectorModel>,
    tracklets: Vec<Tracklet>,
    next_id: u64,
    first_frame: Option<u32>,
    last_frame: Option<u32>,
}

impl<'m> Tracker<'m> {
    pub fn new(cfg: TrackerConfig, model: Option<&'m SelectorModel>) -> Result<Self> {
        cfg.validate()?;
        if let Some(mode) = cfg.selector.needs_model() {
            match model {
                Some(m) if m.mode == mode => {}
                Some(m) => {
                    return Err(Error::Model(format!(
                        "selector '{}' needs a {:?}-mode model, got {:?}",
                        cfg.selector.name(),
                        mode,
                        m.mode
                    )))
                }
                None => {
                    return Err(Error::Model(format!(
                        "selector '{}' needs a model",
                        cfg.selector.name()
                    )))
                }
            }
        }
        if cfg.association == AssociationMode::Feature && model.is_none_or(|m| m.edge.is_none()) {
            return Err(Error::Model(
                "feature association needs a model with an association head".into(),
            ));
        }
        if let Some(m) = model {
            if m.history_len != cfg.history_len {
                return Err(Error::Model(format!(
                    "model history length {} differs from tracker history length {}",
                    m.history_len, cfg.history_len
                )));
            }
        }
        Ok(Tracker {
            cfg,
            model,
            tracklets: Vec::new(),
            next_id: 0,
            first_frame: None,
            last_frame: None,
        })
    }

    pub fn tracklets(&self) -> &[Tracklet] {
        &self.tracklets
    }

    fn refresh_features(&mut self) {
        if let Some(m) = self.model {
            for t in &mut self.tracklets {
                if t.feature.is_none() {
                    let (cur, hist) = t.encoder_view();
                    t.feature = Some(m.encode(&cur, &hist));
                }
            }
        }
    }

    /// Processes one frame. Frame indices must increase strictly.
    pub fn step(&mut self, frame: u32, detections: &[Detection]) -> Result<StepOutput> {
        if let Some(last) = self.last_frame {
            if frame <= last {
                return Err(Error::Config(format!("frame {frame} does not follow frame {last}")));
            }
        }
        self.last_frame = Some(frame);
        let first = *self.first_frame.get_or_insert(frame);
        let mut dets = detections.to_vec();
        dets.sort_by(canonical);

        self.refresh_features();
        let trk_feats: Vec<Vec<f64>> = self.tracklets.iter().filter_map(|t| t.feature.clone()).collect();
        let det_feats: Option<Vec<Vec<f64>>> = self.model.map(|m| dets.iter().map(|d| m.encode_detection(d)).collect());

        // selection
        let mut out = StepOutput::default();
        let keep: Vec<bool> = match self.cfg.selector {
            SelectorSetting::Off => vec![true; dets.len()],
            SelectorSetting::Global { threshold } => {
                out.threshold = Some(threshold);
                dets.iter().map(|d| d.score > threshold).collect()
            }
            SelectorSetting::Frame => {
                let m = self.model.expect("checked at construction");
                let feats = det_feats.as_ref().expect("model present");
                let all: Vec<Vec<f64>> = feats.iter().chain(&trk_feats).cloned().collect();
                let tau = if all.is_empty() {
                    f64::NEG_INFINITY
                } else {
                    m.frame_threshold(&all)?
                };
                out.threshold = Some(tau);
                dets.iter().map(|d| d.score > tau).collect()
            }
            SelectorSetting::Instance => {
                let m = self.model.expect("checked at construction");
                let feats = det_feats.as_ref().expect("model present");
                let mut keep = Vec::with_capacity(dets.len());
                for (d, f) in dets.iter().zip(feats) {
                    let p = m.instance_prob(f, &trk_feats)?;
                    let k = p > m.config.lambda_thres;
                    if !k {
                        out.filtered.push(FilteredDetection {
                            frame,
                            score: d.score,
                            value: p,
                        });
                    }
                    keep.push(k);
                }
                keep
            }
        };
        if let Some(tau) = out.threshold {
            for (d, &k) in dets.iter().zip(&keep) {
                if !k {
                    out.filtered.push(FilteredDetection {
                        frame,
                        score: d.score,
                        value: tau,
                    });
                }
            }
        }
        let kept_idx: Vec<usize> = (0..dets.len()).filter(|&j| keep[j]).collect();
        let kept: Vec<Detection> = kept_idx.iter().map(|&j| dets[j]).collect();

        // affinity and association over survivors
        let affinity = match self.cfg.association {
            AssociationMode::Iou | AssociationMode::Greedy => iou_affinity(&self.tracklets, &kept, frame),
            AssociationMode::Feature => {
                let m = self.model.expect("checked at construction");
                let feats = det_feats.as_ref().expect("model present");
                let kf: Vec<Vec<f64>> = kept_idx.iter().map(|&j| feats[j].clone()).collect();
                m.affinity(&trk_feats, &kf)?
            }
        };
        let gate = self.cfg.effective_gate();
        let cost = CostMatrix::from_fn(self.tracklets.len(), kept.len(), |i, j| {
            let a = affinity[i][j];
            if a >= gate {
                -a
            } else {
                f64::INFINITY
            }
        });
        let assignment = match self.cfg.association {
            AssociationMode::Greedy => greedy(&cost),
            _ => hungarian(&cost),
        };

        // lifecycle
        let mut matched = vec![None; self.tracklets.len()];
        for &(i, j) in &assignment.pairs {
            matched[i] = Some(j);
        }
        let h = self.cfg.history_len;
        for (t, m) in self.tracklets.iter_mut().zip(&matched) {
            match m {
                Some(j) => {
                    let d = kept[*j];
                    t.history.push_back((frame, d.scored()));
                    while t.history.len() > h.max(1) {
                        t.history.pop_front();
                    }
                    t.hits += 1;
                    t.misses = 0;
                    t.score_sum += d.score;
                    t.feature = None;
                    if t.hits >= self.cfg.min_hits {
                        t.state = TrackState::Confirmed;
                    }
                }
                None => {
                    t.misses += 1;
                    if t.misses >= self.cfg.max_age {
                        t.state = TrackState::Dead;
                    }
                }
            }
        }
        for (t, m) in self.tracklets.iter().zip(&matched) {
            if let Some(j) = m {
                out.assignments.push((t.id, *j));
                let early = frame - first + 1 < self.cfg.min_hits;
                if t.state == TrackState::Confirmed || early {
                    out.reported.push(TrackedObject {
                        frame,
                        id: t.id,
                        bbox: kept[*j].bbox,
                        score: kept[*j].score,
                        confidence: t.mean_score(),
                    });
                }
            }
        }
        self.tracklets.retain(|t| t.state != TrackState::Dead);
        for &j in &assignment.unmatched_cols {
            let d = kept[j];
            let mut t = Tracklet::new(self.next_id, frame, d.scored());
            if self.cfg.min_hits <= 1 {
                t.state = TrackState::Confirmed;
            }
            let early = frame - first + 1 < self.cfg.min_hits;
            if t.state == TrackState::Confirmed || early {
                out.reported.push(TrackedObject {
                    frame,
                    id: t.id,
                    bbox: d.bbox,
                    score: d.score,
                    confidence: d.score,
                });
            }
            out.births.push((t.id, j));
            self.next_id += 1;
            self.tracklets.push(t);
        }
        out.reported.sort_by_key(|o| o.id);
        out.kept = kept;
        Ok(out)
    }
}

/// Tracker output of one sequence.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrackingResult {
    /// Reported objects per input frame, ordered by id.
    pub frames: Vec<Vec<TrackedObject>>,
    pub filtered: Vec<FilteredDetection>,
    pub thresholds: Vec<Option<f64>>,
    /// Detections that survived selection, per frame.
    pub kept: Vec<Vec<Detection>>,
}

impl TrackingResult {
    /// Diagnostic CSV of removed detections.
    pub fn filtered_csv(&self) -> String {
        let mut s = String::from("frame,score,value\n");
        for f in &self.filtered {
            s.push_str(&format!("{},{:.6},{:.6}\n", f.frame, f.score, f.value));
        }
        s
    }

    pub fn num_reported(&self) -> usize {
        self.frames.iter().map(Vec::len).sum()
    }
}

/// Runs the tracker over a sequence. Every reported box gets its track's
/// whole-life mean detection score as confidence.
pub fn run_sequence(seq: &Sequence, model: Option<&SelectorModel>, cfg: &TrackerConfig) -> Result<TrackingResult> {
    let mut tracker = Tracker::new(cfg.clone(), model)?;
    let mut res = TrackingResult::default();
    let mut sums: HashMap<u64, (f64, u32)> = HashMap::new();
    for f in &seq.frames {
        let out = tracker.step(f.index, &f.detections)?;
        for (id, j) in out.assignments.iter().chain(&out.births) {
            let e = sums.entry(*id).or_insert((0.0, 0));
            e.0 += out.kept[*j].score;
            e.1 += 1;
        }
        res.frames.push(out.reported);
        res.filtered.extend(out.filtered);
        res.thresholds.push(out.threshold);
        res.kept.push(out.kept);
    }
    for frame in &mut res.frames {
        for o in frame.iter_mut() {
            let (s, n) = sums[&o.id];
            o.confidence = s / n as f64;
        }
    }
    Ok(res)
}
