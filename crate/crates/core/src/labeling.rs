//! Supervision from ground truth: TP/FP flags, oracle thresholds, instance
//! targets, and training samples with teacher-forced tracklets.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::assignment::match_tp_fp;
use crate::detection::{Detection, Frame, GtObject, Sequence};
use crate::geometry::Box3D;
use crate::neural::encoder::{raw_input, ScoredBox};
use crate::neural::train::TrainingSample;
use crate::selection::{gt_threshold, ScoreSplit, SelectorConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledFrame {
    pub index: u32,
    pub gts: Vec<GtObject>,
    pub detections: Vec<Detection>,
    pub is_tp: Vec<bool>,
    /// Ground-truth id matched by each detection.
    pub matched_id: Vec<Option<u64>>,
    /// Oracle threshold; `s_upper` when the frame has no true positive.
    pub tau: f64,
    /// `true` when `tau` is the empty-TP fallback.
    pub fallback: bool,
    pub lambda: Vec<f64>,
}

impl LabeledFrame {
    pub fn num_tp(&self) -> usize {
        self.is_tp.iter().filter(|&&t| t).count()
    }

    pub fn num_fp(&self) -> usize {
        self.is_tp.len() - self.num_tp()
    }
}

pub fn label_frame(frame: &Frame, cfg: &SelectorConfig) -> LabeledFrame {
    let boxes: Vec<Box3D> = frame.detections.iter().map(|d| d.bbox).collect();
    let gt_boxes: Vec<Box3D> = frame.gts.iter().map(|g| g.bbox).collect();
    let labels = match_tp_fp(&boxes, &gt_boxes, cfg.criterion());
    let split = ScoreSplit::from_labels(&frame.detections, &labels);
    let (tau, fallback) = match gt_threshold(&split, cfg) {
        Ok(t) => (t, false),
        Err(_) => (cfg.s_upper, true),
    };
    LabeledFrame {
        index: frame.index,
        gts: frame.gts.clone(),
        detections: frame.detections.clone(),
        matched_id: labels.matched_gt.iter().map(|m| m.map(|g| frame.gts[g].id)).collect(),
        lambda: labels.is_tp.iter().map(|&t| if t { 1.0 } else { 0.0 }).collect(),
        is_tp: labels.is_tp,
        tau,
        fallback,
    }
}

pub fn label(seq: &Sequence, cfg: &SelectorConfig) -> Vec<LabeledFrame> {
    seq.frames.iter().map(|f| label_frame(f, cfg)).collect()
}

/// Per-frame oracle data written next to exported labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleSidecar {
    pub version: u32,
    pub sequence: String,
    pub selector: SelectorConfig,
    pub frames: Vec<OracleFrame>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleFrame {
    pub frame: u32,
    pub tau: f64,
    pub fallback: bool,
    pub lambda: Vec<f64>,
}

impl OracleSidecar {
    pub fn new(name: &str, frames: &[LabeledFrame], cfg: &SelectorConfig) -> Self {
        OracleSidecar {
            version: 1,
            sequence: name.to_string(),
            selector: *cfg,
            frames: frames
                .iter()
                .map(|f| OracleFrame {
                    frame: f.index,
                    tau: f.tau,
                    fallback: f.fallback,
                    lambda: f.lambda.clone(),
                })
                .collect(),
        }
    }
}

/// Training samples of one labeled sequence.
///
/// Tracklets are teacher-forced: at frame `t` every ground-truth object that
/// had a true-positive detection before `t` (and was seen within the last
/// `max_age` frames) contributes its last `history_len` matched detections,
/// most recent first, exactly as a live tracklet would.
/// The affinity target is 1 where a detection is that object's true positive
/// in frame `t`.
pub fn training_samples(frames: &[LabeledFrame], history_len: usize, max_age: u32) -> Vec<TrainingSample> {
    // id -> (last frame seen, matched detections most recent last)
    let mut tracks: BTreeMap<u64, (u32, Vec<ScoredBox>)> = BTreeMap::new();
    let mut out = Vec::with_capacity(frames.len());
    for f in frames {
        tracks.retain(|_, (last, _)| f.index.saturating_sub(*last) <= max_age);
        let ids: Vec<u64> = tracks.keys().copied().collect();
        let tracklets: Vec<Vec<f64>> = tracks
            .values()
            .map(|(_, hist)| {
                let mut recent = hist.iter().rev();
                let current = recent.next().expect("tracks hold at least one entry");
                let past: Vec<ScoredBox> = recent.take(history_len).copied().collect();
                raw_input(current, &past, history_len)
            })
            .collect();
        let detections: Vec<Vec<f64>> = f
            .detections
            .iter()
            .map(|d| raw_input(&d.scored(), &[], history_len))
            .collect();
        let n = detections.len();
        let mut affinity = vec![0.0; ids.len() * n];
        for (i, id) in ids.iter().enumerate() {
            for (j, m) in f.matched_id.iter().enumerate() {
                if *m == Some(*id) {
                    affinity[i * n + j] = 1.0;
                }
            }
        }
        out.push(TrainingSample {
            detections,
            tracklets,
            tau: if f.fallback { None } else { Some(f.tau) },
            lambda: f.lambda.clone(),
            affinity: Some(affinity),
        });
        for (d, m) in f.detections.iter().zip(&f.matched_id) {
            if let Some(id) = m {
                let entry = tracks.entry(*id).or_insert_with(|| (f.index, Vec::new()));
                entry.0 = f.index;
                entry.1.push(d.scored());
                // same bound as the tracker's history deque
                if entry.1.len() > history_len.max(1) {
                    entry.1.remove(0);
                }
            }
        }
    }
    out
}
