//! Glue shared by the CLI and the benchmarks: labeling whole datasets,
//! training a selector, tracking many sequences, and detection-level
//! selection statistics.

use serde::{Deserialize, Serialize};

use crate::assignment::MatchCriterion;
use crate::detection::{Detection, Sequence};
use crate::error::Result;
use crate::labeling::{label, training_samples, LabeledFrame};
use crate::metrics::{clear_counts_all, ClearCounts, EvalSequence};
use crate::neural::train::{train, TrainConfig, TrainReport, TrainingSample};
use crate::selection::{ModelDims, SelectorConfig, SelectorMode, SelectorModel};
use crate::tracker::{run_sequence, TrackerConfig, TrackingResult};

pub fn label_all(seqs: &[Sequence], cfg: &SelectorConfig) -> Vec<Vec<LabeledFrame>> {
    seqs.iter().map(|s| label(s, cfg)).collect()
}

/// Training samples of every labeled sequence, in order.
pub fn training_set(labeled: &[Vec<LabeledFrame>], history_len: usize, max_age: u32) -> Vec<TrainingSample> {
    labeled
        .iter()
        .flat_map(|frames| training_samples(frames, history_len, max_age))
        .collect()
}

/// Fresh model initialized from `train_cfg.seed`, then trained.
pub fn train_selector(
    mode: SelectorMode,
    dims: &ModelDims,
    selector: SelectorConfig,
    train_cfg: &TrainConfig,
    samples: &[TrainingSample],
) -> Result<(SelectorModel, TrainReport)> {
    let mut model = SelectorModel::new(mode, dims, selector, train_cfg.seed)?;
    let report = train(&mut model, samples, train_cfg)?;
    Ok((model, report))
}

pub fn track_all(seqs: &[Sequence], model: Option<&SelectorModel>, cfg: &TrackerConfig) -> Result<Vec<TrackingResult>> {
    seqs.iter().map(|s| run_sequence(s, model, cfg)).collect()
}

/// Copy of `seq` keeping only detections above each frame's oracle threshold.
pub fn oracle_filtered(seq: &Sequence, labeled: &[LabeledFrame]) -> Sequence {
    let mut out = seq.clone();
    for (f, l) in out.frames.iter_mut().zip(labeled) {
        f.detections.retain(|d| d.score > l.tau);
    }
    out
}

/// Copy of `seq` keeping detections scoring above `threshold`.
pub fn threshold_filtered(seq: &Sequence, threshold: f64) -> Sequence {
    let mut out = seq.clone();
    for f in &mut out.frames {
        f.detections.retain(|d| d.score > threshold);
    }
    out
}

/// CLEAR counters of tracking results against each sequence's ground truth.
pub fn tracking_counts(seqs: &[Sequence], results: &[TrackingResult], c: MatchCriterion) -> ClearCounts {
    let gts: Vec<Vec<Vec<crate::GtObject>>> = seqs
        .iter()
        .map(|s| s.frames.iter().map(|f| f.gts.clone()).collect())
        .collect();
    let evals: Vec<EvalSequence<'_>> = gts
        .iter()
        .zip(results)
        .map(|(g, r)| EvalSequence {
            hyps: &r.frames,
            gts: g,
        })
        .collect();
    clear_counts_all(&evals, c, None)
}

/// Detection-level counts before and after selection.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct SelectionStats {
    pub tp_total: usize,
    pub tp_kept: usize,
    pub fp_total: usize,
    pub fp_kept: usize,
}

impl SelectionStats {
    pub fn add(&mut self, o: &SelectionStats) {
        self.tp_total += o.tp_total;
        self.tp_kept += o.tp_kept;
        self.fp_total += o.fp_total;
        self.fp_kept += o.fp_kept;
    }

    pub fn fp_removal(&self) -> f64 {
        if self.fp_total == 0 {
            0.0
        } else {
            1.0 - self.fp_kept as f64 / self.fp_total as f64
        }
    }

    pub fn tp_retention(&self) -> f64 {
        if self.tp_total == 0 {
            1.0
        } else {
            self.tp_kept as f64 / self.tp_total as f64
        }
    }
}

/// Counts which labeled detections survive in `kept` (matched by value).
pub fn frame_stats(frame: &LabeledFrame, kept: &[Detection]) -> SelectionStats {
    let mut used = vec![false; frame.detections.len()];
    let mut s = SelectionStats {
        tp_total: frame.num_tp(),
        fp_total: frame.num_fp(),
        ..Default::default()
    };
    for k in kept {
        if let Some(j) = (0..used.len()).find(|&j| !used[j] && frame.detections[j] == *k) {
            used[j] = true;
            if frame.is_tp[j] {
                s.tp_kept += 1;
            } else {
                s.fp_kept += 1;
            }
        }
    }
    s
}

pub fn selection_stats(labeled: &[Vec<LabeledFrame>], results: &[TrackingResult]) -> SelectionStats {
    let mut total = SelectionStats::default();
    for (frames, r) in labeled.iter().zip(results) {
        for (f, kept) in frames.iter().zip(&r.kept) {
            total.add(&frame_stats(f, kept));
        }
    }
    total
}

/// Detection-level statistics of a fixed global threshold.
pub fn threshold_stats(labeled: &[Vec<LabeledFrame>], threshold: f64) -> SelectionStats {
    let mut s = SelectionStats::default();
    for f in labeled.iter().flatten() {
        for (d, &tp) in f.detections.iter().zip(&f.is_tp) {
            let keep = d.score > threshold;
            if tp {
                s.tp_total += 1;
                s.tp_kept += usize::from(keep);
            } else {
                s.fp_total += 1;
                s.fp_kept += usize::from(keep);
            }
        }
    }
    s
}

/// Detection-level statistics of the per-frame oracle threshold.
pub fn oracle_stats(labeled: &[Vec<LabeledFrame>]) -> SelectionStats {
    let mut s = SelectionStats::default();
    for f in labeled.iter().flatten() {
        for (d, &tp) in f.detections.iter().zip(&f.is_tp) {
            let keep = d.score > f.tau;
            if tp {
                s.tp_total += 1;
                s.tp_kept += usize::from(keep);
            } else {
                s.fp_total += 1;
                s.fp_kept += usize::from(keep);
            }
        }
    }
    s
}

/// One row of the global-threshold search.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub threshold: f64,
    pub stats: SelectionStats,
    pub mota: f64,
    pub recall: f64,
}

/// Exhaustive global-threshold search: detection-level removal and, after
/// tracking the thresholded detections, MOTA and recall.
pub fn sweep(
    seqs: &[Sequence],
    labeled: &[Vec<LabeledFrame>],
    thresholds: &[f64],
    tracker: &TrackerConfig,
    c: MatchCriterion,
) -> Result<Vec<SweepRow>> {
    let mut rows = Vec::with_capacity(thresholds.len());
    for &t in thresholds {
        let filtered: Vec<Sequence> = seqs.iter().map(|s| threshold_filtered(s, t)).collect();
        let results = track_all(&filtered, None, tracker)?;
        let cc = tracking_counts(seqs, &results, c);
        rows.push(SweepRow {
            threshold: t,
            stats: threshold_stats(labeled, t),
            mota: if cc.num_gt == 0 { 0.0 } else { cc.mota() },
            recall: if cc.num_gt == 0 { 0.0 } else { cc.recall() },
        });
    }
    Ok(rows)
}

pub const SWEEP_HEADER: &str = "threshold,tp_kept,tp_total,fp_kept,fp_total,tp_retention,fp_removal,mota,recall";

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut s = String::from(SWEEP_HEADER);
    s.push('\n');
    for r in rows {
        s.push_str(&format!(
            "{:.6},{},{},{},{},{:.6},{:.6},{:.6},{:.6}\n",
            r.threshold,
            r.stats.tp_kept,
            r.stats.tp_total,
            r.stats.fp_kept,
            r.stats.fp_total,
            r.stats.tp_retention(),
            r.stats.fp_removal(),
            r.mota,
            r.recall
        ));
    }
    s
}

/// Highest FP removal among rows retaining at least `min_retention` of TPs.
pub fn best_global(rows: &[SweepRow], min_retention: f64) -> Option<SweepRow> {
    rows.iter()
        .filter(|r| r.stats.tp_retention() >= min_retention)
        .copied()
        .max_by(|a, b| a.stats.fp_removal().total_cmp(&b.stats.fp_removal()))
}
