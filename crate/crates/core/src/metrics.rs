//! CLEAR MOT metrics and the recall-averaged AMOTA family.

use std::collections::HashMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::assignment::{hungarian, CostMatrix, MatchCriterion};
use crate::detection::GtObject;
use crate::error::{Error, Result};
use crate::tracker::TrackedObject;

/// Default number of recall targets of the sweep.
pub const RECALL_STEPS: usize = 40;

/// One sequence to evaluate: frame-aligned hypotheses and ground truth.
#[derive(Debug, Clone, Copy)]
pub struct EvalSequence<'a> {
    pub hyps: &'a [Vec<TrackedObject>],
    pub gts: &'a [Vec<GtObject>],
}

/// Raw CLEAR counters; they add across sequences.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ClearCounts {
    pub num_gt: usize,
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    pub ids: usize,
    pub frag: usize,
    /// Sum of matched-pair quality (IoU, or `1 - d / threshold`).
    pub quality_sum: f64,
}

impl ClearCounts {
    pub fn add(&mut self, o: &ClearCounts) {
        self.num_gt += o.num_gt;
        self.tp += o.tp;
        self.fp += o.fp;
        self.fn_ += o.fn_;
        self.ids += o.ids;
        self.frag += o.frag;
        self.quality_sum += o.quality_sum;
    }

    pub fn mota(&self) -> f64 {
        1.0 - (self.fp + self.fn_ + self.ids) as f64 / self.num_gt as f64
    }

    pub fn motp(&self) -> f64 {
        if self.tp == 0 {
            0.0
        } else {
            self.quality_sum / self.tp as f64
        }
    }

    pub fn recall(&self) -> f64 {
        self.tp as f64 / self.num_gt as f64
    }
}

#[derive(Default)]
struct GtHistory {
    /// Hypothesis id of the most recent match.
    last_id: Option<u64>,
    /// Matched in the last frame where this object was present.
    tracked_last: bool,
}

/// CLEAR counters of one sequence. Correspondences from the previous frame
/// are kept while they still pass the gate; the rest is matched by gated
/// Hungarian assignment. An identity switch is a match to a different
/// hypothesis than the object's last match; a fragmentation is a match after
/// a frame in which the object was present but unmatched.
pub fn clear_counts(seq: EvalSequence<'_>, c: MatchCriterion, min_confidence: Option<f64>) -> ClearCounts {
    let mut counts = ClearCounts::default();
    let mut hist: HashMap<u64, GtHistory> = HashMap::new();
    let mut prev_pairs: HashMap<u64, u64> = HashMap::new();
    for (t, gts) in seq.gts.iter().enumerate() {
        let hyps: Vec<&TrackedObject> = seq
            .hyps
            .get(t)
            .map(|v| {
                v.iter()
                    .filter(|h| min_confidence.is_none_or(|m| h.confidence >= m))
                    .collect()
            })
            .unwrap_or_default();
        counts.num_gt += gts.len();
        let mut gt_match: Vec<Option<usize>> = vec![None; gts.len()];
        let mut hyp_used = vec![false; hyps.len()];
        for (g, obj) in gts.iter().enumerate() {
            if let Some(&hid) = prev_pairs.get(&obj.id) {
                if let Some(h) = hyps.iter().position(|h| h.id == hid) {
                    if !hyp_used[h] && c.passes(c.measure(&obj.bbox, &hyps[h].bbox)) {
                        gt_match[g] = Some(h);
                        hyp_used[h] = true;
                    }
                }
            }
        }
        let free_g: Vec<usize> = (0..gts.len()).filter(|&g| gt_match[g].is_none()).collect();
        let free_h: Vec<usize> = (0..hyps.len()).filter(|&h| !hyp_used[h]).collect();
        let cost = CostMatrix::from_fn(free_g.len(), free_h.len(), |i, j| {
            c.cost(&gts[free_g[i]].bbox, &hyps[free_h[j]].bbox)
        });
        for (i, j) in hungarian(&cost).pairs {
            gt_match[free_g[i]] = Some(free_h[j]);
            hyp_used[free_h[j]] = true;
        }

        prev_pairs.clear();
        for (g, obj) in gts.iter().enumerate() {
            let st = hist.entry(obj.id).or_default();
            match gt_match[g] {
                Some(h) => {
                    let hid = hyps[h].id;
                    counts.tp += 1;
                    counts.quality_sum += c.quality(c.measure(&obj.bbox, &hyps[h].bbox));
                    if st.last_id.is_some_and(|last| last != hid) {
                        counts.ids += 1;
                    }
                    if st.last_id.is_some() && !st.tracked_last {
                        counts.frag += 1;
                    }
                    st.last_id = Some(hid);
                    st.tracked_last = true;
                    prev_pairs.insert(obj.id, hid);
                }
                None => {
                    counts.fn_ += 1;
                    st.tracked_last = false;
                }
            }
        }
        counts.fp += hyp_used.iter().filter(|&&u| !u).count();
    }
    counts
}

/// Summed counters over several sequences.
pub fn clear_counts_all(seqs: &[EvalSequence<'_>], c: MatchCriterion, min_confidence: Option<f64>) -> ClearCounts {
    let mut total = ClearCounts::default();
    for s in seqs {
        total.add(&clear_counts(*s, c, min_confidence));
    }
    total
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AmotaSummary {
    pub samota: f64,
    pub amota: f64,
    pub amotp: f64,
    /// Highest recall reached by any confidence cutoff.
    pub best_recall: f64,
}

fn sorted_confidences(seqs: &[EvalSequence<'_>]) -> Vec<f64> {
    let mut v: Vec<f64> = seqs
        .iter()
        .flat_map(|s| s.hyps.iter().flatten().map(|h| h.confidence))
        .collect();
    v.sort_by(|a, b| b.total_cmp(a));
    v.dedup();
    v
}

/// Recall-averaged metrics over `steps` targets `r = k / steps`.
///
/// For each target the highest confidence cutoff whose recall reaches `r`
/// is used; a target no cutoff reaches contributes zero. Per target:
/// `MOTA_r = max(0, 1 - (FP + FN + IDS) / G)`,
/// `sMOTA_r = clamp(1 - (FP + FN + IDS - (1 - r) G) / (r G), 0, 1)`.
pub fn amota_suite(seqs: &[EvalSequence<'_>], c: MatchCriterion, steps: usize) -> Result<AmotaSummary> {
    let num_gt: usize = seqs.iter().map(|s| s.gts.iter().map(Vec::len).sum::<usize>()).sum();
    if num_gt == 0 {
        return Err(Error::EmptyGroundTruth);
    }
    if steps == 0 {
        return Err(Error::Config("recall steps must be positive".into()));
    }
    let g = num_gt as f64;
    let targets: Vec<f64> = (1..=steps).map(|k| k as f64 / steps as f64).collect();
    let mut next = 0;
    let (mut samota, mut amota, mut amotp, mut best_recall) = (0.0, 0.0, 0.0, 0.0f64);
    // Walking cutoffs downward visits, for each target in increasing order,
    // the highest cutoff that reaches it.
    for cut in sorted_confidences(seqs) {
        if next == steps {
            break;
        }
        let cc = clear_counts_all(seqs, c, Some(cut));
        let recall = cc.recall();
        best_recall = best_recall.max(recall);
        while next < steps && recall >= targets[next] - 1e-12 {
            let r = targets[next];
            let errs = (cc.fp + cc.fn_ + cc.ids) as f64;
            amota += (1.0 - errs / g).max(0.0);
            samota += (1.0 - (errs - (1.0 - r) * g) / (r * g)).clamp(0.0, 1.0);
            amotp += cc.motp();
            next += 1;
        }
    }
    let l = steps as f64;
    Ok(AmotaSummary {
        samota: samota / l,
        amota: amota / l,
        amotp: amotp / l,
        best_recall,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub criterion: String,
    pub samota: f64,
    pub amota: f64,
    pub amotp: f64,
    pub mota: f64,
    pub motp: f64,
    pub ids: usize,
    pub frag: usize,
    pub fp: usize,
    pub fn_: usize,
    pub num_gt: usize,
    pub recall: f64,
}

pub const REPORT_HEADER: &str = "criterion,sAMOTA,AMOTA,AMOTP,MOTA,MOTP,IDS,FRAG,FP,FN";

impl MetricsReport {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{:.6},{:.6},{:.6},{:.6},{:.6},{},{},{},{}",
            self.criterion,
            self.samota,
            self.amota,
            self.amotp,
            self.mota,
            self.motp,
            self.ids,
            self.frag,
            self.fp,
            self.fn_
        )
    }
}

/// Full report (CLEAR on every hypothesis plus the recall sweep).
pub fn evaluate(seqs: &[EvalSequence<'_>], c: MatchCriterion, steps: usize) -> Result<MetricsReport> {
    c.validate()?;
    let cc = clear_counts_all(seqs, c, None);
    if cc.num_gt == 0 {
        return Err(Error::EmptyGroundTruth);
    }
    let am = amota_suite(seqs, c, steps)?;
    Ok(MetricsReport {
        criterion: c.label(),
        samota: am.samota,
        amota: am.amota,
        amotp: am.amotp,
        mota: cc.mota(),
        motp: cc.motp(),
        ids: cc.ids,
        frag: cc.frag,
        fp: cc.fp,
        fn_: cc.fn_,
        num_gt: cc.num_gt,
        recall: cc.recall(),
    })
}

/// CLEAR subset only; errors when there is no ground truth.
pub fn clear_metrics(seq: EvalSequence<'_>, c: MatchCriterion) -> Result<ClearCounts> {
    let cc = clear_counts(seq, c, None);
    if cc.num_gt == 0 {
        return Err(Error::EmptyGroundTruth);
    }
    Ok(cc)
}

pub fn reports_csv(reports: &[MetricsReport]) -> String {
    let mut s = String::from(REPORT_HEADER);
    s.push('\n');
    for r in reports {
        s.push_str(&r.csv_row());
        s.push('\n');
    }
    s
}

/// Fixed-width table with the same columns as the CSV.
pub fn reports_table(reports: &[MetricsReport]) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{:<14} {:>8} {:>8} {:>8} {:>8} {:>8} {:>6} {:>6} {:>7} {:>7}",
        "criterion", "sAMOTA", "AMOTA", "AMOTP", "MOTA", "MOTP", "IDS", "FRAG", "FP", "FN"
    );
    for r in reports {
        let _ = writeln!(
            s,
            "{:<14} {:>8.4} {:>8.4} {:>8.4} {:>8.4} {:>8.4} {:>6} {:>6} {:>7} {:>7}",
            r.criterion, r.samota, r.amota, r.amotp, r.mota, r.motp, r.ids, r.frag, r.fp, r.fn_
        );
    }
    s.push_str("IDS: a match to a hypothesis other than the object's previous match.\n");
    s
}
