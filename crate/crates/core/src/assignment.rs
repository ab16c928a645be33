//! Optimal bipartite assignment and detection/ground-truth matching.
//!
//! The solver returns a maximum-cardinality matching over the finite entries
//! of the cost matrix and, among those, one of minimum total cost. Forbidden
//! pairs are encoded as `f64::INFINITY`. Internally every cost is a
//! lexicographic pair `(forbidden count, finite cost)`, so no large sentinel
//! constant is mixed into the floating point sums.

use std::cmp::Ordering;
use std::ops::{Add, Sub};

use serde::{Deserialize, Serialize};

use crate::geometry::{center_distance, iou_3d, Box3D};

/// Dense row-major cost matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl CostMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols, "cost matrix data has wrong length");
        CostMatrix { rows, cols, data }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        CostMatrix { rows, cols, data }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let cols = rows.first().map_or(0, Vec::len);
        assert!(rows.iter().all(|r| r.len() == cols), "ragged cost matrix");
        CostMatrix {
            rows: rows.len(),
            cols,
            data: rows.iter().flatten().copied().collect(),
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Assignment {
    /// Matched `(row, col)` pairs, sorted by row.
    pub pairs: Vec<(usize, usize)>,
    pub unmatched_rows: Vec<usize>,
    pub unmatched_cols: Vec<usize>,
}

impl Assignment {
    pub fn total_cost(&self, c: &CostMatrix) -> f64 {
        self.pairs.iter().map(|&(r, col)| c.get(r, col)).sum()
    }

    fn from_pairs(mut pairs: Vec<(usize, usize)>, rows: usize, cols: usize) -> Self {
        pairs.sort_unstable();
        let mut row_used = vec![false; rows];
        let mut col_used = vec![false; cols];
        for &(r, c) in &pairs {
            row_used[r] = true;
            col_used[c] = true;
        }
        Assignment {
            pairs,
            unmatched_rows: (0..rows).filter(|&r| !row_used[r]).collect(),
            unmatched_cols: (0..cols).filter(|&c| !col_used[c]).collect(),
        }
    }
}

/// `(hard, soft)` cost ordered lexicographically.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Lex {
    hard: i64,
    soft: f64,
}

impl Lex {
    const ZERO: Lex = Lex { hard: 0, soft: 0.0 };
    const INF: Lex = Lex {
        hard: i64::MAX / 4,
        soft: 0.0,
    };
    const FORBIDDEN: Lex = Lex { hard: 1, soft: 0.0 };

    fn finite(v: f64) -> Lex {
        Lex { hard: 0, soft: v }
    }
}

impl Add for Lex {
    type Output = Lex;
    fn add(self, o: Lex) -> Lex {
        Lex {
            hard: self.hard + o.hard,
            soft: self.soft + o.soft,
        }
    }
}

impl Sub for Lex {
    type Output = Lex;
    fn sub(self, o: Lex) -> Lex {
        Lex {
            hard: self.hard - o.hard,
            soft: self.soft - o.soft,
        }
    }
}

impl PartialOrd for Lex {
    fn partial_cmp(&self, o: &Lex) -> Option<Ordering> {
        Some(self.hard.cmp(&o.hard).then(self.soft.total_cmp(&o.soft)))
    }
}

/// Minimum-cost maximum matching over the finite entries of `c`.
///
/// Shortest augmenting path formulation with row/column potentials on the
/// square padding of `c`; padding entries count as forbidden.
pub fn hungarian(c: &CostMatrix) -> Assignment {
    let (m, n) = (c.rows, c.cols);
    if m == 0 || n == 0 {
        return Assignment::from_pairs(Vec::new(), m, n);
    }
    let size = m.max(n);
    let cost = |i: usize, j: usize| -> Lex {
        if i < m && j < n {
            let v = c.get(i, j);
            if v.is_finite() {
                Lex::finite(v)
            } else {
                Lex::FORBIDDEN
            }
        } else {
            Lex::FORBIDDEN
        }
    };

    // 1-based indices; p[j] is the row assigned to column j.
    let mut u = vec![Lex::ZERO; size + 1];
    let mut v = vec![Lex::ZERO; size + 1];
    let mut p = vec![0usize; size + 1];
    let mut way = vec![0usize; size + 1];
    let mut minv = vec![Lex::INF; size + 1];
    let mut used = vec![false; size + 1];

    for i in 1..=size {
        p[0] = i;
        let mut j0 = 0usize;
        minv.iter_mut().for_each(|x| *x = Lex::INF);
        used.iter_mut().for_each(|x| *x = false);
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = Lex::INF;
            let mut j1 = 0usize;
            for j in 1..=size {
                if used[j] {
                    continue;
                }
                let cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=size {
                if used[j] {
                    u[p[j]] = u[p[j]] + delta;
                    v[j] = v[j] - delta;
                } else {
                    minv[j] = minv[j] - delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let pairs = (1..=size)
        .filter_map(|j| {
            let i = p[j];
            (i >= 1 && i <= m && j <= n && c.get(i - 1, j - 1).is_finite()).then(|| (i - 1, j - 1))
        })
        .collect();
    Assignment::from_pairs(pairs, m, n)
}

/// Greedy baseline: repeatedly takes the cheapest remaining finite pair.
/// Ties resolve to the lowest `(row, col)`.
pub fn greedy(c: &CostMatrix) -> Assignment {
    let mut entries: Vec<(f64, usize, usize)> = (0..c.rows)
        .flat_map(|r| (0..c.cols).map(move |col| (r, col)))
        .map(|(r, col)| (c.get(r, col), r, col))
        .filter(|(v, _, _)| v.is_finite())
        .collect();
    entries.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut row_used = vec![false; c.rows];
    let mut col_used = vec![false; c.cols];
    let mut pairs = Vec::new();
    for (_, r, col) in entries {
        if !row_used[r] && !col_used[col] {
            row_used[r] = true;
            col_used[col] = true;
            pairs.push((r, col));
        }
    }
    Assignment::from_pairs(pairs, c.rows, c.cols)
}

/// Gate used when deciding whether a detection hits a ground-truth box.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "threshold", rename_all = "snake_case")]
pub enum MatchCriterion {
    /// 3D IoU at least the threshold.
    Iou3d(f64),
    /// Planar center distance at most the threshold, in meters.
    CenterDistance(f64),
}

impl MatchCriterion {
    pub fn validate(&self) -> crate::Result<()> {
        match *self {
            MatchCriterion::Iou3d(t) if t > 0.0 && t <= 1.0 => Ok(()),
            MatchCriterion::CenterDistance(d) if d > 0.0 && d.is_finite() => Ok(()),
            other => Err(crate::Error::Config(format!("invalid match criterion {other:?}"))),
        }
    }

    /// Raw overlap value for a pair: IoU, or center distance.
    pub fn measure(&self, a: &Box3D, b: &Box3D) -> f64 {
        match self {
            MatchCriterion::Iou3d(_) => iou_3d(a, b),
            MatchCriterion::CenterDistance(_) => center_distance(a, b, true),
        }
    }

    pub fn passes(&self, value: f64) -> bool {
        match *self {
            MatchCriterion::Iou3d(t) => value >= t,
            MatchCriterion::CenterDistance(d) => value <= d,
        }
    }

    /// Assignment cost for a gated pair: negated IoU or raw distance;
    /// `INFINITY` when the gate fails.
    pub fn cost(&self, a: &Box3D, b: &Box3D) -> f64 {
        let m = self.measure(a, b);
        if !self.passes(m) {
            return f64::INFINITY;
        }
        match self {
            MatchCriterion::Iou3d(_) => -m,
            MatchCriterion::CenterDistance(_) => m,
        }
    }

    /// Higher-is-better alignment quality of a matched pair.
    pub fn quality(&self, value: f64) -> f64 {
        match *self {
            MatchCriterion::Iou3d(_) => value,
            MatchCriterion::CenterDistance(d) => 1.0 - value / d,
        }
    }

    pub fn label(&self) -> String {
        match self {
            MatchCriterion::Iou3d(t) => format!("iou3d@{t}"),
            MatchCriterion::CenterDistance(d) => format!("dist@{d}"),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TpFpLabels {
    /// Per detection: `true` for a true positive.
    pub is_tp: Vec<bool>,
    /// Per detection: matched ground-truth index, if any.
    pub matched_gt: Vec<Option<usize>>,
    /// Per ground truth: `true` when some detection matched it.
    pub gt_matched: Vec<bool>,
    /// Overlap value (IoU or distance) of each matched pair, per detection.
    pub overlap: Vec<Option<f64>>,
}

impl TpFpLabels {
    pub fn num_tp(&self) -> usize {
        self.is_tp.iter().filter(|&&t| t).count()
    }

    pub fn num_fp(&self) -> usize {
        self.is_tp.len() - self.num_tp()
    }

    pub fn num_missed(&self) -> usize {
        self.gt_matched.iter().filter(|&&m| !m).count()
    }
}

/// Labels detections as TP/FP by gated Hungarian matching against ground truth.
pub fn match_tp_fp(dets: &[Box3D], gts: &[Box3D], criterion: MatchCriterion) -> TpFpLabels {
    let cost = CostMatrix::from_fn(dets.len(), gts.len(), |d, g| criterion.cost(&dets[d], &gts[g]));
    let assignment = hungarian(&cost);
    let mut labels = TpFpLabels {
        is_tp: vec![false; dets.len()],
        matched_gt: vec![None; dets.len()],
        gt_matched: vec![false; gts.len()],
        overlap: vec![None; dets.len()],
    };
    for (d, g) in assignment.pairs {
        let m = criterion.measure(&dets[d], &gts[g]);
        if criterion.passes(m) {
            labels.is_tp[d] = true;
            labels.matched_gt[d] = Some(g);
            labels.gt_matched[g] = true;
            labels.overlap[d] = Some(m);
        }
    }
    labels
}
