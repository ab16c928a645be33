//! Simplified association head: one round of mean-neighbor message passing
//! between the tracklet and detection node sets, then a two-layer edge MLP
//! with a sigmoid on every (tracklet, detection) pair.
//!
//! The first edge layer acts on `concat(h_trk, h_det)`, so it is evaluated
//! as two per-node projections that are summed per pair.

use super::{dot, sigmoid, Mlp};

/// `h_i = f_i + mean(other side)` for both node sets.
pub fn message_pass(trk: &[Vec<f64>], det: &[Vec<f64>]) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let mean = |set: &[Vec<f64>], len: usize| -> Vec<f64> {
        let mut m = vec![0.0; len];
        if set.is_empty() {
            return m;
        }
        for v in set {
            for (a, b) in m.iter_mut().zip(v) {
                *a += b;
            }
        }
        let n = set.len() as f64;
        m.iter_mut().for_each(|a| *a /= n);
        m
    };
    let len = trk.first().or(det.first()).map_or(0, Vec::len);
    let md = mean(det, len);
    let mt = mean(trk, len);
    let add = |v: &Vec<f64>, m: &[f64]| v.iter().zip(m).map(|(a, b)| a + b).collect::<Vec<_>>();
    (
        trk.iter().map(|v| add(v, &md)).collect(),
        det.iter().map(|v| add(v, &mt)).collect(),
    )
}

/// Forward state of the edge head for one frame.
pub struct EdgeTrace {
    pub h_trk: Vec<Vec<f64>>,
    pub h_det: Vec<Vec<f64>>,
    /// Hidden activations per pair, row-major `trk x det`.
    pub hidden: Vec<Vec<f64>>,
    /// Edge logits, row-major `trk x det`.
    pub logits: Vec<f64>,
}

impl EdgeTrace {
    pub fn probabilities(&self) -> Vec<f64> {
        self.logits.iter().map(|&z| sigmoid(z)).collect()
    }
}

fn project(w: &[f64], in_len: usize, offset: usize, stride: usize, x: &[f64], rows: usize) -> Vec<f64> {
    (0..rows)
        .map(|o| dot(&w[o * stride + offset..o * stride + offset + in_len], x))
        .collect()
}

/// Evaluates the edge head. `edge` must have widths `[2F, hidden, 1]`.
pub fn edge_forward(edge: &Mlp, trk: &[Vec<f64>], det: &[Vec<f64>]) -> EdgeTrace {
    let (h_trk, h_det) = message_pass(trk, det);
    let f = edge.input_len() / 2;
    let hid = edge.widths()[1];
    let (w1, b1) = edge.layer(0);
    let (w2, b2) = edge.layer(1);
    let stride = 2 * f;
    let pt: Vec<Vec<f64>> = h_trk.iter().map(|h| project(w1, f, 0, stride, h, hid)).collect();
    let pd: Vec<Vec<f64>> = h_det
        .iter()
        .map(|h| {
            let mut p = project(w1, f, f, stride, h, hid);
            p.iter_mut().zip(b1).for_each(|(a, b)| *a += b);
            p
        })
        .collect();
    let mut hidden = Vec::with_capacity(pt.len() * pd.len());
    let mut logits = Vec::with_capacity(pt.len() * pd.len());
    for a in &pt {
        for b in &pd {
            let z: Vec<f64> = a.iter().zip(b).map(|(x, y)| (x + y).max(0.0)).collect();
            logits.push(b2[0] + dot(w2, &z));
            hidden.push(z);
        }
    }
    EdgeTrace {
        h_trk,
        h_det,
        hidden,
        logits,
    }
}

/// Backpropagates `d loss / d logit` (row-major `trk x det`). Adds the edge
/// parameter gradient into `grad` and returns gradients for the raw
/// tracklet and detection features.
#[allow(clippy::needless_range_loop)]
pub fn edge_backward(
    edge: &Mlp,
    trace: &EdgeTrace,
    grad_logits: &[f64],
    grad: &mut [f64],
) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let m = trace.h_trk.len();
    let n = trace.h_det.len();
    let f = edge.input_len() / 2;
    let hid = edge.widths()[1];
    let stride = 2 * f;
    let (w1, _) = edge.layer(0);
    let (w2, _) = edge.layer(1);
    let r0 = edge.layer_range(0);
    let r1 = edge.layer_range(1);

    let mut d_pt = vec![vec![0.0; hid]; m];
    let mut d_pd = vec![vec![0.0; hid]; n];
    {
        let g1 = &mut grad[r1.clone()];
        let (gw2, gb2) = g1.split_at_mut(hid);
        for i in 0..m {
            for j in 0..n {
                let k = i * n + j;
                let g = grad_logits[k];
                if g == 0.0 {
                    continue;
                }
                gb2[0] += g;
                let z = &trace.hidden[k];
                for h in 0..hid {
                    gw2[h] += g * z[h];
                    if z[h] > 0.0 {
                        let dz = g * w2[h];
                        d_pt[i][h] += dz;
                        d_pd[j][h] += dz;
                    }
                }
            }
        }
    }

    let g0 = &mut grad[r0];
    let (gw1, gb1) = g0.split_at_mut(hid * stride);
    let mut dh_trk = vec![vec![0.0; f]; m];
    let mut dh_det = vec![vec![0.0; f]; n];
    for (i, dp) in d_pt.iter().enumerate() {
        let x = &trace.h_trk[i];
        for (o, &g) in dp.iter().enumerate() {
            if g == 0.0 {
                continue;
            }
            let row = &w1[o * stride..o * stride + f];
            let grow = &mut gw1[o * stride..o * stride + f];
            for c in 0..f {
                grow[c] += g * x[c];
                dh_trk[i][c] += g * row[c];
            }
        }
    }
    for (j, dp) in d_pd.iter().enumerate() {
        let x = &trace.h_det[j];
        for (o, &g) in dp.iter().enumerate() {
            if g == 0.0 {
                continue;
            }
            gb1[o] += g;
            let row = &w1[o * stride + f..o * stride + 2 * f];
            let grow = &mut gw1[o * stride + f..o * stride + 2 * f];
            for c in 0..f {
                grow[c] += g * x[c];
                dh_det[j][c] += g * row[c];
            }
        }
    }

    // undo message passing
    let sum = |set: &[Vec<f64>]| -> Vec<f64> {
        let mut s = vec![0.0; f];
        for v in set {
            s.iter_mut().zip(v).for_each(|(a, b)| *a += b);
        }
        s
    };
    let s_trk = sum(&dh_trk);
    let s_det = sum(&dh_det);
    let df_trk = dh_trk
        .iter()
        .map(|d| d.iter().zip(&s_det).map(|(a, b)| a + b / m as f64).collect())
        .collect();
    let df_det = dh_det
        .iter()
        .map(|d| d.iter().zip(&s_trk).map(|(a, b)| a + b / n as f64).collect())
        .collect();
    (df_trk, df_det)
}
