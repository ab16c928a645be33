//! Raw-box feature encoding.
//!
//! Each object is described by its box and detector score as the tuple
//! `[x, y, z, l, w, h, sin theta, cos theta, score]`, scaled to roughly unit
//! range. An object may carry up to `history_len` earlier observations
//! (most recent first), flattened after the current tuple with zero padding,
//! followed by a validity mask. A learned MLP maps that vector to the model
//! feature length.

use serde::{Deserialize, Serialize};

use crate::geometry::Box3D;

/// Length of one encoded observation tuple.
pub const TUPLE_LEN: usize = 9;

/// Divisors applied to `[x, y, z, l, w, h, sin, cos, score]`.
const SCALE: [f64; TUPLE_LEN] = [50.0, 50.0, 2.0, 5.0, 3.0, 3.0, 1.0, 1.0, 10.0];

/// A box with its detector confidence.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoredBox {
    pub bbox: Box3D,
    pub score: f64,
}

impl ScoredBox {
    pub fn new(bbox: Box3D, score: f64) -> Self {
        ScoredBox { bbox, score }
    }
}

/// Encoder input length for a given history capacity.
pub fn input_len(history_len: usize) -> usize {
    TUPLE_LEN * (history_len + 1) + history_len
}

pub fn tuple(obj: &ScoredBox) -> [f64; TUPLE_LEN] {
    let b = &obj.bbox;
    let (s, c) = b.theta.sin_cos();
    let raw = [b.x, b.y, b.z, b.l, b.w, b.h, s, c, obj.score];
    let mut out = [0.0; TUPLE_LEN];
    for k in 0..TUPLE_LEN {
        out[k] = raw[k] / SCALE[k];
    }
    out
}

/// Builds the encoder input vector. History beyond `history_len` entries is
/// ignored.
pub fn raw_input(current: &ScoredBox, history: &[ScoredBox], history_len: usize) -> Vec<f64> {
    let mut v = Vec::with_capacity(input_len(history_len));
    v.extend_from_slice(&tuple(current));
    for slot in 0..history_len {
        match history.get(slot) {
            Some(h) => v.extend_from_slice(&tuple(h)),
            None => v.extend_from_slice(&[0.0; TUPLE_LEN]),
        }
    }
    for slot in 0..history_len {
        v.push(if slot < history.len() { 1.0 } else { 0.0 });
    }
    v
}
