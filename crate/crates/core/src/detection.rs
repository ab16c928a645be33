use serde::{Deserialize, Serialize};

use crate::geometry::{Box2D, Box3D};
use crate::neural::encoder::ScoredBox;

/// One detector output in one frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub frame: u32,
    pub bbox: Box3D,
    /// Raw detector confidence (logit-like, unbounded).
    pub score: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bbox_2d: Option<Box2D>,
}

impl Detection {
    pub fn new(frame: u32, bbox: Box3D, score: f64) -> Self {
        Detection {
            frame,
            bbox,
            score,
            bbox_2d: None,
        }
    }

    pub fn scored(&self) -> ScoredBox {
        ScoredBox::new(self.bbox, self.score)
    }
}

/// A ground-truth object with its persistent identity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GtObject {
    pub id: u64,
    pub bbox: Box3D,
}

/// Ground truth and detections of one frame.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Frame {
    pub index: u32,
    pub gts: Vec<GtObject>,
    pub detections: Vec<Detection>,
}

/// An ordered run of frames from one scene.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Sequence {
    pub name: String,
    pub frames: Vec<Frame>,
}

impl Sequence {
    pub fn num_detections(&self) -> usize {
        self.frames.iter().map(|f| f.detections.len()).sum()
    }

    pub fn num_gts(&self) -> usize {
        self.frames.iter().map(|f| f.gts.len()).sum()
    }
}
