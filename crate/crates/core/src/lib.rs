//! 3D multi-object tracking by detection with learned detection selection.
//!
//! The crate covers oriented-box geometry, optimal assignment, the selection
//! models (frame-level threshold regression and instance-level
//! true-positiveness), an online tracker, CLEAR/AMOTA evaluation, a synthetic
//! detection simulator, and KITTI tracking-format I/O.

// Validation uses negated comparisons so NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod assignment;
pub mod config;
pub mod detection;
pub mod error;
pub mod geometry;
pub mod kitti;
pub mod labeling;
pub mod metrics;
pub mod neural;
pub mod pipeline;
pub mod selection;
pub mod simulator;
pub mod tracker;

pub use detection::{Detection, Frame, GtObject, Sequence};
pub use error::{Error, Result};
pub use geometry::{Box2D, Box3D, CameraMatrix};
