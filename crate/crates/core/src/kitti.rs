//! KITTI tracking text format.
//!
//! A line holds `frame id type truncated occluded alpha left top right bottom
//! h w l x y z rotation_y [score]` in camera coordinates (x right, y down, z
//! forward) with the location at the bottom-face center. Parsing keeps the
//! raw record; [`KittiTrackLine::to_box`] and [`KittiTrackLine::from_box`]
//! convert to and from the center-anchored, z-up [`Box3D`].

use std::f64::consts::FRAC_PI_2;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::detection::{Detection, GtObject};
use crate::error::{Error, Result};
use crate::geometry::{normalize_angle, project_to_image, Box3D, CameraMatrix};
use crate::tracker::TrackedObject;

const FIELDS: [&str; 18] = [
    "frame",
    "track_id",
    "type",
    "truncated",
    "occluded",
    "alpha",
    "left",
    "top",
    "right",
    "bottom",
    "height",
    "width",
    "length",
    "x",
    "y",
    "z",
    "rotation_y",
    "score",
];

/// Token count without and with the trailing score.
pub const NUM_FIELDS: (usize, usize) = (17, 18);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KittiTrackLine {
    pub frame: u32,
    /// -1 for raw detections.
    pub track_id: i64,
    pub kind: String,
    pub truncated: f64,
    pub occluded: i64,
    pub alpha: f64,
    /// left, top, right, bottom in pixels.
    pub bbox: [f64; 4],
    /// h, w, l in meters.
    pub dimensions: [f64; 3],
    /// Bottom-center location in camera coordinates.
    pub location: [f64; 3],
    pub rotation_y: f64,
    pub score: Option<f64>,
}

fn field_err(line: usize, idx: usize, message: String) -> Error {
    Error::Parse {
        line,
        field: FIELDS[idx].to_string(),
        message,
    }
}

fn int<T: std::str::FromStr>(tok: &[&str], line: usize, idx: usize) -> Result<T> {
    tok[idx]
        .parse()
        .map_err(|_| field_err(line, idx, format!("cannot parse '{}' as an integer", tok[idx])))
}

fn real(tok: &[&str], line: usize, idx: usize) -> Result<f64> {
    let v: f64 = tok[idx]
        .parse()
        .map_err(|_| field_err(line, idx, format!("cannot parse '{}' as a number", tok[idx])))?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(field_err(line, idx, format!("non-finite value '{}'", tok[idx])))
    }
}

impl KittiTrackLine {
    /// Parses one line; `line` is 1-based and only used in errors.
    pub fn parse(text: &str, line: usize) -> Result<Self> {
        let tok: Vec<&str> = text.split_whitespace().collect();
        if tok.len() != NUM_FIELDS.0 && tok.len() != NUM_FIELDS.1 {
            return Err(Error::Parse {
                line,
                field: "line".into(),
                message: format!(
                    "expected {} or {} fields, found {}",
                    NUM_FIELDS.0,
                    NUM_FIELDS.1,
                    tok.len()
                ),
            });
        }
        let r = |i| real(&tok, line, i);
        Ok(KittiTrackLine {
            frame: int(&tok, line, 0)?,
            track_id: int(&tok, line, 1)?,
            kind: tok[2].to_string(),
            truncated: r(3)?,
            occluded: int(&tok, line, 4)?,
            alpha: r(5)?,
            bbox: [r(6)?, r(7)?, r(8)?, r(9)?],
            dimensions: [r(10)?, r(11)?, r(12)?],
            location: [r(13)?, r(14)?, r(15)?],
            rotation_y: r(16)?,
            score: if tok.len() == NUM_FIELDS.1 { Some(r(17)?) } else { None },
        })
    }

    /// Fixed formatting: integers as-is, reals with 6 decimals.
    pub fn emit(&self) -> String {
        let mut s = format!(
            "{} {} {} {:.6} {} {:.6}",
            self.frame, self.track_id, self.kind, self.truncated, self.occluded, self.alpha
        );
        for v in self.bbox.iter().chain(&self.dimensions).chain(&self.location) {
            let _ = write!(s, " {v:.6}");
        }
        let _ = write!(s, " {:.6}", self.rotation_y);
        if let Some(score) = self.score {
            let _ = write!(s, " {score:.6}");
        }
        s
    }

    /// Center-anchored box in the x-forward, y-left, z-up frame.
    pub fn to_box(&self) -> Result<Box3D> {
        let [h, w, l] = self.dimensions;
        let [cx, cy, cz] = self.location;
        Box3D::new(cz, -cx, h / 2.0 - cy, l, w, h, -self.rotation_y - FRAC_PI_2)
    }

    /// Record for `b`; the image rectangle comes from projecting with `cam`
    /// and is `-1` everywhere when the box is not fully in front of it.
    pub fn from_box(frame: u32, track_id: i64, kind: &str, b: &Box3D, score: Option<f64>, cam: &CameraMatrix) -> Self {
        let location = [-b.y, b.h / 2.0 - b.z, b.x];
        let rotation_y = normalize_angle(-b.theta - FRAC_PI_2);
        let bbox = match project_to_image(b, cam) {
            Ok(r) => [r.left(), r.top(), r.right(), r.bottom()],
            Err(_) => [-1.0; 4],
        };
        KittiTrackLine {
            frame,
            track_id,
            kind: kind.to_string(),
            truncated: 0.0,
            occluded: 0,
            alpha: normalize_angle(rotation_y - location[0].atan2(location[2])),
            bbox,
            dimensions: [b.h, b.w, b.l],
            location,
            rotation_y,
            score,
        }
    }
}

/// Parses a whole file's text. Blank lines are skipped.
pub fn parse_kitti_str(text: &str) -> Result<Vec<KittiTrackLine>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| KittiTrackLine::parse(l, i + 1))
        .collect()
}

pub fn parse_kitti(path: &Path) -> Result<Vec<KittiTrackLine>> {
    parse_kitti_str(&std::fs::read_to_string(path)?)
}

/// One line per record, ordered by `(frame, track_id)`; the sort is stable.
pub fn emit_kitti_str(lines: &[KittiTrackLine]) -> String {
    let mut sorted: Vec<&KittiTrackLine> = lines.iter().collect();
    sorted.sort_by_key(|l| (l.frame, l.track_id));
    let mut s = String::new();
    for l in sorted {
        s.push_str(&l.emit());
        s.push('\n');
    }
    s
}

pub fn emit_kitti(lines: &[KittiTrackLine], path: &Path) -> Result<()> {
    std::fs::write(path, emit_kitti_str(lines))?;
    Ok(())
}

fn frame_count(lines: &[KittiTrackLine], at_least: usize) -> usize {
    lines
        .iter()
        .map(|l| l.frame as usize + 1)
        .max()
        .unwrap_or(0)
        .max(at_least)
}

/// Ground-truth objects per frame. `DontCare` records are dropped.
pub fn to_ground_truth(lines: &[KittiTrackLine], num_frames: usize) -> Result<Vec<Vec<GtObject>>> {
    let mut out = vec![Vec::new(); frame_count(lines, num_frames)];
    for l in lines.iter().filter(|l| l.kind != "DontCare") {
        if l.track_id < 0 {
            return Err(Error::Config(format!(
                "ground-truth record in frame {} has no track id",
                l.frame
            )));
        }
        out[l.frame as usize].push(GtObject {
            id: l.track_id as u64,
            bbox: l.to_box()?,
        });
    }
    Ok(out)
}

/// Detections per frame; records without a score are rejected.
pub fn to_detections(lines: &[KittiTrackLine], num_frames: usize) -> Result<Vec<Vec<Detection>>> {
    let mut out = vec![Vec::new(); frame_count(lines, num_frames)];
    for l in lines {
        let score = l
            .score
            .ok_or_else(|| Error::Config(format!("detection in frame {} has no score", l.frame)))?;
        out[l.frame as usize].push(Detection::new(l.frame, l.to_box()?, score));
    }
    Ok(out)
}

/// Tracker hypotheses per frame; the score field is the track confidence.
pub fn to_hypotheses(lines: &[KittiTrackLine], num_frames: usize) -> Result<Vec<Vec<TrackedObject>>> {
    let mut out = vec![Vec::new(); frame_count(lines, num_frames)];
    for l in lines {
        if l.track_id < 0 {
            return Err(Error::Config(format!(
                "tracking result in frame {} has no track id",
                l.frame
            )));
        }
        let conf = l.score.unwrap_or(1.0);
        out[l.frame as usize].push(TrackedObject {
            frame: l.frame,
            id: l.track_id as u64,
            bbox: l.to_box()?,
            score: conf,
            confidence: conf,
        });
    }
    Ok(out)
}

pub fn from_ground_truth(frames: &[Vec<GtObject>], kind: &str, cam: &CameraMatrix) -> Vec<KittiTrackLine> {
    frames
        .iter()
        .enumerate()
        .flat_map(|(t, gts)| {
            gts.iter()
                .map(move |g| KittiTrackLine::from_box(t as u32, g.id as i64, kind, &g.bbox, None, cam))
        })
        .collect()
}

pub fn from_detections(frames: &[Vec<Detection>], kind: &str, cam: &CameraMatrix) -> Vec<KittiTrackLine> {
    frames
        .iter()
        .flatten()
        .map(|d| KittiTrackLine::from_box(d.frame, -1, kind, &d.bbox, Some(d.score), cam))
        .collect()
}

pub fn from_tracking(frames: &[Vec<TrackedObject>], kind: &str, cam: &CameraMatrix) -> Vec<KittiTrackLine> {
    frames
        .iter()
        .flatten()
        .map(|o| KittiTrackLine::from_box(o.frame, o.id as i64, kind, &o.bbox, Some(o.confidence), cam))
        .collect()
}
