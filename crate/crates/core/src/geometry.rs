//! Oriented 3D boxes and the overlap measures used for matching.
//!
//! Frame convention: `x` forward, `y` left, `z` up. Heading `theta` is
//! measured counter-clockwise from `+x` in the ground plane; the box length
//! `l` runs along the heading and the width `w` perpendicular to it. `z` is
//! the vertical center of the box, so its vertical extent is
//! `[z - h/2, z + h/2]`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Polygons with less area than this are treated as empty.
pub const AREA_EPS: f64 = 1e-12;

/// Wraps an angle into `[-pi, pi)`.
pub fn normalize_angle(theta: f64) -> f64 {
    let two_pi = 2.0 * PI;
    let mut t = theta - two_pi * ((theta + PI) / two_pi).floor();
    if t >= PI {
        t -= two_pi;
    }
    if t < -PI {
        t = -PI;
    }
    t
}

/// Oriented 3D bounding box.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Box3D {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub l: f64,
    pub w: f64,
    pub h: f64,
    pub theta: f64,
}

impl Box3D {
    /// Builds a validated box with the heading wrapped into `[-pi, pi)`.
    pub fn new(x: f64, y: f64, z: f64, l: f64, w: f64, h: f64, theta: f64) -> Result<Self> {
        let b = Box3D {
            x,
            y,
            z,
            l,
            w,
            h,
            theta: normalize_angle(theta),
        };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [self.x, self.y, self.z, self.l, self.w, self.h, self.theta];
        if fields.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidBox(format!("non-finite field in {self:?}")));
        }
        if self.l <= 0.0 || self.w <= 0.0 || self.h <= 0.0 {
            return Err(Error::InvalidBox(format!(
                "non-positive extent l={} w={} h={}",
                self.l, self.w, self.h
            )));
        }
        Ok(())
    }

    pub fn center(&self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    pub fn volume(&self) -> f64 {
        self.l * self.w * self.h
    }

    pub fn bottom(&self) -> f64 {
        self.z - 0.5 * self.h
    }

    pub fn top(&self) -> f64 {
        self.z + 0.5 * self.h
    }

    /// Ground-plane footprint, counter-clockwise.
    pub fn footprint(&self) -> [[f64; 2]; 4] {
        let (s, c) = self.theta.sin_cos();
        let hl = 0.5 * self.l;
        let hw = 0.5 * self.w;
        let local = [[hl, hw], [-hl, hw], [-hl, -hw], [hl, -hw]];
        local.map(|[lx, ly]| [self.x + c * lx - s * ly, self.y + s * lx + c * ly])
    }

    /// Same box with its center moved by `(dx, dy, dz)`.
    pub fn translated(&self, dx: f64, dy: f64, dz: f64) -> Self {
        Box3D {
            x: self.x + dx,
            y: self.y + dy,
            z: self.z + dz,
            ..*self
        }
    }

    /// Rotates the box about the vertical axis through the origin.
    pub fn rotated_about_origin(&self, angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        Box3D {
            x: c * self.x - s * self.y,
            y: s * self.x + c * self.y,
            theta: normalize_angle(self.theta + angle),
            ..*self
        }
    }
}

/// Axis-aligned image rectangle given by its center and extent, in pixels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Box2D {
    pub xc: f64,
    pub yc: f64,
    pub w: f64,
    pub h: f64,
}

impl Box2D {
    pub fn left(&self) -> f64 {
        self.xc - 0.5 * self.w
    }
    pub fn right(&self) -> f64 {
        self.xc + 0.5 * self.w
    }
    pub fn top(&self) -> f64 {
        self.yc - 0.5 * self.h
    }
    pub fn bottom(&self) -> f64 {
        self.yc + 0.5 * self.h
    }

    pub fn from_corners(left: f64, top: f64, right: f64, bottom: f64) -> Self {
        Box2D {
            xc: 0.5 * (left + right),
            yc: 0.5 * (top + bottom),
            w: right - left,
            h: bottom - top,
        }
    }
}

/// 3x4 projection matrix taking box-frame points to homogeneous pixels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraMatrix(pub [[f64; 4]; 3]);

impl CameraMatrix {
    pub fn new(rows: [[f64; 4]; 3]) -> Result<Self> {
        if rows.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::InvalidBox("non-finite camera matrix entry".into()));
        }
        Ok(CameraMatrix(rows))
    }

    /// KITTI left color camera intrinsics composed with the change of axes
    /// from the tracking frame (x forward, y left, z up) to the camera frame
    /// (x right, y down, z forward).
    pub fn kitti_default() -> Self {
        let k = [
            [721.5377, 0.0, 609.5593, 44.85728],
            [0.0, 721.5377, 172.854, 0.2163791],
            [0.0, 0.0, 1.0, 0.002745884],
        ];
        // camera = (-y, -z, x)
        let axes = [[0.0, -1.0, 0.0], [0.0, 0.0, -1.0], [1.0, 0.0, 0.0]];
        let mut p = [[0.0; 4]; 3];
        for r in 0..3 {
            for c in 0..3 {
                p[r][c] = (0..3).map(|k_| k[r][k_] * axes[k_][c]).sum();
            }
            p[r][3] = k[r][3];
        }
        CameraMatrix(p)
    }

    /// Projects a point; returns `(u, v, depth)`.
    pub fn project(&self, p: [f64; 3]) -> (f64, f64, f64) {
        let m = &self.0;
        let h = |r: usize| m[r][0] * p[0] + m[r][1] * p[1] + m[r][2] * p[2] + m[r][3];
        let d = h(2);
        (h(0) / d, h(1) / d, d)
    }
}

/// The eight vertices: bottom face first, then top face, each counter-clockwise.
pub fn corners_3d(b: &Box3D) -> [[f64; 3]; 8] {
    let fp = b.footprint();
    let (lo, hi) = (b.bottom(), b.top());
    let mut out = [[0.0; 3]; 8];
    for (i, [x, y]) in fp.iter().copied().enumerate() {
        out[i] = [x, y, lo];
        out[i + 4] = [x, y, hi];
    }
    out
}

/// Minimum axis-aligned rectangle around the projected corners.
pub fn project_to_image(b: &Box3D, cam: &CameraMatrix) -> Result<Box2D> {
    let mut min = [f64::INFINITY; 2];
    let mut max = [f64::NEG_INFINITY; 2];
    for c in corners_3d(b) {
        let (u, v, depth) = cam.project(c);
        if !(depth > 0.0) {
            return Err(Error::NonPositiveDepth { depth });
        }
        min[0] = min[0].min(u);
        min[1] = min[1].min(v);
        max[0] = max[0].max(u);
        max[1] = max[1].max(v);
    }
    Ok(Box2D::from_corners(min[0], min[1], max[0], max[1]))
}

pub fn center_distance(a: &Box3D, b: &Box3D, planar: bool) -> f64 {
    let dx = a.x - b.x;
    let dy = a.y - b.y;
    let dz = if planar { 0.0 } else { a.z - b.z };
    (dx * dx + dy * dy + dz * dz).sqrt()
}

/// Shoelace area, positive for counter-clockwise polygons.
pub fn polygon_area(poly: &[[f64; 2]]) -> f64 {
    let n = poly.len();
    if n < 3 {
        return 0.0;
    }
    let mut acc = 0.0;
    for i in 0..n {
        let [x0, y0] = poly[i];
        let [x1, y1] = poly[(i + 1) % n];
        acc += x0 * y1 - x1 * y0;
    }
    0.5 * acc
}

fn cross(o: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

/// Sutherland-Hodgman clipping of `subject` against the convex,
/// counter-clockwise polygon `clip`.
pub fn clip_convex(subject: &[[f64; 2]], clip: &[[f64; 2]]) -> Vec<[f64; 2]> {
    let mut output: Vec<[f64; 2]> = subject.to_vec();
    let n = clip.len();
    for i in 0..n {
        if output.is_empty() {
            break;
        }
        let a = clip[i];
        let b = clip[(i + 1) % n];
        let input = std::mem::take(&mut output);
        let m = input.len();
        for j in 0..m {
            let cur = input[j];
            let prev = input[(j + m - 1) % m];
            let cur_in = cross(a, b, cur) >= 0.0;
            let prev_in = cross(a, b, prev) >= 0.0;
            if cur_in {
                if !prev_in {
                    output.push(segment_line_intersection(prev, cur, a, b));
                }
                output.push(cur);
            } else if prev_in {
                output.push(segment_line_intersection(prev, cur, a, b));
            }
        }
    }
    output
}

fn segment_line_intersection(p: [f64; 2], q: [f64; 2], a: [f64; 2], b: [f64; 2]) -> [f64; 2] {
    let dp = cross(a, b, p);
    let dq = cross(a, b, q);
    let denom = dp - dq;
    if denom == 0.0 {
        return q;
    }
    let t = dp / denom;
    [p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1])]
}

/// Area of the ground-plane footprint intersection.
pub fn bev_intersection_area(a: &Box3D, b: &Box3D) -> f64 {
    // Cheap reject on bounding circles.
    let ra = 0.5 * a.l.hypot(a.w);
    let rb = 0.5 * b.l.hypot(b.w);
    if center_distance(a, b, true) > ra + rb {
        return 0.0;
    }
    let inter = clip_convex(&a.footprint(), &b.footprint());
    let area = polygon_area(&inter);
    if area < AREA_EPS {
        0.0
    } else {
        area
    }
}

/// Bird's-eye-view IoU of the rotated footprints.
pub fn iou_bev(a: &Box3D, b: &Box3D) -> f64 {
    let inter = symmetric(a, b, bev_intersection_area);
    if inter == 0.0 {
        return 0.0;
    }
    let union = a.l * a.w + b.l * b.w - inter;
    (inter / union).clamp(0.0, 1.0)
}

pub fn iou_3d(a: &Box3D, b: &Box3D) -> f64 {
    let dz = a.top().min(b.top()) - a.bottom().max(b.bottom());
    if dz <= 0.0 {
        return 0.0;
    }
    let inter_area = symmetric(a, b, bev_intersection_area);
    if inter_area == 0.0 {
        return 0.0;
    }
    let inter = inter_area * dz;
    let union = a.volume() + b.volume() - inter;
    (inter / union).clamp(0.0, 1.0)
}

/// Evaluates a binary measure with a canonical argument order so that the
/// result is bit-identical under swapping.
fn symmetric(a: &Box3D, b: &Box3D, f: impl Fn(&Box3D, &Box3D) -> f64) -> f64 {
    let ka = [a.x, a.y, a.z, a.l, a.w, a.h, a.theta];
    let kb = [b.x, b.y, b.z, b.l, b.w, b.h, b.theta];
    let ord = ka
        .iter()
        .zip(kb.iter())
        .map(|(p, q)| p.total_cmp(q))
        .find(|o| o.is_ne())
        .unwrap_or(std::cmp::Ordering::Equal);
    if ord.is_gt() {
        f(b, a)
    } else {
        f(a, b)
    }
}
