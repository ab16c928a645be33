//! Synthetic world and detector model.
//!
//! Cars move at constant velocity inside a rectangular arena ahead of the
//! sensor. The detector reports each visible car with Gaussian box noise and
//! adds Poisson clutter, part of which comes from a few static clutter
//! sources that fire repeatedly (and therefore form tracks). Scores are on an
//! unbounded logit-like scale:
//!
//! ```text
//! TP: mu_tp - decay * range + drift(t) + N(0, sigma_tp)
//! FP: mu_fp               + drift(t) + N(0, sigma_fp)
//! ```
//!
//! `drift(t)` is shared by every detection of frame `t`: a sinusoid plus a
//! piecewise-constant regime level. It moves whole score distributions from
//! frame to frame, so a single global threshold cannot follow it.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};
use serde::{Deserialize, Serialize};

use crate::detection::{Detection, Frame, GtObject, Sequence};
use crate::error::{Error, Result};
use crate::geometry::{normalize_angle, Box3D};

/// Height of the sensor above the ground plane (KITTI Velodyne mount).
pub const SENSOR_HEIGHT: f64 = 1.65;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimConfig {
    pub num_frames: usize,
    /// Arena extent along x (forward), meters.
    pub x_range: [f64; 2],
    /// Arena extent along y (left), meters.
    pub y_range: [f64; 2],
    /// Inclusive range of the object count at frame 0.
    pub initial_objects: [usize; 2],
    pub max_objects: usize,
    pub spawn_prob: f64,
    pub despawn_prob: f64,
    /// Speed range, meters per frame.
    pub speed_range: [f64; 2],
    /// Standard deviation of the per-frame heading change, radians.
    pub heading_jitter: f64,
    /// Mean car size `[l, w, h]`.
    pub car_size: [f64; 3],
    pub car_size_sigma: [f64; 3],
    pub sigma_pos: f64,
    pub sigma_size: f64,
    pub sigma_theta: f64,
    /// Miss probability is `miss_base + miss_slope * range`, clamped to [0, 1].
    pub miss_base: f64,
    pub miss_slope: f64,
    /// Poisson mean of false positives per frame.
    pub fp_rate: f64,
    /// Fraction of false positives emitted by the static clutter sources.
    pub fp_persistent_frac: f64,
    pub clutter_sources: usize,
    /// Fraction of random false positives drawn with a car-like size.
    pub fp_car_like_frac: f64,
    pub mu_tp: f64,
    pub mu_fp: f64,
    /// Score lost per meter of planar range (true positives only).
    pub decay: f64,
    pub sigma_tp: f64,
    pub sigma_fp: f64,
    pub drift_amp: f64,
    /// Sinusoid period in frames.
    pub drift_period: f64,
    /// Per-frame probability of jumping to a new regime level.
    pub regime_switch_prob: f64,
    /// Regime levels, drawn uniformly at each switch.
    pub regime_levels: Vec<f64>,
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            num_frames: 100,
            x_range: [5.0, 65.0],
            y_range: [-25.0, 25.0],
            initial_objects: [4, 8],
            max_objects: 12,
            spawn_prob: 0.1,
            despawn_prob: 0.01,
            speed_range: [0.0, 1.2],
            heading_jitter: 0.02,
            car_size: [3.9, 1.6, 1.5],
            car_size_sigma: [0.2, 0.08, 0.08],
            sigma_pos: 0.1,
            sigma_size: 0.05,
            sigma_theta: 0.05,
            miss_base: 0.02,
            miss_slope: 0.001,
            fp_rate: 4.0,
            fp_persistent_frac: 0.3,
            clutter_sources: 3,
            fp_car_like_frac: 0.02,
            mu_tp: 9.0,
            mu_fp: 0.5,
            decay: 0.03,
            sigma_tp: 1.0,
            sigma_fp: 1.4,
            drift_amp: 1.0,
            drift_period: 40.0,
            regime_switch_prob: 0.05,
            regime_levels: vec![0.0, 0.0, 1.5, -1.0, -5.0],
            seed: 0,
        }
    }
}

impl SimConfig {
    /// Named benchmark presets: `default`, `drift` and `crossed`.
    pub fn preset(name: &str) -> Result<Self> {
        let base = SimConfig::default();
        match name {
            "default" => Ok(base),
            // strong frame-to-frame shifts of the whole score distribution
            "drift" => Ok(SimConfig {
                drift_amp: 2.5,
                drift_period: 30.0,
                regime_switch_prob: 0.08,
                regime_levels: vec![-6.0, -3.0, 0.0, 2.0],
                ..base
            }),
            // far true positives score below clutter in the same frame
            "crossed" => Ok(SimConfig {
                mu_tp: 8.0,
                decay: 0.15,
                mu_fp: 2.5,
                sigma_fp: 1.5,
                fp_car_like_frac: 0.0,
                fp_persistent_frac: 0.0,
                drift_amp: 0.5,
                regime_levels: vec![0.0],
                ..base
            }),
            other => Err(Error::Config(format!(
                "unknown simulator preset '{other}' (expected default, drift or crossed)"
            ))),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let prob = |name: &str, p: f64| -> Result<()> {
            if (0.0..=1.0).contains(&p) {
                Ok(())
            } else {
                Err(Error::Config(format!("{name} must lie in [0, 1], got {p}")))
            }
        };
        prob("spawn_prob", self.spawn_prob)?;
        prob("despawn_prob", self.despawn_prob)?;
        prob("fp_persistent_frac", self.fp_persistent_frac)?;
        prob("fp_car_like_frac", self.fp_car_like_frac)?;
        prob("regime_switch_prob", self.regime_switch_prob)?;
        let sigmas = [
            self.sigma_pos,
            self.sigma_size,
            self.sigma_theta,
            self.sigma_tp,
            self.sigma_fp,
            self.heading_jitter,
            self.car_size_sigma[0],
            self.car_size_sigma[1],
            self.car_size_sigma[2],
        ];
        if sigmas.iter().any(|s| !(*s >= 0.0) || !s.is_finite()) {
            return Err(Error::Config("standard deviations must be finite and >= 0".into()));
        }
        let ordered = |name: &str, r: [f64; 2]| -> Result<()> {
            if r[0].is_finite() && r[1].is_finite() && r[0] <= r[1] {
                Ok(())
            } else {
                Err(Error::Config(format!("{name} must be an ordered finite pair")))
            }
        };
        ordered("x_range", self.x_range)?;
        ordered("y_range", self.y_range)?;
        ordered("speed_range", self.speed_range)?;
        if self.x_range[0] <= 0.0 {
            return Err(Error::Config("arena must lie ahead of the sensor (x_range > 0)".into()));
        }
        if self.initial_objects[0] > self.initial_objects[1] {
            return Err(Error::Config("initial_objects must be an ordered pair".into()));
        }
        if self.car_size.iter().any(|&v| !(v > 0.0)) {
            return Err(Error::Config("car_size entries must be positive".into()));
        }
        if !(self.fp_rate >= 0.0) || !self.fp_rate.is_finite() {
            return Err(Error::Config("fp_rate must be finite and >= 0".into()));
        }
        if self.regime_levels.is_empty() {
            return Err(Error::Config("regime_levels must not be empty".into()));
        }
        if !(self.drift_period > 0.0) {
            return Err(Error::Config("drift_period must be positive".into()));
        }
        let finite = [
            self.mu_tp,
            self.mu_fp,
            self.decay,
            self.drift_amp,
            self.miss_base,
            self.miss_slope,
        ];
        if finite.iter().any(|v| !v.is_finite()) || self.regime_levels.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config("score model parameters must be finite".into()));
        }
        Ok(())
    }

    pub fn miss_probability(&self, range: f64) -> f64 {
        (self.miss_base + self.miss_slope * range).clamp(0.0, 1.0)
    }
}

/// One simulated sequence with its generative bookkeeping.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimSequence {
    pub sequence: Sequence,
    /// Per frame and detection: the ground-truth id that produced it.
    pub sources: Vec<Vec<Option<u64>>>,
    /// Score drift of every frame.
    pub drift: Vec<f64>,
}

#[derive(Debug, Clone, Copy)]
struct Mover {
    id: u64,
    bbox: Box3D,
    speed: f64,
}

fn gauss(rng: &mut ChaCha8Rng, sigma: f64) -> f64 {
    if sigma == 0.0 {
        0.0
    } else {
        Normal::new(0.0, sigma).expect("validated sigma").sample(rng)
    }
}

fn draw(rng: &mut ChaCha8Rng, r: [f64; 2]) -> f64 {
    if r[0] == r[1] {
        r[0]
    } else {
        rng.gen_range(r[0]..r[1])
    }
}

fn car_box(cfg: &SimConfig, rng: &mut ChaCha8Rng, x: f64, y: f64, theta: f64) -> Box3D {
    let size: Vec<f64> = (0..3)
        .map(|k| (cfg.car_size[k] + gauss(rng, cfg.car_size_sigma[k])).max(0.3 * cfg.car_size[k]))
        .collect();
    Box3D::new(x, y, -SENSOR_HEIGHT + size[2] / 2.0, size[0], size[1], size[2], theta).expect("finite car box")
}

fn inside(cfg: &SimConfig, b: &Box3D) -> bool {
    (cfg.x_range[0]..=cfg.x_range[1]).contains(&b.x) && (cfg.y_range[0]..=cfg.y_range[1]).contains(&b.y)
}

fn spawn(cfg: &SimConfig, rng: &mut ChaCha8Rng, next_id: &mut u64) -> Mover {
    let x = draw(rng, cfg.x_range);
    let y = draw(rng, cfg.y_range);
    let theta = rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI);
    let bbox = car_box(cfg, rng, x, y, theta);
    let id = *next_id;
    *next_id += 1;
    Mover {
        id,
        bbox,
        speed: draw(rng, cfg.speed_range),
    }
}

/// Ground-truth objects of every frame. Objects leave when they exit the
/// arena or despawn at random; new ones spawn up to `max_objects`.
pub fn generate_scene(cfg: &SimConfig, rng: &mut ChaCha8Rng) -> Vec<Vec<GtObject>> {
    let mut next_id = 0u64;
    let n0 = if cfg.initial_objects[0] == cfg.initial_objects[1] {
        cfg.initial_objects[0]
    } else {
        rng.gen_range(cfg.initial_objects[0]..=cfg.initial_objects[1])
    };
    let mut alive: Vec<Mover> = (0..n0.min(cfg.max_objects))
        .map(|_| spawn(cfg, rng, &mut next_id))
        .collect();
    let mut frames = Vec::with_capacity(cfg.num_frames);
    for t in 0..cfg.num_frames {
        if t > 0 {
            for m in alive.iter_mut() {
                let theta = normalize_angle(m.bbox.theta + gauss(rng, cfg.heading_jitter));
                m.bbox.x += m.speed * theta.cos();
                m.bbox.y += m.speed * theta.sin();
                m.bbox.theta = theta;
            }
            alive.retain(|m| inside(cfg, &m.bbox));
            let mut kept = Vec::with_capacity(alive.len());
            for m in alive {
                if !rng.gen_bool(cfg.despawn_prob) {
                    kept.push(m);
                }
            }
            alive = kept;
            if alive.len() < cfg.max_objects && rng.gen_bool(cfg.spawn_prob) {
                alive.push(spawn(cfg, rng, &mut next_id));
            }
        }
        frames.push(alive.iter().map(|m| GtObject { id: m.id, bbox: m.bbox }).collect());
    }
    frames
}

/// Shared score offset of every frame: sinusoid plus regime level.
pub fn drift_series(cfg: &SimConfig, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let phase = rng.gen_range(0.0..std::f64::consts::TAU);
    let pick = |rng: &mut ChaCha8Rng| cfg.regime_levels[rng.gen_range(0..cfg.regime_levels.len())];
    let mut level = pick(rng);
    (0..cfg.num_frames)
        .map(|t| {
            if t > 0 && rng.gen_bool(cfg.regime_switch_prob) {
                level = pick(rng);
            }
            cfg.drift_amp * (std::f64::consts::TAU * t as f64 / cfg.drift_period + phase).sin() + level
        })
        .collect()
}

/// Random clutter is occasionally car-shaped; static sources never are.
fn clutter_box(cfg: &SimConfig, rng: &mut ChaCha8Rng, car_like: f64) -> Box3D {
    let x = draw(rng, cfg.x_range);
    let y = draw(rng, cfg.y_range);
    let theta = rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI);
    if car_like > 0.0 && rng.gen_bool(car_like) {
        return car_box(cfg, rng, x, y, theta);
    }
    // poles, bushes, pedestrians-sized blobs and the odd oversized segment
    let l = rng.gen_range(0.3..2.6);
    let w = rng.gen_range(0.3..1.2);
    let h = rng.gen_range(0.4..2.4);
    Box3D::new(x, y, -SENSOR_HEIGHT + h / 2.0, l, w, h, theta).expect("finite clutter box")
}

fn jitter(cfg: &SimConfig, rng: &mut ChaCha8Rng, b: &Box3D) -> Box3D {
    let mut out = *b;
    out.x += gauss(rng, cfg.sigma_pos);
    out.y += gauss(rng, cfg.sigma_pos);
    out.z += gauss(rng, cfg.sigma_pos) * 0.5;
    out.l = (out.l + gauss(rng, cfg.sigma_size)).max(0.1);
    out.w = (out.w + gauss(rng, cfg.sigma_size)).max(0.1);
    out.h = (out.h + gauss(rng, cfg.sigma_size)).max(0.1);
    out.theta = normalize_angle(out.theta + gauss(rng, cfg.sigma_theta));
    out
}

/// Detector output for one frame. Returns the detections and, for each, the
/// id of the ground-truth object that produced it (`None` for clutter).
pub fn detect(
    frame: u32,
    gts: &[GtObject],
    clutter: &[Box3D],
    drift: f64,
    cfg: &SimConfig,
    rng: &mut ChaCha8Rng,
) -> (Vec<Detection>, Vec<Option<u64>>) {
    let mut dets = Vec::new();
    let mut src = Vec::new();
    for g in gts {
        let range = g.bbox.x.hypot(g.bbox.y);
        if rng.gen_bool(cfg.miss_probability(range)) {
            continue;
        }
        let score = cfg.mu_tp - cfg.decay * range + drift + gauss(rng, cfg.sigma_tp);
        dets.push(Detection::new(frame, jitter(cfg, rng, &g.bbox), score));
        src.push(Some(g.id));
    }
    let n_fp = if cfg.fp_rate > 0.0 {
        Poisson::new(cfg.fp_rate).expect("validated rate").sample(rng) as usize
    } else {
        0
    };
    for _ in 0..n_fp {
        let b = if !clutter.is_empty() && rng.gen_bool(cfg.fp_persistent_frac) {
            let k = rng.gen_range(0..clutter.len());
            jitter(cfg, rng, &clutter[k])
        } else {
            clutter_box(cfg, rng, cfg.fp_car_like_frac)
        };
        let score = cfg.mu_fp + drift + gauss(rng, cfg.sigma_fp);
        dets.push(Detection::new(frame, b, score));
        src.push(None);
    }
    (dets, src)
}

/// Generator for the sequences of one configuration. Sequence `k` draws from
/// its own ChaCha stream, so any subset can be regenerated independently.
pub fn simulate_sequence(cfg: &SimConfig, index: u64) -> Result<SimSequence> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(index);
    let scene = generate_scene(cfg, &mut rng);
    let drift = drift_series(cfg, &mut rng);
    let clutter: Vec<Box3D> = (0..cfg.clutter_sources)
        .map(|_| clutter_box(cfg, &mut rng, 0.0))
        .collect();
    let mut frames = Vec::with_capacity(scene.len());
    let mut sources = Vec::with_capacity(scene.len());
    for (t, gts) in scene.into_iter().enumerate() {
        let (detections, src) = detect(t as u32, &gts, &clutter, drift[t], cfg, &mut rng);
        frames.push(Frame {
            index: t as u32,
            gts,
            detections,
        });
        sources.push(src);
    }
    Ok(SimSequence {
        sequence: Sequence {
            name: format!("{index:04}"),
            frames,
        },
        sources,
        drift,
    })
}

/// `count` sequences with indices `first..first + count`.
pub fn simulate(cfg: &SimConfig, first: u64, count: usize) -> Result<Vec<SimSequence>> {
    (first..first + count as u64)
        .map(|k| simulate_sequence(cfg, k))
        .collect()
}
