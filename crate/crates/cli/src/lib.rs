//! Command implementations behind the `mot3d` binary.
//!
//! A data directory holds one KITTI tracking file per sequence under
//! `label_02/` (ground truth) and `detection/` (scored detections, track id
//! `-1`). Every command loads and checks all of its inputs before it writes
//! anything.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use mot3d_core::config::RunConfig;
use mot3d_core::kitti::{
    emit_kitti_str, from_detections, from_ground_truth, from_tracking, parse_kitti, to_detections, to_ground_truth,
    to_hypotheses,
};
use mot3d_core::labeling::{LabeledFrame, OracleSidecar};
use mot3d_core::metrics::{evaluate, reports_csv, reports_table, EvalSequence, RECALL_STEPS};
use mot3d_core::pipeline::{best_global, label_all, sweep, sweep_csv, track_all, train_selector, training_set};
use mot3d_core::selection::{SelectorMode, SelectorModel};
use mot3d_core::simulator::simulate;
use mot3d_core::tracker::SelectorSetting;
use mot3d_core::{CameraMatrix, Error, Frame, Result, Sequence};

pub const GT_DIR: &str = "label_02";
pub const DET_DIR: &str = "detection";

#[derive(Debug, Parser)]
#[command(
    name = "mot3d",
    version,
    about = "3D multi-object tracking with learned detection selection"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate simulated scenes as KITTI tracking files.
    Simulate {
        #[command(flatten)]
        common: Common,
        /// Index of the first sequence; sequences are independent streams.
        #[arg(long, default_value_t = 0)]
        first: u64,
        /// Output data directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Label detections against ground truth and write oracle sidecars.
    Label {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a selector from labeled frames.
    Train {
        #[command(flatten)]
        common: Common,
        /// Directory written by `label`.
        #[arg(long)]
        labels: PathBuf,
        #[arg(long, value_enum)]
        mode: ModeArg,
        /// Output model JSON.
        #[arg(long)]
        model: PathBuf,
        /// Output loss curve CSV.
        #[arg(long)]
        loss: PathBuf,
    },
    /// Track the detections of a data directory.
    Track {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        data: PathBuf,
        /// Selector model, required by the `frame` and `instance` selectors.
        #[arg(long)]
        model: Option<PathBuf>,
        /// `off`, `frame`, `instance` or `global:<threshold>`; defaults to the config.
        #[arg(long, value_parser = parse_selector)]
        selector: Option<SelectorSetting>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Evaluate tracking results against ground truth.
    Eval {
        #[command(flatten)]
        common: Common,
        /// Data directory holding the ground truth.
        #[arg(long)]
        gt: PathBuf,
        /// Directory written by `track`.
        #[arg(long)]
        results: PathBuf,
        /// Report CSV; the table always goes to stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Global-threshold grid search, the manual baseline.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        data: PathBuf,
        /// Threshold grid as `start:stop:step`.
        #[arg(long, default_value = "-5:10:0.25", value_parser = parse_grid, allow_hyphen_values = true)]
        grid: Grid,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, Args)]
pub struct Common {
    /// Run configuration (JSON); defaults apply when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Overrides the configuration seed.
    #[arg(long)]
    pub seed: Option<u64>,
}

impl Common {
    pub fn load(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        if let Some(s) = self.seed {
            cfg.seed = s;
            cfg.apply_seed();
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Frame,
    Instance,
}

impl From<ModeArg> for SelectorMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Frame => SelectorMode::Frame,
            ModeArg::Instance => SelectorMode::Instance,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Grid(pub Vec<f64>);

fn parse_selector(s: &str) -> std::result::Result<SelectorSetting, String> {
    match s {
        "off" => Ok(SelectorSetting::Off),
        "frame" => Ok(SelectorSetting::Frame),
        "instance" => Ok(SelectorSetting::Instance),
        _ => match s.strip_prefix("global:").map(str::parse::<f64>) {
            Some(Ok(t)) if t.is_finite() => Ok(SelectorSetting::Global { threshold: t }),
            _ => Err(format!(
                "expected off, frame, instance or global:<threshold>, got `{s}`"
            )),
        },
    }
}

fn parse_grid(s: &str) -> std::result::Result<Grid, String> {
    let parts: Vec<f64> = s
        .split(':')
        .map(|p| {
            p.trim()
                .parse::<f64>()
                .map_err(|e| format!("bad grid value `{p}`: {e}"))
        })
        .collect::<std::result::Result<_, _>>()?;
    let [start, stop, step] = parts[..] else {
        return Err(format!("grid must be start:stop:step, got `{s}`"));
    };
    if !(start.is_finite() && stop.is_finite() && step.is_finite()) || step <= 0.0 || stop < start {
        return Err(format!("grid needs finite start <= stop and step > 0, got `{s}`"));
    }
    let n = ((stop - start) / step + 1e-9).floor() as usize + 1;
    if n > 100_000 {
        return Err(format!("grid has {n} points; at most 100000 allowed"));
    }
    Ok(Grid((0..n).map(|k| start + k as f64 * step).collect()))
}

/// Files queued for writing once every input has been checked.
#[derive(Debug, Default)]
struct Outputs(Vec<(PathBuf, String)>);

impl Outputs {
    fn add(&mut self, path: PathBuf, text: String) {
        self.0.push((path, text));
    }

    fn write(self) -> Result<()> {
        for (path, text) in self.0 {
            if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(dir)?;
            }
            fs::write(&path, text)?;
        }
        Ok(())
    }
}

fn camera() -> CameraMatrix {
    CameraMatrix::kitti_default()
}

/// Sorted `(stem, path)` pairs of the files with extension `ext` in `dir`.
fn list_files(dir: &Path, ext: &str) -> Result<Vec<(String, PathBuf)>> {
    let rd = fs::read_dir(dir).map_err(|e| Error::Config(format!("cannot read directory {}: {e}", dir.display())))?;
    let mut out = Vec::new();
    for entry in rd {
        let path = entry?.path();
        if path.extension().and_then(|e| e.to_str()) == Some(ext) {
            if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
                out.push((stem.to_string(), path.clone()));
            }
        }
    }
    out.sort();
    if out.is_empty() {
        return Err(Error::Config(format!("no .{ext} files in {}", dir.display())));
    }
    Ok(out)
}

fn with_path<T>(path: &Path, r: Result<T>) -> Result<T> {
    r.map_err(|e| match e {
        Error::Parse { line, field, message } => Error::Parse {
            line,
            field,
            message: format!("{message} ({})", path.display()),
        },
        Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
        other => other,
    })
}

/// Sequences of a data directory. Ground truth is optional unless `need_gt`;
/// detections must exist for every sequence.
pub fn read_data(dir: &Path, need_gt: bool) -> Result<Vec<Sequence>> {
    let gt_dir = dir.join(GT_DIR);
    if need_gt && !gt_dir.is_dir() {
        return Err(Error::Config(format!(
            "missing ground-truth directory {}",
            gt_dir.display()
        )));
    }
    let mut seqs = Vec::new();
    for (name, det_path) in list_files(&dir.join(DET_DIR), "txt")? {
        let det_lines = with_path(&det_path, parse_kitti(&det_path))?;
        let gt_path = gt_dir.join(format!("{name}.txt"));
        let gt_lines = if gt_path.is_file() {
            with_path(&gt_path, parse_kitti(&gt_path))?
        } else if need_gt {
            return Err(Error::Config(format!("missing ground truth {}", gt_path.display())));
        } else {
            Vec::new()
        };
        let dets = with_path(&det_path, to_detections(&det_lines, 0))?;
        let gts = with_path(&gt_path, to_ground_truth(&gt_lines, dets.len()))?;
        let dets = with_path(&det_path, to_detections(&det_lines, gts.len()))?;
        let frames = gts
            .into_iter()
            .zip(dets)
            .enumerate()
            .map(|(t, (gts, detections))| Frame {
                index: t as u32,
                gts,
                detections,
            })
            .collect();
        seqs.push(Sequence { name, frames });
    }
    Ok(seqs)
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

/// Labeled sequences written by `label`, in name order.
pub fn read_labels(dir: &Path) -> Result<Vec<Vec<LabeledFrame>>> {
    list_files(&dir.join("labeled"), "json")?
        .iter()
        .map(|(_, p)| read_json(p))
        .collect()
}

/// Runs one command and returns the text to print on stdout.
pub fn run(cli: Cli) -> Result<String> {
    match cli.command {
        Command::Simulate { common, first, out } => {
            let cfg = common.load()?;
            let sims = simulate(&cfg.sim, first, cfg.sequences)?;
            let cam = camera();
            let mut outs = Outputs::default();
            for s in &sims {
                let seq = &s.sequence;
                let gts: Vec<_> = seq.frames.iter().map(|f| f.gts.clone()).collect();
                let dets: Vec<_> = seq.frames.iter().map(|f| f.detections.clone()).collect();
                let name = format!("{}.txt", seq.name);
                outs.add(
                    out.join(GT_DIR).join(&name),
                    emit_kitti_str(&from_ground_truth(&gts, &cfg.object_type, &cam)),
                );
                outs.add(
                    out.join(DET_DIR).join(&name),
                    emit_kitti_str(&from_detections(&dets, &cfg.object_type, &cam)),
                );
            }
            outs.write()?;
            Ok(format!("simulated {} sequences into {}\n", sims.len(), out.display()))
        }
        Command::Label { common, data, out } => {
            let cfg = common.load()?;
            let seqs = read_data(&data, true)?;
            let labeled = label_all(&seqs, &cfg.selector);
            let mut outs = Outputs::default();
            let (mut tp, mut fp) = (0, 0);
            for (seq, frames) in seqs.iter().zip(&labeled) {
                tp += frames.iter().map(LabeledFrame::num_tp).sum::<usize>();
                fp += frames.iter().map(LabeledFrame::num_fp).sum::<usize>();
                let name = format!("{}.json", seq.name);
                outs.add(out.join("labeled").join(&name), serde_json::to_string(frames)?);
                let sidecar = OracleSidecar::new(&seq.name, frames, &cfg.selector);
                outs.add(out.join("oracle").join(&name), serde_json::to_string_pretty(&sidecar)?);
            }
            outs.write()?;
            Ok(format!(
                "labeled {} sequences: {tp} TP, {fp} FP detections\n",
                seqs.len()
            ))
        }
        Command::Train {
            common,
            labels,
            mode,
            model,
            loss,
        } => {
            let cfg = common.load()?;
            let labeled = read_labels(&labels)?;
            let samples = training_set(&labeled, cfg.tracker.history_len, cfg.tracker.max_age);
            let (m, report) = train_selector(mode.into(), &cfg.model, cfg.selector, &cfg.train, &samples)?;
            let mut outs = Outputs::default();
            outs.add(model.clone(), m.to_json()?);
            outs.add(loss.clone(), report.to_csv());
            outs.write()?;
            let last = report.final_loss().map_or("n/a".to_string(), |l| format!("{l:.6}"));
            let name = match mode {
                ModeArg::Frame => "frame",
                ModeArg::Instance => "instance",
            };
            Ok(format!(
                "trained {name} selector on {} samples, final loss {last}\n",
                samples.len()
            ))
        }
        Command::Track {
            common,
            data,
            model,
            selector,
            out,
        } => {
            let mut cfg = common.load()?;
            if let Some(s) = selector {
                cfg.tracker.selector = s;
            }
            cfg.tracker.validate()?;
            let m = match &model {
                Some(p) => Some(SelectorModel::load(p).map_err(|e| Error::Config(format!("{}: {e}", p.display())))?),
                None => None,
            };
            if cfg.tracker.selector.needs_model().is_some() && m.is_none() {
                return Err(Error::Config(format!(
                    "selector `{}` needs --model",
                    cfg.tracker.selector.name()
                )));
            }
            let seqs = read_data(&data, false)?;
            let results = track_all(&seqs, m.as_ref(), &cfg.tracker)?;
            let cam = camera();
            let mut outs = Outputs::default();
            let mut reported = 0;
            for (seq, r) in seqs.iter().zip(&results) {
                reported += r.num_reported();
                outs.add(
                    out.join("data").join(format!("{}.txt", seq.name)),
                    emit_kitti_str(&from_tracking(&r.frames, &cfg.object_type, &cam)),
                );
                outs.add(out.join("filtered").join(format!("{}.csv", seq.name)), r.filtered_csv());
            }
            outs.write()?;
            Ok(format!(
                "tracked {} sequences with selector {}: {reported} reported boxes\n",
                seqs.len(),
                cfg.tracker.selector.name()
            ))
        }
        Command::Eval {
            common,
            gt,
            results,
            out,
        } => {
            let cfg = common.load()?;
            let mut gts = Vec::new();
            let mut hyps = Vec::new();
            for (name, gt_path) in list_files(&gt.join(GT_DIR), "txt")? {
                let hyp_path = results.join("data").join(format!("{name}.txt"));
                if !hyp_path.is_file() {
                    return Err(Error::Config(format!("missing tracking result {}", hyp_path.display())));
                }
                let gl = with_path(&gt_path, parse_kitti(&gt_path))?;
                let hl = with_path(&hyp_path, parse_kitti(&hyp_path))?;
                let g = with_path(&gt_path, to_ground_truth(&gl, 0))?;
                let h = with_path(&hyp_path, to_hypotheses(&hl, g.len()))?;
                let g = with_path(&gt_path, to_ground_truth(&gl, h.len()))?;
                gts.push(g);
                hyps.push(h);
            }
            let seqs: Vec<EvalSequence<'_>> = hyps
                .iter()
                .zip(&gts)
                .map(|(h, g)| EvalSequence { hyps: h, gts: g })
                .collect();
            let reports = cfg
                .criteria
                .iter()
                .map(|&c| evaluate(&seqs, c, RECALL_STEPS))
                .collect::<Result<Vec<_>>>()?;
            if let Some(p) = out {
                let mut outs = Outputs::default();
                outs.add(p, reports_csv(&reports));
                outs.write()?;
            }
            Ok(reports_table(&reports))
        }
        Command::Sweep {
            common,
            data,
            grid,
            out,
        } => {
            let cfg = common.load()?;
            let seqs = read_data(&data, true)?;
            let labeled = label_all(&seqs, &cfg.selector);
            let mut tracker = cfg.tracker.clone();
            tracker.selector = SelectorSetting::Off;
            let rows = sweep(&seqs, &labeled, &grid.0, &tracker, cfg.criteria[0])?;
            let mut outs = Outputs::default();
            outs.add(out, sweep_csv(&rows));
            outs.write()?;
            Ok(match best_global(&rows, 1.0) {
                Some(b) => format!(
                    "best threshold keeping every TP: {:.3} (FP removal {:.4}, MOTA {:.4})\n",
                    b.threshold,
                    b.stats.fp_removal(),
                    b.mota
                ),
                None => "no threshold keeps every TP\n".to_string(),
            })
        }
    }
}
