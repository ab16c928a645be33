//! Versioned run configuration shared by every CLI command.

use serde::{Deserialize, Serialize};

use crate::assignment::MatchCriterion;
use crate::error::{Error, Result};
use crate::neural::train::TrainConfig;
use crate::selection::{ModelDims, SelectorConfig};
use crate::simulator::SimConfig;
use crate::tracker::TrackerConfig;

pub const CONFIG_VERSION: u32 = 1;

/// One JSON document. Missing sections take their defaults; unknown keys
/// are rejected at every level. The top-level `seed` overrides the seeds of
/// the simulator and of training.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub version: u32,
    #[serde(default)]
    pub seed: u64,
    /// Number of simulated sequences.
    #[serde(default = "default_sequences")]
    pub sequences: usize,
    /// Object class written to KITTI files.
    #[serde(default = "default_kind")]
    pub object_type: String,
    #[serde(default)]
    pub sim: SimConfig,
    #[serde(default)]
    pub selector: SelectorConfig,
    #[serde(default)]
    pub tracker: TrackerConfig,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default)]
    pub model: ModelDims,
    #[serde(default = "default_criteria")]
    pub criteria: Vec<MatchCriterion>,
}

fn default_sequences() -> usize {
    10
}

fn default_kind() -> String {
    "Car".into()
}

fn default_criteria() -> Vec<MatchCriterion> {
    vec![
        MatchCriterion::Iou3d(0.25),
        MatchCriterion::Iou3d(0.5),
        MatchCriterion::Iou3d(0.7),
        MatchCriterion::CenterDistance(2.0),
    ]
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            version: CONFIG_VERSION,
            seed: 0,
            sequences: default_sequences(),
            object_type: default_kind(),
            sim: SimConfig::default(),
            selector: SelectorConfig::default(),
            tracker: TrackerConfig::default(),
            train: TrainConfig::default(),
            model: ModelDims::default(),
            criteria: default_criteria(),
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let mut cfg: RunConfig = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.apply_seed();
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn apply_seed(&mut self) {
        self.sim.seed = self.seed;
        self.train.seed = self.seed;
    }

    pub fn validate(&self) -> Result<()> {
        if self.version != CONFIG_VERSION {
            return Err(Error::Config(format!(
                "unsupported config version {} (expected {CONFIG_VERSION})",
                self.version
            )));
        }
        if self.criteria.is_empty() {
            return Err(Error::Config("at least one match criterion is required".into()));
        }
        if self.object_type.is_empty() || self.object_type.contains(char::is_whitespace) {
            return Err(Error::Config("object_type must be a single non-empty word".into()));
        }
        for c in &self.criteria {
            c.validate()?;
        }
        self.sim.validate()?;
        self.selector.validate()?;
        self.tracker.validate()?;
        self.train.validate()?;
        self.model.validate()?;
        if self.model.history_len != self.tracker.history_len {
            return Err(Error::Config(format!(
                "model.history_len ({}) must equal tracker.history_len ({})",
                self.model.history_len, self.tracker.history_len
            )));
        }
        Ok(())
    }
}
