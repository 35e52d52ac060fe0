//! Experiment configuration: JSON on disk, validated with field paths.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::blockage::BlockageConfig;
use crate::context::ContextConfig;
use crate::error::{Error, Result};
use crate::link::Strategy;
use crate::radar::RadarConfig;
use crate::radio::{scan_duration, RadioConfig};
use crate::scene::Scene;
use crate::tracking::TrackerConfig;

fn default_strategies() -> Vec<Strategy> {
    Strategy::ALL.to_vec()
}

fn default_recal() -> Option<f64> {
    Some(0.5)
}

fn default_timestep() -> f64 {
    0.01
}

fn default_true() -> bool {
    true
}

fn default_alpha() -> f64 {
    0.05
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scene: Scene,
    #[serde(default)]
    pub radar: RadarConfig,
    #[serde(default)]
    pub radio: RadioConfig,
    #[serde(default)]
    pub context: ContextConfig,
    #[serde(default)]
    pub tracker: TrackerConfig,
    #[serde(default)]
    pub blockage: BlockageConfig,
    #[serde(default = "default_strategies")]
    pub strategies: Vec<Strategy>,
    /// Beam-scan period; `null` scans only once at t = 0.
    #[serde(default = "default_recal")]
    pub recal_period: Option<f64>,
    #[serde(default = "default_timestep")]
    pub timestep: f64,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    /// Proactive path switching on predicted blockage.
    #[serde(default = "default_true")]
    pub mitigation: bool,
    #[serde(default = "default_alpha")]
    pub clutter_alpha: f64,
    /// Write every radar frame as a binary dump.
    #[serde(default)]
    pub dump_frames: bool,
}

impl ExperimentConfig {
    pub fn new(scene: Scene) -> Self {
        ExperimentConfig {
            scene,
            radar: RadarConfig::default(),
            radio: RadioConfig::default(),
            context: ContextConfig::default(),
            tracker: TrackerConfig::default(),
            blockage: BlockageConfig::default(),
            strategies: default_strategies(),
            recal_period: default_recal(),
            timestep: default_timestep(),
            output_dir: None,
            mitigation: true,
            clutter_alpha: default_alpha(),
            dump_frames: false,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(text).map_err(|e| {
            Error::config(format!("line {} column {}", e.line(), e.column()), e.to_string())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::config(path.display().to_string(), e.to_string()))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        // plain data: serialization cannot fail
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Number of timesteps between two events of period `period`.
    pub fn steps_per(&self, period: f64) -> usize {
        (period / self.timestep).round() as usize
    }

    pub fn n_steps(&self) -> usize {
        (self.scene.duration / self.timestep).round() as usize
    }

    pub fn validate(&self) -> Result<()> {
        self.scene.validate()?;
        self.radar.validate()?;
        self.radio.validate()?;
        let dt = self.timestep;
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::config("timestep", "must be > 0"));
        }
        if dt > self.radar.frame_period {
            return Err(Error::config("timestep", "must not exceed radar.frame_period"));
        }
        let multiple = |x: f64| ((x / dt) - (x / dt).round()).abs() < 1e-6;
        if !multiple(self.radar.frame_period) {
            return Err(Error::config("radar.frame_period", "must be a multiple of timestep"));
        }
        if let Some(p) = self.recal_period {
            if !(p > 0.0) || !multiple(p) {
                return Err(Error::config("recal_period", "must be a positive multiple of timestep"));
            }
            if p <= scan_duration(&self.radio) + self.radio.feedback_duration {
                return Err(Error::config("recal_period", "must exceed beam-scan plus feedback time"));
            }
        }
        if self.strategies.is_empty() {
            return Err(Error::config("strategies", "at least one strategy required"));
        }
        for (i, s) in self.strategies.iter().enumerate() {
            if self.strategies[..i].contains(s) {
                return Err(Error::config(format!("strategies[{i}]"), format!("duplicate strategy {s}")));
            }
        }
        if !(self.clutter_alpha > 0.0 && self.clutter_alpha <= 1.0) {
            return Err(Error::config("clutter_alpha", "must be in (0, 1]"));
        }
        if !(self.blockage.region_width > 0.0) {
            return Err(Error::config("blockage.region_width", "must be > 0"));
        }
        if !(self.blockage.blocker_length > 0.0) {
            return Err(Error::config("blockage.blocker_length", "must be > 0"));
        }
        Ok(())
    }
}
