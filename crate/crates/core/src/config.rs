//! The layered run configuration: one TOML file with a table per subsystem.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::curriculum::EnsembleSettings;
use crate::env::{EnvConfig, RewardConfig};
use crate::error::{Error, Result};
use crate::policy::GraphConfig;
use crate::ppo::{PpoConfig, ScriptedConfig, TrainSettings};
use crate::replay::RenderStyle;

/// Every table is optional; missing fields take their defaults and unknown fields are
/// rejected. `env.seed` is the single source of randomness for every workflow.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub env: EnvConfig,
    pub reward: RewardConfig,
    pub graph: GraphConfig,
    pub ppo: PpoConfig,
    pub scripted: ScriptedConfig,
    pub train: TrainSettings,
    pub ensemble: EnsembleSettings,
    pub render: RenderStyle,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| {
            let field = e.span().map(|s| key_near(text, s.start)).unwrap_or_else(|| "config".to_string());
            Error::config(field, e.message().to_string())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        self.env.validate()?;
        self.reward.validate()?;
        self.graph.validate()?;
        self.ppo.validate()?;
        for (field, p) in [("scripted.aggression", self.scripted.aggression), ("scripted.shoot_prob", self.scripted.shoot_prob)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::config(field, format!("must be a probability, got {p}")));
            }
        }
        let t = &self.train;
        if t.workers == 0 {
            return Err(Error::config("train.workers", "must be at least 1"));
        }
        if self.ppo.steps_per_iteration < t.workers * self.env.episode_length {
            return Err(Error::config(
                "ppo.steps_per_iteration",
                format!(
                    "must be at least workers × episode_length = {} so every worker finishes an episode each iteration",
                    t.workers * self.env.episode_length
                ),
            ));
        }
        if !(t.smoothing_sigma.is_finite() && t.smoothing_sigma > 0.0) {
            return Err(Error::config("train.smoothing_sigma", "must be positive"));
        }
        if t.extrema_window == 0 {
            return Err(Error::config("train.extrema_window", "must be at least 1"));
        }
        self.render.validate()
    }
}

/// Dotted path of the innermost table and key on the line containing byte `at`.
fn key_near(text: &str, at: usize) -> String {
    let mut table = String::new();
    let mut key = String::new();
    let mut pos = 0;
    for line in text.lines() {
        let trimmed = line.trim();
        if trimmed.starts_with('[') {
            table = trimmed.trim_matches(|c| c == '[' || c == ']').trim().to_string();
        }
        if at >= pos && at <= pos + line.len() {
            if let Some((k, _)) = trimmed.split_once('=') {
                key = k.trim().to_string();
            }
            break;
        }
        pos += line.len() + 1;
    }
    match (table.is_empty(), key.is_empty()) {
        (true, true) => "config".to_string(),
        (true, false) => key,
        (false, true) => table,
        (false, false) => format!("{table}.{key}"),
    }
}
