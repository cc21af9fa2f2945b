//! Run configuration: TOML file, presets and the workdir snapshot.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::TrainError;
use crate::net::NetConfig;
use crate::ppo::PpoConfig;
use crate::pretrain::PretrainConfig;
use crate::selfplay::SelfPlayConfig;

pub const SNAPSHOT: &str = "config.toml";
pub const PRESETS: [&str; 2] = ["table1-best", "selfplay-paper"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ArenaConfig {
    pub games: u64,
    pub seed: u64,
    /// Checkpoint players sample instead of taking the argmax.
    pub sample: bool,
}

impl Default for ArenaConfig {
    fn default() -> Self {
        ArenaConfig {
            games: 10_000,
            seed: 0,
            sample: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PathsConfig {
    pub workdir: PathBuf,
    /// Relative to the workdir.
    pub checkpoints: String,
    /// Relative to the workdir.
    pub logs: String,
}

impl Default for PathsConfig {
    fn default() -> Self {
        PathsConfig {
            workdir: PathBuf::from("run"),
            checkpoints: "checkpoints".into(),
            logs: "logs".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: u64,
    pub ppo: PpoConfig,
    pub network: NetConfig,
    pub selfplay: SelfPlayConfig,
    pub arena: ArenaConfig,
    pub pretrain: PretrainConfig,
    pub paths: PathsConfig,
}

impl RunConfig {
    pub fn preset(name: &str) -> Option<RunConfig> {
        let mut c = RunConfig::default();
        match name {
            "table1-best" => {
                c.ppo.gamma = 0.3;
                c.ppo.lambda = 1.0;
                c.ppo.iteration_steps = 50_000;
            }
            "selfplay-paper" => {
                c.ppo.iteration_steps = 25_000;
                c.selfplay.epsilon = 0.5;
            }
            _ => return None,
        }
        Some(c)
    }

    pub fn from_toml(text: &str) -> Result<RunConfig, TrainError> {
        let c: RunConfig = toml::from_str(text).map_err(|e| TrainError::Config(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    /// A preset name or a path to a TOML file.
    pub fn load(spec: &str) -> Result<RunConfig, TrainError> {
        if let Some(c) = RunConfig::preset(spec) {
            return Ok(c);
        }
        let text = fs::read_to_string(spec)
            .map_err(|e| TrainError::Config(format!("cannot read config {spec}: {e}")))?;
        RunConfig::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), TrainError> {
        self.ppo.validate()?;
        self.selfplay.validate()?;
        self.pretrain.validate()?;
        let n = &self.network;
        if n.channels == 0 || n.hidden == 0 || n.actions == 0 {
            return Err(TrainError::Config("network sizes must be at least 1".into()));
        }
        if !(0.0..1.0).contains(&n.dropout) {
            return Err(TrainError::Config("network.dropout must lie in [0, 1)".into()));
        }
        if self.arena.games == 0 {
            return Err(TrainError::Config("arena.games must be at least 1".into()));
        }
        Ok(())
    }

    /// Writes the effective configuration into `dir`.
    pub fn write_snapshot(&self, dir: impl AsRef<Path>) -> Result<PathBuf, TrainError> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir)?;
        let path = dir.join(SNAPSHOT);
        fs::write(&path, self.to_toml())?;
        Ok(path)
    }
}
