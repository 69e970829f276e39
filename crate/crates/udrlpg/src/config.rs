//! Run configuration, read from TOML.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use udrlpg_core::{BufferGeometry, EnvConfig, GeneratorConfig};

use crate::error::{Result, UdrlpgError};

/// Every knob of a training run. Missing fields take the defaults below.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub env: EnvConfig,
    /// Hidden layer widths of the generated policies.
    pub policy_hidden: Vec<usize>,
    pub generator: GeneratorConfig,
    pub buffer: BufferGeometry,
    pub n_init_random: usize,
    pub updates_per_stage: usize,
    pub batch_size: usize,
    pub rollouts_per_stage: usize,
    pub total_stages: usize,
    /// Master seed; fixes the entire run.
    pub seed: u64,
    /// Rollout worker threads; 0 uses all available cores.
    pub workers: usize,
    /// Where run artifacts go. `None` keeps everything in memory.
    pub output_dir: Option<PathBuf>,
    /// Write a per-stage checkpoint every this many stages (0 = only `latest`).
    pub checkpoint_every: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            env: EnvConfig::default(),
            policy_hidden: vec![32],
            generator: GeneratorConfig::default(),
            buffer: BufferGeometry::default(),
            n_init_random: 50,
            updates_per_stage: 100,
            batch_size: 32,
            rollouts_per_stage: 8,
            total_stages: 300,
            seed: 0,
            workers: 0,
            output_dir: None,
            checkpoint_every: 1,
        }
    }
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> std::result::Result<Self, String> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| e.to_string())?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| UdrlpgError::io(path, e))?;
        Self::from_toml_str(&text).map_err(|message| UdrlpgError::Config {
            path: path.to_path_buf(),
            message,
        })
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("run config serializes to TOML")
    }

    pub fn validate(&self) -> std::result::Result<(), String> {
        let counts = [
            ("n_init_random", self.n_init_random),
            ("updates_per_stage", self.updates_per_stage),
            ("batch_size", self.batch_size),
            ("rollouts_per_stage", self.rollouts_per_stage),
            ("buffer.n_buckets", self.buffer.n_buckets),
            ("buffer.capacity_per_bucket", self.buffer.capacity_per_bucket),
        ];
        if let Some((name, _)) = counts.iter().find(|(_, v)| *v == 0) {
            return Err(format!("{name} must be positive"));
        }
        if self.policy_hidden.contains(&0) || self.generator.hidden.contains(&0) {
            return Err("hidden layer widths must be positive".into());
        }
        if !(self.generator.sigma >= 0.0 && self.generator.sigma.is_finite()) {
            return Err("generator.sigma must be a finite value >= 0".into());
        }
        Ok(())
    }
}
