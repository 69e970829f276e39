//! JSON checkpoints.

use std::path::Path;

use serde::{Deserialize, Serialize};
use udrlpg_core::generator::GeneratorFragment;
use udrlpg_core::{Generator, Policy, RunningNorm};

use crate::config::RunConfig;
use crate::error::{Result, UdrlpgError};

/// Everything needed to regenerate and evaluate policies after `stage`
/// completed stages.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub stage: usize,
    pub env_steps: u64,
    pub config: RunConfig,
    pub generator: GeneratorFragment,
    pub norm: RunningNorm,
}

impl Checkpoint {
    pub fn generator(&self) -> Result<Generator> {
        Ok(Generator::from_fragment(self.generator.clone(), self.config.generator.adam)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_atomic(path, self.to_json()?.as_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| UdrlpgError::io(path, e))?;
        Self::from_json(&text)
    }
}

/// A single generated policy together with the normalizer it acts under.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolicyFragment {
    pub command: f64,
    pub policy: Policy,
    pub norm: RunningNorm,
}

impl PolicyFragment {
    pub fn save(&self, path: &Path) -> Result<()> {
        write_atomic(path, serde_json::to_string(self)?.as_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| UdrlpgError::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("json.tmp");
    std::fs::write(&tmp, bytes).map_err(|e| UdrlpgError::io(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| UdrlpgError::io(path, e))
}
