use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{check_action, EnvContract, Environment, Step};
use crate::error::Result;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BimodalBanditConfig {
    pub reward_scale: f64,
}

impl Default for BimodalBanditConfig {
    fn default() -> Self {
        Self { reward_scale: 10.0 }
    }
}

/// One-step task with two equally good actions, `a = ±0.5`, and nothing for
/// their average `a = 0`. Reward `scale * max(0, 1 - 2 * ||a| - 0.5|)`.
pub struct BimodalBandit {
    config: BimodalBanditConfig,
    contract: EnvContract,
}

impl BimodalBandit {
    pub fn new(config: BimodalBanditConfig) -> Self {
        let contract = EnvContract {
            obs_dim: 1,
            action_dim: 1,
            action_low: vec![-1.0],
            action_high: vec![1.0],
            max_steps: 1,
            known_return_range: (0.0, config.reward_scale),
        };
        Self { config, contract }
    }

    pub fn reward(&self, action: f64) -> f64 {
        self.config.reward_scale * (1.0 - 2.0 * (action.abs() - 0.5).abs()).max(0.0)
    }
}

impl Environment for BimodalBandit {
    fn contract(&self) -> &EnvContract {
        &self.contract
    }

    fn reset(&mut self, _seed: u64) -> Vec<f64> {
        vec![1.0]
    }

    fn step(&mut self, action: &[f64]) -> Result<Step> {
        let a = check_action(&self.contract, action, 0)?[0];
        Ok(Step {
            observation: vec![1.0],
            reward: self.reward(a),
            done: true,
        })
    }
}
