use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{check_action, EnvContract, Environment, Step};
use crate::error::Result;
use crate::seed;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PointReacherConfig {
    pub dt: f64,
    pub target: f64,
    /// Walls at `±position_limit`; hitting one zeroes the velocity.
    pub position_limit: f64,
    pub max_steps: usize,
    pub init_noise: f64,
}

impl Default for PointReacherConfig {
    fn default() -> Self {
        Self {
            dt: 0.05,
            target: 1.0,
            position_limit: 2.0,
            max_steps: 200,
            init_noise: 0.05,
        }
    }
}

/// A point mass on a line driven by an acceleration in `[-1, 1]`. Reward is
/// `-|position - target|` per step over a fixed horizon.
pub struct PointReacher {
    config: PointReacherConfig,
    contract: EnvContract,
    position: f64,
    velocity: f64,
    steps: usize,
}

impl PointReacher {
    pub fn new(config: PointReacherConfig) -> Self {
        let worst = config.position_limit + config.target.abs();
        let contract = EnvContract {
            obs_dim: 2,
            action_dim: 1,
            action_low: vec![-1.0],
            action_high: vec![1.0],
            max_steps: config.max_steps,
            known_return_range: (-worst * config.max_steps as f64, 0.0),
        };
        Self {
            config,
            contract,
            position: 0.0,
            velocity: 0.0,
            steps: 0,
        }
    }
}

impl Environment for PointReacher {
    fn contract(&self) -> &EnvContract {
        &self.contract
    }

    fn reset(&mut self, seed_value: u64) -> Vec<f64> {
        let b = self.config.init_noise;
        self.position = if b > 0.0 { seed::rng(seed_value).random_range(-b..=b) } else { 0.0 };
        self.velocity = 0.0;
        self.steps = 0;
        vec![self.position, self.velocity]
    }

    fn step(&mut self, action: &[f64]) -> Result<Step> {
        let accel = check_action(&self.contract, action, self.steps)?[0];
        let c = &self.config;
        self.velocity += c.dt * accel;
        self.position += c.dt * self.velocity;
        if self.position.abs() >= c.position_limit {
            self.position = self.position.clamp(-c.position_limit, c.position_limit);
            self.velocity = 0.0;
        }
        self.steps += 1;
        Ok(Step {
            observation: vec![self.position, self.velocity],
            reward: -(self.position - c.target).abs(),
            done: self.steps >= c.max_steps,
        })
    }
}
