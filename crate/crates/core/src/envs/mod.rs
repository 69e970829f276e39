//! Native episodic control environments and the rollout loop.

mod bandit;
mod cartpole;
mod reacher;

use alloc::boxed::Box;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

pub use bandit::{BimodalBandit, BimodalBanditConfig};
pub use cartpole::{CartPole, CartPoleConfig};
pub use reacher::{PointReacher, PointReacherConfig};

use crate::error::{Error, Result};
use crate::policy::{ActionBounds, Policy, RunningNorm};

/// Static facts about an environment. Returns are undiscounted.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnvContract {
    pub obs_dim: usize,
    pub action_dim: usize,
    pub action_low: Vec<f64>,
    pub action_high: Vec<f64>,
    pub max_steps: usize,
    /// `[r_min, r_max]`: every episode return lies in this interval.
    pub known_return_range: (f64, f64),
}

impl EnvContract {
    pub fn action_bounds(&self) -> ActionBounds {
        ActionBounds::new(self.action_low.clone(), self.action_high.clone())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Step {
    pub observation: Vec<f64>,
    pub reward: f64,
    pub done: bool,
}

/// Outcome of one episode; `episode_return` is the hindsight label.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeResult {
    pub episode_return: f64,
    pub steps: usize,
}

pub trait Environment: Send {
    fn contract(&self) -> &EnvContract;

    /// Starts a new episode from a seeded initial state.
    fn reset(&mut self, seed: u64) -> Vec<f64>;

    /// Advances one step. Actions are clamped to the action box.
    fn step(&mut self, action: &[f64]) -> Result<Step>;
}

/// Environment selection plus its constants, as read from a run config.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name")]
pub enum EnvConfig {
    #[serde(rename = "cartpole-balance")]
    CartPole(CartPoleConfig),
    #[serde(rename = "point-reacher")]
    PointReacher(PointReacherConfig),
    #[serde(rename = "bimodal-bandit")]
    BimodalBandit(BimodalBanditConfig),
}

impl Default for EnvConfig {
    fn default() -> Self {
        EnvConfig::CartPole(CartPoleConfig::default())
    }
}

impl EnvConfig {
    pub fn name(&self) -> &'static str {
        match self {
            EnvConfig::CartPole(_) => "cartpole-balance",
            EnvConfig::PointReacher(_) => "point-reacher",
            EnvConfig::BimodalBandit(_) => "bimodal-bandit",
        }
    }

    pub fn build(&self) -> Box<dyn Environment> {
        match self {
            EnvConfig::CartPole(c) => Box::new(CartPole::new(c.clone())),
            EnvConfig::PointReacher(c) => Box::new(PointReacher::new(c.clone())),
            EnvConfig::BimodalBandit(c) => Box::new(BimodalBandit::new(c.clone())),
        }
    }

    pub fn contract(&self) -> EnvContract {
        self.build().contract().clone()
    }
}

pub(crate) fn check_action(contract: &EnvContract, action: &[f64], step: usize) -> Result<Vec<f64>> {
    if action.len() != contract.action_dim {
        return Err(Error::DimensionMismatch {
            what: "action",
            expected: contract.action_dim,
            actual: action.len(),
        });
    }
    if action.iter().any(|a| !a.is_finite()) {
        return Err(Error::NonFiniteAction { step });
    }
    Ok(action
        .iter()
        .zip(contract.action_low.iter().zip(&contract.action_high))
        .map(|(&a, (&lo, &hi))| a.clamp(lo, hi))
        .collect())
}

/// Runs one episode, updating `norm` online with every observation the
/// policy acts on.
pub fn rollout(env: &mut dyn Environment, policy: &Policy, norm: &mut RunningNorm, seed: u64) -> Result<EpisodeResult> {
    run_episode(env, policy, norm, seed, None)
}

/// A rollout evaluated against a private copy of a normalizer snapshot.
#[derive(Clone, Debug)]
pub struct TracedRollout {
    pub result: EpisodeResult,
    /// Observations in the order they were fed to the normalizer, flattened.
    pub observations: Vec<f64>,
}

/// Like [`rollout`], but leaves `norm` untouched and returns the observation
/// stream so the caller can apply it later with [`RunningNorm::replay`].
pub fn rollout_traced(env: &mut dyn Environment, policy: &Policy, norm: &RunningNorm, seed: u64) -> Result<TracedRollout> {
    let mut local = norm.clone();
    let mut observations = Vec::new();
    let result = run_episode(env, policy, &mut local, seed, Some(&mut observations))?;
    Ok(TracedRollout { result, observations })
}

fn run_episode(
    env: &mut dyn Environment,
    policy: &Policy,
    norm: &mut RunningNorm,
    seed: u64,
    mut trace: Option<&mut Vec<f64>>,
) -> Result<EpisodeResult> {
    let max_steps = env.contract().max_steps;
    let mut obs = env.reset(seed);
    let mut total = 0.0;
    let mut steps = 0;
    loop {
        if obs.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFiniteObservation { step: steps });
        }
        norm.update(&obs)?;
        if let Some(t) = trace.as_deref_mut() {
            t.extend_from_slice(&obs);
        }
        let action = policy.act(&obs, norm)?;
        let step = env.step(&action)?;
        total += step.reward;
        steps += 1;
        obs = step.observation;
        if step.done || steps >= max_steps {
            break;
        }
    }
    Ok(EpisodeResult {
        episode_return: total,
        steps,
    })
}

impl RunningNorm {
    /// Applies a flattened observation stream recorded by [`rollout_traced`].
    pub fn replay(&mut self, observations: &[f64]) -> Result<()> {
        let dim = self.dim();
        if dim == 0 || !observations.len().is_multiple_of(dim) {
            return Err(Error::DimensionMismatch {
                what: "observation trace",
                expected: dim,
                actual: observations.len(),
            });
        }
        observations.chunks_exact(dim).try_for_each(|o| self.update(o))
    }
}
