//! Deterministic control policies and the shared observation normalizer.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nncore::{Activation, FlatParams, NetSpec};
use crate::seed;

const NORM_EPS: f64 = 1e-8;
const NORM_CLIP: f64 = 10.0;

/// Welford running mean and variance, one entry per observation coordinate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunningNorm {
    pub count: u64,
    pub mean: Vec<f64>,
    pub m2: Vec<f64>,
}

impl RunningNorm {
    pub fn new(dim: usize) -> Self {
        Self {
            count: 0,
            mean: vec![0.0; dim],
            m2: vec![0.0; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// Sample variance `m2 / max(count - 1, 1)`.
    pub fn variance(&self) -> Vec<f64> {
        let denom = self.count.saturating_sub(1).max(1) as f64;
        self.m2.iter().map(|m| m / denom).collect()
    }

    pub fn update(&mut self, obs: &[f64]) -> Result<()> {
        self.check(obs)?;
        self.count += 1;
        let n = self.count as f64;
        for ((mean, m2), &x) in self.mean.iter_mut().zip(&mut self.m2).zip(obs) {
            let delta = x - *mean;
            *mean += delta / n;
            *m2 += delta * (x - *mean);
        }
        Ok(())
    }

    /// `(obs - mean) / sqrt(var + 1e-8)` clipped to ±10; identity while fewer
    /// than two observations have been seen.
    pub fn normalize(&self, obs: &[f64]) -> Result<Vec<f64>> {
        self.check(obs)?;
        if self.count < 2 {
            return Ok(obs.to_vec());
        }
        let denom = (self.count - 1) as f64;
        Ok(obs
            .iter()
            .zip(&self.mean)
            .zip(&self.m2)
            .map(|((&x, &mu), &m2)| {
                let z = (x - mu) / libm::sqrt(m2 / denom + NORM_EPS);
                z.clamp(-NORM_CLIP, NORM_CLIP)
            })
            .collect())
    }

    fn check(&self, obs: &[f64]) -> Result<()> {
        if obs.len() != self.mean.len() {
            return Err(Error::DimensionMismatch {
                what: "observation",
                expected: self.mean.len(),
                actual: obs.len(),
            });
        }
        Ok(())
    }
}

/// Box bounds of a continuous action space.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ActionBounds {
    pub low: Vec<f64>,
    pub high: Vec<f64>,
}

impl ActionBounds {
    pub fn new(low: Vec<f64>, high: Vec<f64>) -> Self {
        debug_assert_eq!(low.len(), high.len());
        Self { low, high }
    }

    pub fn dim(&self) -> usize {
        self.low.len()
    }

    pub fn midpoint(&self) -> Vec<f64> {
        self.low.iter().zip(&self.high).map(|(l, h)| 0.5 * (l + h)).collect()
    }

    /// Maps `y` in `[-1, 1]` onto the box.
    pub fn scale(&self, y: &[f64]) -> Vec<f64> {
        y.iter()
            .zip(self.low.iter().zip(&self.high))
            .map(|(&y, (&lo, &hi))| (lo + (y + 1.0) * 0.5 * (hi - lo)).clamp(lo, hi))
            .collect()
    }
}

/// The architecture used for controllers: tanh hidden layers, tanh output.
pub fn policy_spec(obs_dim: usize, hidden: &[usize], action_dim: usize) -> Result<NetSpec> {
    let mut sizes = Vec::with_capacity(hidden.len() + 2);
    sizes.push(obs_dim);
    sizes.extend_from_slice(hidden);
    sizes.push(action_dim);
    NetSpec::new(sizes, Activation::Tanh, Activation::Tanh)
}

/// A deterministic controller whose weights are a [`FlatParams`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Policy {
    pub params: FlatParams,
    pub bounds: ActionBounds,
}

impl Policy {
    pub fn new(params: FlatParams, bounds: ActionBounds) -> Result<Self> {
        if params.spec().output_activation() != Activation::Tanh {
            return Err(Error::InvalidSpec("policy output activation must be tanh".into()));
        }
        if params.spec().output_size() != bounds.dim() {
            return Err(Error::DimensionMismatch {
                what: "policy output",
                expected: bounds.dim(),
                actual: params.spec().output_size(),
            });
        }
        Ok(Self { params, bounds })
    }

    pub fn spec(&self) -> &NetSpec {
        self.params.spec()
    }

    /// Action for a raw observation, normalized by `norm` first.
    pub fn act(&self, obs: &[f64], norm: &RunningNorm) -> Result<Vec<f64>> {
        let x = norm.normalize(obs)?;
        let y = self.params.forward(&x)?;
        Ok(self.bounds.scale(&y))
    }
}

/// A freshly initialized policy; same seed, same parameters.
/// A buffer-initialization policy drawn by [`NetSpec::init_params`].
pub fn random_policy(spec: &NetSpec, bounds: ActionBounds, seed_value: u64) -> Result<Policy> {
    let params = spec.init_params(&mut seed::rng(seed_value), 1.0);
    Policy::new(params, bounds)
}
