//! The policy generator: a hypernetwork that decodes a scalar return command
//! into a full policy parameter vector.

use alloc::vec;
use alloc::vec::Vec;

use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::buffer::Sample;
use crate::error::{Error, Result};
use crate::nncore::{mse, Activation, AdamConfig, AdamState, FlatParams, NetSpec};
use crate::seed;

/// Fixed affine map from the raw return range onto `[-1, 1]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CommandNorm {
    pub scale: f64,
    pub offset: f64,
}

impl CommandNorm {
    pub fn from_range(r_min: f64, r_max: f64) -> Result<Self> {
        if !(r_min.is_finite() && r_max.is_finite() && r_max > r_min) {
            return Err(Error::Config(alloc::format!("bad return range [{r_min}, {r_max}]")));
        }
        let scale = 2.0 / (r_max - r_min);
        Ok(Self {
            scale,
            offset: -1.0 - r_min * scale,
        })
    }

    pub fn normalize(&self, command: f64) -> f64 {
        self.scale * command + self.offset
    }

    pub fn denormalize(&self, z: f64) -> f64 {
        (z - self.offset) / self.scale
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GeneratorConfig {
    pub hidden: Vec<usize>,
    pub hidden_activation: Activation,
    /// Multiplier on the initial output-layer weights.
    pub output_scale: f64,
    /// Standard deviation of parameter-space exploration noise.
    pub sigma: f64,
    pub adam: AdamConfig,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        Self {
            hidden: vec![64, 64],
            hidden_activation: Activation::Tanh,
            output_scale: 0.01,
            sigma: 0.05,
            adam: AdamConfig::default(),
        }
    }
}

/// Hypernetwork `command -> policy parameters` with its optimizer state.
#[derive(Clone, Debug, PartialEq)]
pub struct Generator {
    rho: FlatParams,
    optimizer: AdamState,
    command_norm: CommandNorm,
    sigma: f64,
    policy_spec: NetSpec,
    /// Commands outside this range are extrapolation probes and get logged.
    return_range: (f64, f64),
}

/// Serializable part of a [`Generator`]: weights, command map and sigma.
/// Optimizer moments are not persisted.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeneratorFragment {
    pub rho: FlatParams,
    pub command_norm: CommandNorm,
    pub sigma: f64,
    pub policy_spec: NetSpec,
    pub return_range: (f64, f64),
}

impl Generator {
    pub fn new(policy_spec: NetSpec, return_range: (f64, f64), config: &GeneratorConfig, seed_value: u64) -> Result<Self> {
        if !(config.sigma >= 0.0 && config.sigma.is_finite()) {
            return Err(Error::Config(alloc::format!("sigma must be >= 0, got {}", config.sigma)));
        }
        let mut sizes = Vec::with_capacity(config.hidden.len() + 2);
        sizes.push(1);
        sizes.extend_from_slice(&config.hidden);
        sizes.push(policy_spec.param_count());
        let spec = NetSpec::new(sizes, config.hidden_activation, Activation::Identity)?;
        let rho = spec.init_params(&mut seed::rng(seed_value), config.output_scale);
        Ok(Self {
            optimizer: AdamState::new(rho.len(), config.adam),
            rho,
            command_norm: CommandNorm::from_range(return_range.0, return_range.1)?,
            sigma: config.sigma,
            policy_spec,
            return_range,
        })
    }

    pub fn from_fragment(fragment: GeneratorFragment, adam: AdamConfig) -> Result<Self> {
        if fragment.rho.spec().output_size() != fragment.policy_spec.param_count() || fragment.rho.spec().input_size() != 1 {
            return Err(Error::DimensionMismatch {
                what: "generator output",
                expected: fragment.policy_spec.param_count(),
                actual: fragment.rho.spec().output_size(),
            });
        }
        Ok(Self {
            optimizer: AdamState::new(fragment.rho.len(), adam),
            rho: fragment.rho,
            command_norm: fragment.command_norm,
            sigma: fragment.sigma,
            policy_spec: fragment.policy_spec,
            return_range: fragment.return_range,
        })
    }

    pub fn to_fragment(&self) -> GeneratorFragment {
        GeneratorFragment {
            rho: self.rho.clone(),
            command_norm: self.command_norm,
            sigma: self.sigma,
            policy_spec: self.policy_spec.clone(),
            return_range: self.return_range,
        }
    }

    pub fn rho(&self) -> &FlatParams {
        &self.rho
    }

    /// Replaces the hypernetwork weights; the spec must not change.
    pub fn set_rho(&mut self, rho: FlatParams) -> Result<()> {
        if rho.spec() != self.rho.spec() {
            return Err(Error::InvalidSpec("generator weights have a different architecture".into()));
        }
        self.rho = rho;
        Ok(())
    }

    pub fn optimizer(&self) -> &AdamState {
        &self.optimizer
    }

    pub fn command_norm(&self) -> CommandNorm {
        self.command_norm
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn policy_spec(&self) -> &NetSpec {
        &self.policy_spec
    }

    /// Deterministic decode of `command` into policy parameters.
    pub fn generate(&self, command: f64) -> Result<FlatParams> {
        if !command.is_finite() {
            return Err(Error::NonFiniteGeneratorOutput { command });
        }
        if command < self.return_range.0 || command > self.return_range.1 {
            log::debug!("command {command} is outside the known return range {:?}", self.return_range);
        }
        let out = self.rho.forward(&[self.command_norm.normalize(command)])?;
        if out.iter().any(|v| !v.is_finite()) {
            log::error!("generator output is not finite for command {command}");
            return Err(Error::NonFiniteGeneratorOutput { command });
        }
        FlatParams::new(self.policy_spec.clone(), out)
    }

    /// Mean over the batch of per-pair MSE, and its gradient w.r.t. the
    /// hypernetwork weights.
    pub fn loss_and_grad(&self, batch: &[Sample<'_>]) -> Result<(f64, Vec<f64>)> {
        if batch.is_empty() {
            return Err(Error::EmptyBuffer);
        }
        let mut grad = vec![0.0; self.rho.len()];
        let mut loss = 0.0;
        for s in batch {
            if s.theta.len() != self.policy_spec.param_count() {
                return Err(Error::DimensionMismatch {
                    what: "target policy parameters",
                    expected: self.policy_spec.param_count(),
                    actual: s.theta.len(),
                });
            }
            let cache = self.rho.forward_cached(&[self.command_norm.normalize(s.command)])?;
            let (l, g) = mse(cache.output(), s.theta.values())?;
            loss += l;
            self.rho.backward_accumulate(&cache, &g, &mut grad)?;
        }
        let n = batch.len() as f64;
        grad.iter_mut().for_each(|g| *g /= n);
        Ok((loss / n, grad))
    }

    /// One Adam step on the batch regression loss; returns the loss measured
    /// before the step. A non-finite loss skips the step.
    pub fn train_batch(&mut self, batch: &[Sample<'_>]) -> Result<f64> {
        let (loss, grad) = self.loss_and_grad(batch)?;
        if !loss.is_finite() {
            log::warn!("skipping generator update: loss is {loss}");
            return Err(Error::NonFiniteLoss);
        }
        self.optimizer.step(self.rho.values_mut(), &grad)?;
        Ok(loss)
    }
}

/// Adds i.i.d. `N(0, sigma^2)` noise to every coordinate.
pub fn perturb(theta: &FlatParams, sigma: f64, seed_value: u64) -> Result<FlatParams> {
    if sigma == 0.0 {
        return Ok(theta.clone());
    }
    let normal = Normal::new(0.0, sigma).map_err(|_| Error::Config(alloc::format!("invalid sigma {sigma}")))?;
    let mut rng = seed::rng(seed_value);
    let mut out = theta.clone();
    for v in out.values_mut() {
        *v += normal.sample(&mut rng);
    }
    Ok(out)
}
