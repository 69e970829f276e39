use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{check_action, EnvContract, Environment, Step};
use crate::error::Result;
use crate::seed;

/// Constants of the continuous-force cart-pole balance task.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CartPoleConfig {
    pub gravity: f64,
    pub cart_mass: f64,
    pub pole_mass: f64,
    /// Distance from the pivot to the pole's centre of mass.
    pub half_length: f64,
    pub force_max: f64,
    pub dt: f64,
    pub angle_limit: f64,
    pub x_limit: f64,
    pub max_steps: usize,
    /// Each initial state component is uniform in `±init_noise`.
    pub init_noise: f64,
}

impl Default for CartPoleConfig {
    fn default() -> Self {
        Self {
            gravity: 9.8,
            cart_mass: 1.0,
            pole_mass: 0.1,
            half_length: 0.5,
            force_max: 3.0,
            dt: 0.02,
            angle_limit: 0.2,
            x_limit: 2.4,
            max_steps: 1000,
            init_noise: 0.05,
        }
    }
}

/// Cart-pole with Euler integration. Observation `(x, x_dot, phi, phi_dot)`,
/// one force action. Reward is 1 for every step after which the pole is still
/// within the angle limit and the cart within the track.
pub struct CartPole {
    config: CartPoleConfig,
    contract: EnvContract,
    state: [f64; 4],
    steps: usize,
}

impl CartPole {
    pub fn new(config: CartPoleConfig) -> Self {
        let contract = EnvContract {
            obs_dim: 4,
            action_dim: 1,
            action_low: vec![-config.force_max],
            action_high: vec![config.force_max],
            max_steps: config.max_steps,
            known_return_range: (0.0, config.max_steps as f64),
        };
        Self {
            config,
            contract,
            state: [0.0; 4],
            steps: 0,
        }
    }

    /// Places the system in an explicit state, for tests and diagnostics.
    pub fn set_state(&mut self, state: [f64; 4]) {
        self.state = state;
        self.steps = 0;
    }

    pub fn state(&self) -> [f64; 4] {
        self.state
    }

    fn failed(&self) -> bool {
        self.state[0].abs() > self.config.x_limit || self.state[2].abs() > self.config.angle_limit
    }
}

impl Environment for CartPole {
    fn contract(&self) -> &EnvContract {
        &self.contract
    }

    fn reset(&mut self, seed_value: u64) -> Vec<f64> {
        let mut rng = seed::rng(seed_value);
        let b = self.config.init_noise;
        for s in &mut self.state {
            *s = if b > 0.0 { rng.random_range(-b..=b) } else { 0.0 };
        }
        self.steps = 0;
        self.state.to_vec()
    }

    fn step(&mut self, action: &[f64]) -> Result<Step> {
        let force = check_action(&self.contract, action, self.steps)?[0];
        let c = &self.config;
        let [x, x_dot, phi, phi_dot] = self.state;
        let total_mass = c.cart_mass + c.pole_mass;
        let pole_moment = c.pole_mass * c.half_length;
        let (sin, cos) = (libm::sin(phi), libm::cos(phi));
        let temp = (force + pole_moment * phi_dot * phi_dot * sin) / total_mass;
        let phi_acc = (c.gravity * sin - cos * temp)
            / (c.half_length * (4.0 / 3.0 - c.pole_mass * cos * cos / total_mass));
        let x_acc = temp - pole_moment * phi_acc * cos / total_mass;
        self.state = [
            x + c.dt * x_dot,
            x_dot + c.dt * x_acc,
            phi + c.dt * phi_dot,
            phi_dot + c.dt * phi_acc,
        ];
        self.steps += 1;
        let failed = self.failed();
        Ok(Step {
            observation: self.state.to_vec(),
            reward: if failed { 0.0 } else { 1.0 },
            done: failed || self.steps >= c.max_steps,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::rollout;
    use crate::nncore::FlatParams;
    use crate::policy::{policy_spec, Policy, RunningNorm};

    #[test]
    fn reset_within_noise_box() {
        let mut env = CartPole::new(CartPoleConfig::default());
        for s in 0..200 {
            assert!(env.reset(s).iter().all(|v| v.abs() <= 0.05));
        }
    }

    #[test]
    fn upright_rest_with_zero_force_stays_balanced() {
        let mut env = CartPole::new(CartPoleConfig::default());
        env.set_state([0.0; 4]);
        for _ in 0..50 {
            let s = env.step(&[0.0]).unwrap();
            assert!(!s.done);
            assert!(s.observation[2].abs() < 0.2);
        }
    }

    #[test]
    fn perfect_balance_scores_the_cap() {
        let cfg = CartPoleConfig::default();
        let mut env = CartPole::new(cfg.clone());
        env.set_state([0.0; 4]);
        let mut total = 0.0;
        for i in 0..cfg.max_steps {
            let s = env.step(&[0.0]).unwrap();
            total += s.reward;
            assert_eq!(s.done, i + 1 == cfg.max_steps);
        }
        assert_eq!(total, 1000.0);
    }

    #[test]
    fn saturated_force_fails_early() {
        let spec = policy_spec(4, &[], 1).unwrap();
        let mut values = vec![0.0; spec.param_count()];
        *values.last_mut().unwrap() = 50.0;
        let mut env = CartPole::new(CartPoleConfig::default());
        let bounds = env.contract().action_bounds();
        let policy = Policy::new(FlatParams::new(spec, values).unwrap(), bounds).unwrap();
        for seed in 0..20 {
            let r = rollout(&mut env, &policy, &mut RunningNorm::new(4), seed).unwrap();
            assert!(r.episode_return < 100.0, "{}", r.episode_return);
        }
    }

    #[test]
    fn failing_step_earns_nothing() {
        let mut env = CartPole::new(CartPoleConfig::default());
        env.set_state([0.0, 0.0, 0.199, 2.0]);
        let s = env.step(&[0.0]).unwrap();
        assert!(s.done);
        assert_eq!(s.reward, 0.0);
    }
}
