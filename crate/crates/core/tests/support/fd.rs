//! Central finite-difference oracle shared by the gradient tests and the
//! acceptance suite.

use rand::Rng;
use udrlpg_core::buffer::Sample;
use udrlpg_core::nncore::{mse, Activation, FlatParams, NetSpec};
use udrlpg_core::policy::policy_spec;
use udrlpg_core::{Generator, GeneratorConfig};

pub const H: f64 = 1e-5;
pub const TOL: f64 = 1e-4;

pub fn rel_err(a: f64, n: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(1e-8)
}

fn mse_loss(p: &FlatParams, x: &[f64], t: &[f64]) -> f64 {
    mse(&p.forward(x).unwrap(), t).unwrap().0
}

fn shifted(p: &FlatParams, i: usize, d: f64) -> FlatParams {
    let mut q = p.clone();
    q.values_mut()[i] += d;
    q
}

/// Worst relative error over d mse / d params and d mse / d input for one
/// random network, or `None` when a ReLU kink lies between the probes.
pub fn network_instance(rng: &mut impl Rng, hidden: Activation, out: Activation) -> Option<f64> {
    let depth = rng.random_range(1..=3);
    let sizes: Vec<usize> = (0..=depth).map(|_| rng.random_range(1..=5)).collect();
    let spec = NetSpec::new(sizes, hidden, out).unwrap();
    let mut p = spec.init_params(rng, 1.0);
    for v in p.values_mut() {
        *v += rng.random_range(-0.5..0.5);
    }
    let x: Vec<f64> = (0..spec.input_size()).map(|_| rng.random_range(-2.0..2.0)).collect();
    let t: Vec<f64> = (0..spec.output_size()).map(|_| rng.random_range(-1.0..1.0)).collect();

    let cache = p.forward_cached(&x).unwrap();
    let (_, upstream) = mse(cache.output(), &t).unwrap();
    let (analytic, input_grad) = p.backward(&cache, &upstream).unwrap();

    let base = mse_loss(&p, &x, &t);
    let mut worst: f64 = 0.0;
    for (i, &a) in analytic.iter().enumerate() {
        let lp = mse_loss(&shifted(&p, i, H), &x, &t);
        let lm = mse_loss(&shifted(&p, i, -H), &x, &t);
        if hidden == Activation::Relu && (lp - 2.0 * base + lm).abs() / (H * H) > 1e3 {
            return None;
        }
        worst = worst.max(rel_err(a, (lp - lm) / (2.0 * H)));
    }
    for j in 0..x.len() {
        let mut xp = x.clone();
        xp[j] += H;
        let mut xm = x.clone();
        xm[j] -= H;
        let numeric = (mse_loss(&p, &xp, &t) - mse_loss(&p, &xm, &t)) / (2.0 * H);
        worst = worst.max(rel_err(input_grad[j], numeric));
    }
    Some(worst)
}

/// Worst relative error of the generator's batch loss gradient for one random
/// generator, batch and target set.
pub fn generator_instance(rng: &mut impl Rng, seed: u64) -> f64 {
    let spec = policy_spec(rng.random_range(1..=3), &[rng.random_range(1..=4)], 1).unwrap();
    let cfg = GeneratorConfig {
        hidden: vec![rng.random_range(2..=6), rng.random_range(2..=6)],
        output_scale: 1.0,
        ..Default::default()
    };
    let mut g = Generator::new(spec.clone(), (0.0, 100.0), &cfg, seed).unwrap();
    let mut rho = g.rho().clone();
    for v in rho.values_mut() {
        *v += rng.random_range(-0.3..0.3);
    }
    g.set_rho(rho).unwrap();
    let targets: Vec<FlatParams> = (0..4)
        .map(|_| {
            let vals = (0..spec.param_count()).map(|_| rng.random_range(-1.0..1.0)).collect();
            FlatParams::new(spec.clone(), vals).unwrap()
        })
        .collect();
    let commands: Vec<f64> = (0..4).map(|_| rng.random_range(0.0..100.0)).collect();
    let batch: Vec<Sample<'_>> = commands
        .iter()
        .zip(&targets)
        .map(|(&command, theta)| Sample { command, theta })
        .collect();
    let (_, analytic) = g.loss_and_grad(&batch).unwrap();
    let loss_at = |rho: FlatParams| {
        let mut h = g.clone();
        h.set_rho(rho).unwrap();
        h.loss_and_grad(&batch).unwrap().0
    };
    let mut worst: f64 = 0.0;
    for (i, &a) in analytic.iter().enumerate() {
        let numeric = (loss_at(shifted(g.rho(), i, H)) - loss_at(shifted(g.rho(), i, -H))) / (2.0 * H);
        worst = worst.max(rel_err(a, numeric));
    }
    worst
}

pub const ACTIVATIONS: [(Activation, Activation); 4] = [
    (Activation::Tanh, Activation::Identity),
    (Activation::Tanh, Activation::Tanh),
    (Activation::Relu, Activation::Identity),
    (Activation::Relu, Activation::Tanh),
];
