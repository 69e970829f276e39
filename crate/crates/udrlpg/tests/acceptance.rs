//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion.
//! Failures are reported but only fail the process when `ACCEPTANCE_STRICT`
//! is set. Expensive training runs are shared between criteria.

#[path = "../../core/tests/support/fd.rs"]
mod fd;

use std::process::ExitCode;
use std::time::{Duration, Instant};

use udrlpg::core::envs::{rollout, BimodalBanditConfig, PointReacherConfig};
use udrlpg::core::nncore::FlatParams;
use udrlpg::core::policy::policy_spec;
use udrlpg::core::seed;
use udrlpg::core::{
    BucketedBuffer, BufferEntry, BufferGeometry, EnvConfig, Generator, GeneratorConfig, Policy, RunningNorm, Sample,
    Strategy,
};
use udrlpg::evalsuite::{final_return, identity_curve, Dispersion};
use udrlpg::trainer::theta_digest;
use udrlpg::{evaluate, train, RunConfig, TrainOutcome};

const SEEDS: [u64; 5] = [0, 1, 2, 3, 4];
const IDENTITY_SEED: u64 = 7;

struct Run {
    seed: u64,
    elapsed: Duration,
    outcome: TrainOutcome,
}

fn run_all(config: &RunConfig, seeds: &[u64], label: &str) -> Vec<Run> {
    seeds
        .iter()
        .map(|&s| {
            let mut cfg = config.clone();
            cfg.seed = s;
            let started = Instant::now();
            let outcome = train(&cfg).unwrap_or_else(|e| panic!("{label} seed {s} failed: {e}"));
            let elapsed = started.elapsed();
            eprintln!("  {label} seed {s}: {:.1}s", elapsed.as_secs_f64());
            Run { seed: s, elapsed, outcome }
        })
        .collect()
}

#[derive(Default)]
struct Report {
    failed: usize,
    total: usize,
}

impl Report {
    fn check(&mut self, name: &str, pass: bool, detail: String) {
        self.total += 1;
        if !pass {
            self.failed += 1;
        }
        println!("{} {name}: {detail}", if pass { "PASS" } else { "FAIL" });
    }
}

fn fmt(values: &[f64]) -> String {
    let parts: Vec<String> = values.iter().map(|v| format!("{v:.3}")).collect();
    format!("[{}]", parts.join(", "))
}

fn identity_rhos(runs: &[Run]) -> Vec<f64> {
    runs.iter()
        .map(|r| identity_curve(&r.outcome.checkpoint, 10, 10, IDENTITY_SEED).unwrap().spearman_rho)
        .collect()
}

fn gradient_check(report: &mut Report) {
    let started = Instant::now();
    let mut rng = seed::rng(31_337);
    let mut worst: f64 = 0.0;
    let mut networks = 0;
    while networks < 40 {
        let (h, o) = fd::ACTIVATIONS[networks % fd::ACTIVATIONS.len()];
        if let Some(e) = fd::network_instance(&mut rng, h, o) {
            worst = worst.max(e);
            networks += 1;
        }
    }
    for i in 0..20 {
        worst = worst.max(fd::generator_instance(&mut rng, i));
    }
    let secs = started.elapsed().as_secs_f64();
    report.check(
        "gradient_correctness",
        worst <= fd::TOL && secs < 30.0,
        format!("{networks} network + 20 generator instances, worst relative error {worst:.2e} (tol 1e-4), {secs:.2}s (< 30s)"),
    );
}

fn buffer_decoupling(report: &mut Report) {
    let draws = 100_000;
    let mut worst: f64 = 0.0;
    let mut details = Vec::new();
    for strategy in Strategy::ALL {
        let mut b = BucketedBuffer::new(
            (0.0, 1000.0),
            BufferGeometry {
                capacity_per_bucket: 1000,
                strategy,
                ..Default::default()
            },
        )
        .unwrap();
        let spec = policy_spec(1, &[1], 1).unwrap();
        for (r, n) in [(50.0, 1), (950.0, 1000)] {
            for _ in 0..n {
                b.insert(BufferEntry { observed_return: r, theta: FlatParams::zeros(spec.clone()), birth_iteration: 0 });
            }
        }
        // Documented weights, computed from the populations directly.
        let expected_low = match strategy {
            Strategy::BucketsWeighted => 1.0 / 3.0,
            Strategy::BucketsUniform => 0.5,
            Strategy::FlatUniform => 1.0 / 1001.0,
            Strategy::FlatWeighted => 1.05 / (1.05 + 1000.0 * 1.95),
        };
        let low = b.sample(draws, 2024).unwrap().iter().filter(|s| s.command < 500.0).count() as f64 / draws as f64;
        let err = (low - expected_low).abs();
        worst = worst.max(err);
        details.push(format!("{} {low:.4}/{expected_low:.4}", strategy.name()));
    }
    report.check(
        "buffer_decoupling",
        worst <= 0.01,
        format!("populations (1, 1000), 1e5 draws, low-bucket freq observed/expected: {}; max error {worst:.4}", details.join(", ")),
    );
}

fn multimodality_mean(report: &mut Report) {
    let env_cfg = EnvConfig::BimodalBandit(BimodalBanditConfig::default());
    let contract = env_cfg.contract();
    let spec = policy_spec(contract.obs_dim, &[32], contract.action_dim).unwrap();
    // +v and -v differ only in the output bias, acting at +0.5 and -0.5.
    let mut plus = FlatParams::zeros(spec.clone());
    let n = plus.len();
    plus.values_mut()[n - 1] = 0.5f64.atanh();
    let mut minus = plus.clone();
    minus.values_mut()[n - 1] = -plus.values()[n - 1];
    let ret = |theta: &FlatParams| {
        let mut env = env_cfg.build();
        let policy = Policy::new(theta.clone(), contract.action_bounds()).unwrap();
        rollout(env.as_mut(), &policy, &mut RunningNorm::new(contract.obs_dim), 0).unwrap().episode_return
    };
    let (r_plus, r_minus) = (ret(&plus), ret(&minus));

    let mut buffer = BucketedBuffer::new(contract.known_return_range, BufferGeometry::default()).unwrap();
    for theta in [&plus, &minus] {
        buffer.insert(BufferEntry { observed_return: r_plus, theta: theta.clone(), birth_iteration: 0 });
    }
    let mut g = Generator::new(spec, contract.known_return_range, &GeneratorConfig::default(), 5).unwrap();
    // Full-batch regression on the buffer contents, so the least-squares
    // target is exactly the pair.
    let batch: Vec<Sample<'_>> = buffer
        .entries()
        .map(|e| Sample { command: e.observed_return, theta: &e.theta })
        .collect();
    for _ in 0..3000 {
        g.train_batch(&batch).unwrap();
    }
    // Least-squares oracle: the coordinate-wise mean of the pair.
    let oracle: Vec<f64> = plus.values().iter().zip(minus.values()).map(|(a, b)| 0.5 * (a + b)).collect();
    let out = g.generate(r_plus).unwrap();
    let err = out.values().iter().zip(&oracle).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let r_mean = ret(&out);
    report.check(
        "multimodality_mean_regression",
        err <= 1e-2 && r_plus == r_minus,
        format!("R(+v) = {r_plus}, R(-v) = {r_minus}; generator vs mean max coord error {err:.2e} (tol 1e-2); R(generated) = {r_mean:.3}"),
    );
}

fn main() -> ExitCode {
    let mut report = Report::default();
    let suite_started = Instant::now();

    gradient_check(&mut report);
    buffer_decoupling(&mut report);
    multimodality_mean(&mut report);

    eprintln!("training cartpole ({} seeds)", SEEDS.len());
    let base = RunConfig::default();
    let cartpole = run_all(&base, &SEEDS, "cartpole");
    let finals: Vec<f64> = cartpole.iter().map(|r| final_return(&r.outcome.checkpoint).unwrap()).collect();
    let slowest = cartpole.iter().map(|r| r.elapsed.as_secs_f64()).fold(0.0, f64::max);
    let reached = finals.iter().filter(|&&f| f >= 950.0).count();
    report.check(
        "cartpole_convergence",
        reached >= 3 && slowest <= 600.0,
        format!("evaluate(1000) per seed {}; {reached}/5 >= 950 (need 3); slowest run {slowest:.1}s (limit 600s)", fmt(&finals)),
    );

    let rhos = identity_rhos(&cartpole);
    let good = rhos.iter().filter(|&&r| r >= 0.8).count();
    report.check(
        "identity_cartpole",
        good >= 3,
        format!("Spearman rho per seed {}; {good}/5 >= 0.8 (need 3)", fmt(&rhos)),
    );

    eprintln!("training point-reacher");
    let reacher_cfg = RunConfig {
        env: EnvConfig::PointReacher(PointReacherConfig::default()),
        ..base.clone()
    };
    let reacher = run_all(&reacher_cfg, &SEEDS, "point-reacher");
    let rhos = identity_rhos(&reacher);
    let good = rhos.iter().filter(|&&r| r >= 0.8).count();
    report.check(
        "identity_point_reacher",
        good >= 3,
        format!("Spearman rho per seed {}; {good}/5 >= 0.8 (need 3)", fmt(&rhos)),
    );

    eprintln!("training flat_uniform ablation arm");
    let ablation_seeds = &SEEDS[..3];
    let mut flat_cfg = base.clone();
    flat_cfg.buffer.strategy = Strategy::FlatUniform;
    let flat = run_all(&flat_cfg, ablation_seeds, "flat_uniform");
    let bw = Dispersion::from_finals("buckets_weighted", ablation_seeds.to_vec(), finals[..3].to_vec());
    let fu = Dispersion::from_finals(
        "flat_uniform",
        ablation_seeds.to_vec(),
        flat.iter().map(|r| final_return(&r.outcome.checkpoint).unwrap()).collect(),
    );
    report.check(
        "ablation_ordering",
        bw.mean >= fu.mean && bw.std <= fu.std,
        format!(
            "seeds {:?}: buckets_weighted mean {:.1} std {:.1}; flat_uniform mean {:.1} std {:.1}",
            ablation_seeds, bw.mean, bw.std, fu.mean, fu.std
        ),
    );

    eprintln!("training bimodal-bandit");
    let bandit_cfg = RunConfig {
        env: EnvConfig::BimodalBandit(BimodalBanditConfig::default()),
        total_stages: 200,
        ..base.clone()
    };
    let bandit = run_all(&bandit_cfg, &SEEDS, "bimodal-bandit");
    let at_top: Vec<f64> = bandit
        .iter()
        .map(|r| evaluate(&r.outcome.checkpoint, 10.0, 10, IDENTITY_SEED).unwrap().mean_return)
        .collect();
    let good = at_top.iter().filter(|&&r| r >= 8.0).count();
    report.check(
        "multimodality_bandit_run",
        good >= 3,
        format!("evaluate(10) per seed {}; {good}/5 >= 8 (need 3)", fmt(&at_top)),
    );

    eprintln!("repeating cartpole seed {}", cartpole[0].seed);
    let again = run_all(&base, &[cartpole[0].seed], "cartpole-repeat");
    let a = cartpole[0].outcome.log.to_csv_string().unwrap();
    let b = again[0].outcome.log.to_csv_string().unwrap();
    report.check(
        "determinism",
        a == b,
        format!("two {}-stage runs, RunLog CSVs of {} bytes, identical: {}", base.total_stages, a.len(), a == b),
    );

    let run = &cartpole[0].outcome;
    let mut matched = 0;
    let mut mismatched = 0;
    for e in run.buffer.entries() {
        let d = theta_digest(&e.theta);
        match run.insertions.iter().rev().find(|r| r.theta_digest == d) {
            Some(r) if r.observed_return.to_bits() == e.observed_return.to_bits()
                && r.stored_return.to_bits() == r.observed_return.to_bits() =>
            {
                matched += 1
            }
            _ => mismatched += 1,
        }
    }
    let relabelled = run.insertions.iter().filter(|r| r.issued_command.is_some_and(|c| c != r.observed_return)).count();
    report.check(
        "hindsight_invariant",
        mismatched == 0 && matched == run.buffer.len(),
        format!(
            "{matched}/{} buffer entries carry exactly their observed return; {relabelled} of {} insertions had a different issued command",
            run.buffer.len(),
            run.insertions.len()
        ),
    );

    println!(
        "{} of {} criteria passed in {:.0}s",
        report.total - report.failed,
        report.total,
        suite_started.elapsed().as_secs_f64()
    );
    let strict = std::env::var_os("ACCEPTANCE_STRICT").is_some_and(|v| !v.is_empty() && v != "0");
    if report.failed > 0 && strict {
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
