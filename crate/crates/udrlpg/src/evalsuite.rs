//! Experiment harness: identity curves, final-return dispersion over seeds,
//! and the four-way buffer-strategy ablation.
//!
//! A run's *final return* is the mean return, over [`FINAL_EVAL_EPISODES`]
//! noise-free episodes, of the policy generated for the top of the known
//! return range by the last checkpoint. The last stage's exploratory rollout
//! mean is reported next to it.

use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;
use udrlpg_core::Strategy;

use crate::checkpoint::Checkpoint;
use crate::config::RunConfig;
use crate::error::{Result, UdrlpgError};
use crate::runlog::RunLog;
use crate::trainer::{evaluate, train, Evaluation};

pub const FINAL_EVAL_EPISODES: usize = 10;
const FINAL_EVAL_SEED: u64 = 0x5EED_F1A1;

/// Spearman rank correlation with average ranks for ties. Returns 0 when
/// either side has no rank variance (for example, all values tied).
pub fn spearman(x: &[f64], y: &[f64]) -> f64 {
    assert_eq!(x.len(), y.len(), "spearman needs paired samples");
    let rx = average_ranks(x);
    let ry = average_ranks(y);
    let n = x.len() as f64;
    let mx = rx.iter().sum::<f64>() / n;
    let my = ry.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in rx.iter().zip(&ry) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        0.0
    } else {
        sxy / (sxx * syy).sqrt()
    }
}

fn average_ranks(v: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..v.len()).collect();
    order.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut ranks = vec![0.0; v.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && v[order[j + 1]] == v[order[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IdentityCurve {
    pub commands: Vec<f64>,
    pub achieved: Vec<f64>,
    pub spearman_rho: f64,
    /// Zero-shot probe one tenth of the range above `r_max`.
    pub extrapolation: Evaluation,
}

impl IdentityCurve {
    /// CSV with header `command,achieved,kind`, `kind` being `grid` or
    /// `extrapolation`.
    pub fn to_csv_string(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["command", "achieved", "kind"])?;
        for (c, a) in self.commands.iter().zip(&self.achieved) {
            w.write_record([c.to_string(), a.to_string(), "grid".into()])?;
        }
        w.write_record([
            self.extrapolation.command.to_string(),
            self.extrapolation.mean_return.to_string(),
            "extrapolation".into(),
        ])?;
        into_string(w)
    }
}

/// Evaluates `n_commands` commands spread evenly over the known return range
/// (both ends included), `episodes` episodes each.
pub fn identity_curve(checkpoint: &Checkpoint, n_commands: usize, episodes: usize, seed: u64) -> Result<IdentityCurve> {
    if n_commands < 2 {
        return Err(UdrlpgError::Invalid("identity curve needs at least 2 commands".into()));
    }
    let (lo, hi) = checkpoint.generator.return_range;
    let commands: Vec<f64> = (0..n_commands)
        .map(|i| lo + (hi - lo) * i as f64 / (n_commands - 1) as f64)
        .collect();
    let achieved = commands
        .iter()
        .map(|&c| evaluate(checkpoint, c, episodes, seed).map(|e| e.mean_return))
        .collect::<Result<Vec<_>>>()?;
    let extrapolation = evaluate(checkpoint, hi + 0.1 * (hi - lo), episodes, seed)?;
    Ok(IdentityCurve {
        spearman_rho: spearman(&commands, &achieved),
        commands,
        achieved,
        extrapolation,
    })
}

/// Outcome of one training run inside a sweep.
#[derive(Clone, Debug)]
pub struct RunSummary {
    pub seed: u64,
    pub final_return: f64,
    pub last_stage_mean_return: f64,
    pub log: RunLog,
    pub checkpoint: Checkpoint,
}

pub fn final_return(checkpoint: &Checkpoint) -> Result<f64> {
    let (_, hi) = checkpoint.generator.return_range;
    Ok(evaluate(checkpoint, hi, FINAL_EVAL_EPISODES, FINAL_EVAL_SEED)?.mean_return)
}

pub fn run_seed(config: &RunConfig, seed: u64) -> Result<RunSummary> {
    let mut cfg = config.clone();
    cfg.seed = seed;
    let out = train(&cfg)?;
    Ok(RunSummary {
        seed,
        final_return: final_return(&out.checkpoint)?,
        last_stage_mean_return: out.log.last().map_or(f64::NAN, |r| r.mean_return),
        log: out.log,
        checkpoint: out.checkpoint,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Dispersion {
    pub label: String,
    pub seeds: Vec<u64>,
    pub finals: Vec<f64>,
    pub mean: f64,
    /// Sample standard deviation.
    pub std: f64,
    pub min: f64,
    pub max: f64,
}

impl Dispersion {
    pub fn from_finals(label: impl Into<String>, seeds: Vec<u64>, finals: Vec<f64>) -> Self {
        let n = finals.len() as f64;
        let mean = finals.iter().sum::<f64>() / n;
        let var = if finals.len() > 1 {
            finals.iter().map(|f| (f - mean) * (f - mean)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        Self {
            label: label.into(),
            seeds,
            mean,
            std: var.sqrt(),
            min: finals.iter().copied().fold(f64::INFINITY, f64::min),
            max: finals.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            finals,
        }
    }
}

/// CSV with header `label,seeds,mean,std,min,max`; seeds are `;`-separated.
pub fn dispersion_csv(rows: &[Dispersion]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["label", "seeds", "mean", "std", "min", "max"])?;
    for d in rows {
        w.write_record([
            d.label.clone(),
            join(&d.seeds),
            d.mean.to_string(),
            d.std.to_string(),
            d.min.to_string(),
            d.max.to_string(),
        ])?;
    }
    into_string(w)
}

fn check_seeds(seeds: &[u64]) -> Result<()> {
    if seeds.len() < 3 {
        return Err(UdrlpgError::Invalid(format!("need at least 3 seeds, got {}", seeds.len())));
    }
    Ok(())
}

/// Trains every config on every seed and reports the spread of final returns.
pub fn final_variance(configs: &[(String, RunConfig)], seeds: &[u64]) -> Result<Vec<Dispersion>> {
    check_seeds(seeds)?;
    configs
        .iter()
        .map(|(label, cfg)| {
            let finals = seeds
                .par_iter()
                .map(|&s| run_seed(cfg, s).map(|r| r.final_return))
                .collect::<Result<Vec<_>>>()?;
            Ok(Dispersion::from_finals(label.clone(), seeds.to_vec(), finals))
        })
        .collect()
}

#[derive(Clone, Debug)]
pub struct StrategyRuns {
    pub strategy: Strategy,
    pub runs: Vec<RunSummary>,
    /// Seeds whose run failed, with the error text.
    pub failures: Vec<(u64, String)>,
}

impl StrategyRuns {
    pub fn dispersion(&self) -> Dispersion {
        Dispersion::from_finals(
            self.strategy.name(),
            self.runs.iter().map(|r| r.seed).collect(),
            self.runs.iter().map(|r| r.final_return).collect(),
        )
    }

    /// Learning curves, header `seed,stage,env_steps,mean_return,max_return,best_return`.
    pub fn curves_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["seed", "stage", "env_steps", "mean_return", "max_return", "best_return"])?;
        for run in &self.runs {
            for r in &run.log.records {
                w.write_record([
                    run.seed.to_string(),
                    r.stage.to_string(),
                    r.env_steps.to_string(),
                    r.mean_return.to_string(),
                    r.max_return.to_string(),
                    r.best_return.to_string(),
                ])?;
            }
        }
        into_string(w)
    }

    /// Per-seed results, header `seed,final_return,last_stage_mean_return`.
    pub fn finals_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["seed", "final_return", "last_stage_mean_return"])?;
        for run in &self.runs {
            w.write_record([
                run.seed.to_string(),
                run.final_return.to_string(),
                run.last_stage_mean_return.to_string(),
            ])?;
        }
        into_string(w)
    }
}

#[derive(Clone, Debug)]
pub struct AblationReport {
    pub strategies: Vec<StrategyRuns>,
}

impl AblationReport {
    pub fn get(&self, strategy: Strategy) -> Option<&StrategyRuns> {
        self.strategies.iter().find(|s| s.strategy == strategy)
    }

    pub fn summary(&self) -> Vec<Dispersion> {
        self.strategies.iter().map(StrategyRuns::dispersion).collect()
    }

    pub fn summary_csv(&self) -> Result<String> {
        dispersion_csv(&self.summary())
    }

    pub fn has_failures(&self) -> bool {
        self.strategies.iter().any(|s| !s.failures.is_empty())
    }

    /// Writes `ablation_<strategy>.csv` (curves), `ablation_<strategy>_final.csv`
    /// and `ablation_summary.csv` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| crate::error::UdrlpgError::io(dir, e))?;
        let put = |name: String, text: String| {
            let p = dir.join(name);
            std::fs::write(&p, text).map_err(|e| crate::error::UdrlpgError::io(&p, e))
        };
        for s in &self.strategies {
            put(format!("ablation_{}.csv", s.strategy.name()), s.curves_csv()?)?;
            put(format!("ablation_{}_final.csv", s.strategy.name()), s.finals_csv()?)?;
        }
        put("ablation_summary.csv".into(), self.summary_csv()?)
    }
}

/// Trains `base` under each buffer strategy on the same seeds. A failing run
/// is recorded and the remaining runs continue.
pub fn ablation(base: &RunConfig, seeds: &[u64]) -> Result<AblationReport> {
    check_seeds(seeds)?;
    let strategies = Strategy::ALL
        .iter()
        .map(|&strategy| {
            let mut cfg = base.clone();
            cfg.buffer.strategy = strategy;
            let results: Vec<(u64, Result<RunSummary>)> = seeds.par_iter().map(|&s| (s, run_seed(&cfg, s))).collect();
            let mut runs = Vec::new();
            let mut failures = Vec::new();
            for (seed, r) in results {
                match r {
                    Ok(run) => runs.push(run),
                    Err(e) => {
                        log::error!("{} seed {seed} failed: {e}", strategy.name());
                        failures.push((seed, e.to_string()));
                    }
                }
            }
            StrategyRuns { strategy, runs, failures }
        })
        .collect();
    Ok(AblationReport { strategies })
}

fn join(seeds: &[u64]) -> String {
    seeds.iter().map(u64::to_string).collect::<Vec<_>>().join(";")
}

fn into_string(w: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = w.into_inner().map_err(|e| UdrlpgError::Invalid(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}
