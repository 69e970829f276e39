use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use udrlpg::evalsuite::{ablation, dispersion_csv, final_variance, identity_curve};
use udrlpg::{evaluate, train, Checkpoint, PolicyFragment, RunConfig};
use udrlpg_core::Policy;

#[derive(Parser)]
#[command(name = "udrlpg", version, about = "Return-conditioned policy generator: training and evaluation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a generator; writes checkpoints, runlog.csv, timing.csv and buffer.csv.
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: u64,
        /// Output directory; defaults to the config's output_dir, then runs/seed_<n>.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate the noise-free policy generated for one command.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        command: f64,
        #[arg(long, default_value_t = 10)]
        episodes: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Also write the generated policy and normalizer as JSON.
        #[arg(long)]
        policy_out: Option<PathBuf>,
    },
    /// Achieved versus commanded return over the known return range.
    Identity {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        points: usize,
        #[arg(long, default_value_t = 10)]
        episodes: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Train under all four buffer strategies on the same seeds.
    Ablate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_delimiter = ',')]
        seeds: Vec<u64>,
        #[arg(long, default_value = "ablation")]
        out: PathBuf,
    },
    /// Spread of final returns over seeds, one row per config.
    Variance {
        #[arg(long, num_args = 1..)]
        config: Vec<PathBuf>,
        #[arg(long, value_delimiter = ',')]
        seeds: Vec<u64>,
    },
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let mut stdout = std::io::stdout().lock();
    match cli.command {
        Command::Train { config, seed, out } => {
            let mut cfg = RunConfig::load(&config)?;
            cfg.seed = seed;
            let dir = out
                .or_else(|| cfg.output_dir.clone())
                .unwrap_or_else(|| PathBuf::from(format!("runs/seed_{seed}")));
            cfg.output_dir = Some(dir.clone());
            let outcome = train(&cfg).with_context(|| format!("training {}", config.display()))?;
            write!(stdout, "{}", outcome.log.to_csv_string()?)?;
            eprintln!("wrote {}", dir.display());
        }
        Command::Eval {
            checkpoint,
            command,
            episodes,
            seed,
            policy_out,
        } => {
            let ckpt = load_checkpoint(&checkpoint)?;
            let ev = evaluate(&ckpt, command, episodes, seed)?;
            let mut w = csv::Writer::from_writer(&mut stdout);
            w.write_record(["command", "episodes", "mean_return", "returns"])?;
            let returns = ev.returns.iter().map(f64::to_string).collect::<Vec<_>>().join(";");
            w.write_record([command.to_string(), episodes.to_string(), ev.mean_return.to_string(), returns])?;
            w.flush()?;
            if let Some(path) = policy_out {
                let generator = ckpt.generator()?;
                let policy = Policy::new(generator.generate(command)?, ckpt.config.env.contract().action_bounds())?;
                PolicyFragment {
                    command,
                    policy,
                    norm: ckpt.norm.clone(),
                }
                .save(&path)?;
            }
        }
        Command::Identity {
            checkpoint,
            points,
            episodes,
            seed,
        } => {
            let ckpt = load_checkpoint(&checkpoint)?;
            let curve = identity_curve(&ckpt, points, episodes, seed)?;
            write!(stdout, "{}", curve.to_csv_string()?)?;
            eprintln!("spearman_rho={}", curve.spearman_rho);
        }
        Command::Ablate { config, seeds, out } => {
            let cfg = RunConfig::load(&config)?;
            let report = ablation(&cfg, &seeds)?;
            report.write(&out)?;
            write!(stdout, "{}", report.summary_csv()?)?;
            if report.has_failures() {
                for s in &report.strategies {
                    for (seed, err) in &s.failures {
                        eprintln!("{} seed {seed}: {err}", s.strategy.name());
                    }
                }
                bail!("some ablation runs failed");
            }
        }
        Command::Variance { config, seeds } => {
            let configs = config
                .iter()
                .map(|p| Ok((label_for(p), RunConfig::load(p)?)))
                .collect::<Result<Vec<_>>>()?;
            let rows = final_variance(&configs, &seeds)?;
            write!(stdout, "{}", dispersion_csv(&rows)?)?;
        }
    }
    Ok(())
}

fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    Checkpoint::load(path).with_context(|| format!("loading checkpoint {}", path.display()))
}

fn label_for(path: &Path) -> String {
    path.file_stem().map_or_else(|| path.display().to_string(), |s| s.to_string_lossy().into_owned())
}
