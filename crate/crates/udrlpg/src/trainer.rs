//! The outer loop: alternate an update stage (generator regression on buffer
//! samples) and a rollout stage (generate, perturb, evaluate, relabel, insert).
//!
//! Rollouts inside a stage run on a worker pool. Each rollout gets its own
//! derived seed and evaluates against the normalizer snapshot taken at the
//! start of the stage; the coordinator then applies observation streams and
//! buffer insertions in rollout-index order. Results are therefore identical
//! for any number of workers.

use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use sha2::{Digest, Sha256};
use udrlpg_core::buffer::random_init_jobs;
use udrlpg_core::envs::{rollout, rollout_traced, TracedRollout};
use udrlpg_core::policy::policy_spec;
use udrlpg_core::seed::{self, tag};
use udrlpg_core::{
    perturb, ActionBounds, BucketedBuffer, BufferEntry, Error as CoreError, FlatParams, Generator,
    Policy, RunningNorm,
};

use crate::checkpoint::Checkpoint;
use crate::config::RunConfig;
use crate::error::{Result, UdrlpgError};
use crate::runlog::{RunLog, StageRecord};

/// Audit trail of one buffer insertion.
#[derive(Clone, Debug, PartialEq)]
pub struct InsertionRecord {
    /// Completed stages at insertion time; 0 for the random initialization.
    pub stage: usize,
    pub index: usize,
    /// Command the policy was generated for; `None` for random policies.
    pub issued_command: Option<f64>,
    pub observed_return: f64,
    /// The label the buffer actually stored.
    pub stored_return: f64,
    pub theta_digest: String,
}

pub struct TrainOutcome {
    pub checkpoint: Checkpoint,
    pub log: RunLog,
    pub buffer: BucketedBuffer,
    pub insertions: Vec<InsertionRecord>,
}

/// SHA-256 over the little-endian bytes of every coordinate, hex encoded.
pub fn theta_digest(theta: &FlatParams) -> String {
    let mut h = Sha256::new();
    for v in theta.values() {
        h.update(v.to_le_bytes());
    }
    hex::encode(h.finalize())
}

pub struct Trainer {
    config: RunConfig,
    bounds: ActionBounds,
    generator: Generator,
    buffer: BucketedBuffer,
    norm: RunningNorm,
    pool: rayon::ThreadPool,
    stage: usize,
    env_steps: u64,
    best_return: f64,
    log: RunLog,
    insertions: Vec<InsertionRecord>,
}

impl Trainer {
    /// Builds the generator and fills the buffer with random policies.
    pub fn new(config: RunConfig) -> Result<Self> {
        config.validate().map_err(|message| UdrlpgError::Config {
            path: PathBuf::from("<run config>"),
            message,
        })?;
        let contract = config.env.contract();
        let bounds = contract.action_bounds();
        let spec = policy_spec(contract.obs_dim, &config.policy_hidden, contract.action_dim)?;
        let generator = Generator::new(
            spec,
            contract.known_return_range,
            &config.generator,
            seed::derive(config.seed, &[tag::GENERATOR_INIT]),
        )?;
        let buffer = BucketedBuffer::new(contract.known_return_range, config.buffer.clone())?;
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(config.workers)
            .build()
            .map_err(|e| UdrlpgError::Invalid(e.to_string()))?;
        let mut trainer = Self {
            norm: RunningNorm::new(contract.obs_dim),
            config,
            bounds,
            generator,
            buffer,
            pool,
            stage: 0,
            env_steps: 0,
            best_return: f64::NEG_INFINITY,
            log: RunLog::default(),
            insertions: Vec::new(),
        };
        trainer.init_buffer().map_err(|e| stage_error(0, e))?;
        if let Some(dir) = trainer.config.output_dir.clone() {
            std::fs::create_dir_all(dir.join("checkpoints")).map_err(|e| UdrlpgError::io(&dir, e))?;
            trainer.save_artifacts(&dir)?;
        }
        Ok(trainer)
    }

    pub fn config(&self) -> &RunConfig {
        &self.config
    }

    pub fn generator(&self) -> &Generator {
        &self.generator
    }

    pub fn buffer(&self) -> &BucketedBuffer {
        &self.buffer
    }

    pub fn norm(&self) -> &RunningNorm {
        &self.norm
    }

    pub fn log(&self) -> &RunLog {
        &self.log
    }

    pub fn stages_done(&self) -> usize {
        self.stage
    }

    pub fn insertions(&self) -> &[InsertionRecord] {
        &self.insertions
    }

    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint {
            stage: self.stage,
            env_steps: self.env_steps,
            config: self.config.clone(),
            generator: self.generator.to_fragment(),
            norm: self.norm.clone(),
        }
    }

    /// Random policies run one after another so that each sees the
    /// normalizer updated by all earlier ones.
    fn init_buffer(&mut self) -> std::result::Result<(), CoreError> {
        let jobs = random_init_jobs(self.config.n_init_random, self.generator.policy_spec(), &self.bounds, self.config.seed)?;
        let mut env = self.config.env.build();
        for (i, (policy, rollout_seed)) in jobs.into_iter().enumerate() {
            let traced = rollout_traced(env.as_mut(), &policy, &self.norm, rollout_seed)?;
            self.absorb(0, i, None, policy.params, traced)?;
        }
        Ok(())
    }

    fn run_rollouts(&self, jobs: &[(Policy, u64)]) -> std::result::Result<Vec<TracedRollout>, CoreError> {
        let env = &self.config.env;
        let norm = &self.norm;
        self.pool.install(|| {
            jobs.par_iter()
                .map(|(policy, rollout_seed)| {
                    let mut e = env.build();
                    rollout_traced(e.as_mut(), policy, norm, *rollout_seed)
                })
                .collect()
        })
    }

    fn absorb(
        &mut self,
        birth: usize,
        index: usize,
        issued_command: Option<f64>,
        theta: FlatParams,
        traced: TracedRollout,
    ) -> std::result::Result<(), CoreError> {
        self.norm.replay(&traced.observations)?;
        let observed = traced.result.episode_return;
        self.env_steps += traced.result.steps as u64;
        self.best_return = self.best_return.max(observed);
        let entry = BufferEntry {
            observed_return: observed,
            theta,
            birth_iteration: birth as u64,
        };
        self.insertions.push(InsertionRecord {
            stage: birth,
            index,
            issued_command,
            observed_return: observed,
            stored_return: entry.observed_return,
            theta_digest: theta_digest(&entry.theta),
        });
        self.buffer.insert(entry);
        Ok(())
    }

    /// Regression updates on buffer samples; returns (mean loss, skipped).
    fn update_stage(&mut self) -> std::result::Result<(f64, usize), CoreError> {
        let mut total = 0.0;
        let mut done = 0usize;
        let mut skipped = 0usize;
        for u in 0..self.config.updates_per_stage {
            let sample_seed = seed::derive(self.config.seed, &[tag::SAMPLE, self.stage as u64, u as u64]);
            let batch = self.buffer.sample(self.config.batch_size, sample_seed)?;
            match self.generator.train_batch(&batch) {
                Ok(loss) => {
                    total += loss;
                    done += 1;
                }
                Err(CoreError::NonFiniteLoss | CoreError::NonFinite { .. }) => skipped += 1,
                Err(e) => return Err(e),
            }
        }
        Ok((if done > 0 { total / done as f64 } else { f64::NAN }, skipped))
    }

    /// Generates, perturbs and evaluates one batch of policies against a
    /// fixed generator snapshot, then stores them under their observed
    /// returns. Returns the episode returns in rollout order.
    fn rollout_stage(&mut self) -> std::result::Result<Vec<f64>, CoreError> {
        let s = self.stage as u64;
        let master = self.config.seed;
        let commands = self
            .buffer
            .select_commands(self.config.rollouts_per_stage, seed::derive(master, &[tag::COMMANDS, s]))?;
        let snapshot = &self.generator;
        let jobs = commands
            .iter()
            .enumerate()
            .map(|(i, &c)| {
                let i = i as u64;
                let theta = perturb(&snapshot.generate(c)?, snapshot.sigma(), seed::derive(master, &[tag::PERTURB, s, i]))?;
                Ok((Policy::new(theta, self.bounds.clone())?, seed::derive(master, &[tag::ROLLOUT, s, i])))
            })
            .collect::<std::result::Result<Vec<_>, CoreError>>()?;
        let outcomes = self.run_rollouts(&jobs)?;
        let mut returns = Vec::with_capacity(jobs.len());
        // Entries inserted in this stage are born once it completes.
        let birth = self.stage + 1;
        for (i, (((policy, _), traced), c)) in jobs.into_iter().zip(outcomes).zip(commands).enumerate() {
            returns.push(traced.result.episode_return);
            self.absorb(birth, i, Some(c), policy.params, traced)?;
        }
        Ok(returns)
    }

    /// Runs one update stage followed by one rollout stage.
    pub fn run_stage(&mut self) -> Result<&StageRecord> {
        let started = Instant::now();
        let stage = self.stage;
        let (loss_mean, skipped_updates) = self.update_stage().map_err(|e| self.fail(stage, e))?;
        let returns = self.rollout_stage().map_err(|e| self.fail(stage, e))?;
        self.stage += 1;
        let n = returns.len() as f64;
        let record = StageRecord {
            stage: self.stage,
            env_steps: self.env_steps,
            mean_return: returns.iter().sum::<f64>() / n,
            max_return: returns.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            best_return: self.best_return,
            loss_mean,
            skipped_updates,
            bucket_occupancy: self.buffer.bucket_sizes(),
        };
        self.log.push(record, started.elapsed().as_secs_f64());
        if let Some(dir) = self.config.output_dir.clone() {
            self.save_artifacts(&dir)?;
        }
        Ok(self.log.last().expect("record just pushed"))
    }

    /// Logs the failure and leaves a partial checkpoint behind when possible.
    fn fail(&self, stage: usize, source: CoreError) -> UdrlpgError {
        log::error!("stage {stage} failed: {source}");
        if let Some(dir) = &self.config.output_dir {
            if let Err(e) = self.checkpoint().save(&dir.join("partial.json")) {
                log::error!("could not write partial checkpoint: {e}");
            }
        }
        stage_error(stage, source)
    }

    fn save_artifacts(&self, dir: &Path) -> Result<()> {
        let ckpt = self.checkpoint();
        let every = self.config.checkpoint_every;
        if every > 0 && self.stage.is_multiple_of(every) {
            ckpt.save(&dir.join("checkpoints").join(format!("stage_{:04}.json", self.stage)))?;
        }
        ckpt.save(&dir.join("latest.json"))?;
        self.log.write_csv(&dir.join("runlog.csv"))?;
        self.log.write_timing_csv(&dir.join("timing.csv"))?;
        Ok(())
    }

    pub fn finish(self) -> Result<TrainOutcome> {
        if let Some(dir) = &self.config.output_dir {
            crate::dump::write_buffer_csv(&self.buffer, &dir.join("buffer.csv"))?;
        }
        Ok(TrainOutcome {
            checkpoint: self.checkpoint(),
            log: self.log,
            buffer: self.buffer,
            insertions: self.insertions,
        })
    }
}

fn stage_error(stage: usize, source: CoreError) -> UdrlpgError {
    UdrlpgError::Stage { stage, source }
}

/// Runs a full training job as configured.
pub fn train(config: &RunConfig) -> Result<TrainOutcome> {
    let mut trainer = Trainer::new(config.clone())?;
    for _ in 0..config.total_stages {
        let r = trainer.run_stage()?;
        log::info!(
            "stage {} mean {:.1} max {:.1} best {:.1} loss {:.3e}",
            r.stage,
            r.mean_return,
            r.max_return,
            r.best_return,
            r.loss_mean
        );
    }
    trainer.finish()
}

#[derive(Clone, Debug, PartialEq, serde::Serialize)]
pub struct Evaluation {
    pub command: f64,
    pub mean_return: f64,
    pub returns: Vec<f64>,
}

/// Returns of the noise-free policy generated for `command`. Every episode
/// starts from the checkpoint's normalizer snapshot; the checkpoint itself is
/// never modified.
pub fn evaluate(checkpoint: &Checkpoint, command: f64, episodes: usize, eval_seed: u64) -> Result<Evaluation> {
    if episodes == 0 {
        return Err(UdrlpgError::Invalid("episodes must be positive".into()));
    }
    let generator = checkpoint.generator()?;
    let range = generator.to_fragment().return_range;
    if command < range.0 || command > range.1 {
        log::info!("evaluating extrapolation command {command} outside {range:?}");
    }
    let policy = Policy::new(generator.generate(command)?, checkpoint.config.env.contract().action_bounds())?;
    let mut env = checkpoint.config.env.build();
    let returns = (0..episodes as u64)
        .map(|e| {
            let mut norm = checkpoint.norm.clone();
            rollout(env.as_mut(), &policy, &mut norm, seed::derive(eval_seed, &[tag::EVAL, e])).map(|r| r.episode_return)
        })
        .collect::<std::result::Result<Vec<_>, _>>()?;
    Ok(Evaluation {
        command,
        mean_return: returns.iter().sum::<f64>() / episodes as f64,
        returns,
    })
}
