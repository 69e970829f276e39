//! Training, evaluation and experiment harness for the command-conditioned
//! policy generator in [`udrlpg_core`].

pub mod checkpoint;
pub mod config;
pub mod dump;
mod error;
pub mod evalsuite;
pub mod runlog;
pub mod trainer;

pub use checkpoint::{Checkpoint, PolicyFragment};
pub use config::RunConfig;
pub use error::{Result, UdrlpgError};
pub use runlog::{RunLog, StageRecord};
pub use trainer::{evaluate, train, Evaluation, InsertionRecord, TrainOutcome, Trainer};
pub use udrlpg_core as core;
