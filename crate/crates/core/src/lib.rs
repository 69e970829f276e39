//! Core of a command-conditioned policy generator.
//!
//! A hypernetwork decodes a scalar return command into the complete weight
//! vector of a small control policy. It is trained by hindsight regression on
//! a replay buffer of previously generated policies, each labelled with the
//! return it actually achieved, and it explores by adding Gaussian noise in
//! parameter space.
//!
//! This crate is `no_std` (with `alloc`) and holds only the algorithmic
//! pieces: the dense network engine, policies and observation normalization,
//! the native environments, the generator and the bucketed buffer. Training
//! orchestration, file formats and the CLI live in the `udrlpg` crate.

#![no_std]

extern crate alloc;

pub mod buffer;
pub mod envs;
mod error;
pub mod generator;
pub mod nncore;
pub mod policy;
pub mod seed;

pub use buffer::{BucketedBuffer, BufferEntry, BufferGeometry, Sample, Strategy};
pub use envs::{EnvConfig, EnvContract, Environment, EpisodeResult, Step};
pub use error::{Error, Result};
pub use generator::{perturb, CommandNorm, Generator, GeneratorConfig};
pub use nncore::{mse, Activation, AdamConfig, AdamState, FlatParams, ForwardCache, NetSpec};
pub use policy::{random_policy, ActionBounds, Policy, RunningNorm};
