use alloc::string::String;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid network spec: {0}")]
    InvalidSpec(String),
    #[error("dimension mismatch for {what}: expected {expected}, got {actual}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        actual: usize,
    },
    #[error("non-finite value in {what} at index {index}")]
    NonFinite { what: &'static str, index: usize },
    #[error("forward cache does not match this network")]
    StaleCache,
    #[error("non-finite observation at environment step {step}")]
    NonFiniteObservation { step: usize },
    #[error("non-finite action passed to environment step {step}")]
    NonFiniteAction { step: usize },
    #[error("generator produced a non-finite parameter for command {command}")]
    NonFiniteGeneratorOutput { command: f64 },
    #[error("non-finite generator loss; update skipped")]
    NonFiniteLoss,
    #[error("replay buffer is empty: rollout stage must run first")]
    EmptyBuffer,
    #[error("invalid configuration: {0}")]
    Config(String),
}
