use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, UdrlpgError>;

#[derive(Debug, thiserror::Error)]
pub enum UdrlpgError {
    #[error(transparent)]
    Core(#[from] udrlpg_core::Error),
    #[error("stage {stage}: {source}")]
    Stage {
        stage: usize,
        #[source]
        source: udrlpg_core::Error,
    },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("config {path}: {message}")]
    Config { path: PathBuf, message: String },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("invalid argument: {0}")]
    Invalid(String),
}

impl UdrlpgError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        UdrlpgError::Io { path: path.into(), source }
    }
}
