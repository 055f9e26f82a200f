//! Experiment runner for the nphmc samplers: configure, run, thin,
//! diagnose, emit.

pub mod experiment;
pub mod metrics;
pub mod plot;
pub mod spec;
pub mod verify;

use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("invalid experiment: {0}")]
    Spec(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error(transparent)]
    Core(#[from] nphmc::Error),
    #[error("every run failed")]
    AllRunsFailed,
    #[error("verification failed: {0}")]
    Verify(String),
}

impl CliError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io { path: path.into(), source }
    }

    pub(crate) fn json(path: impl Into<PathBuf>, source: serde_json::Error) -> Self {
        CliError::Json { path: path.into(), source }
    }

    /// Process exit status: 2 for a bad invocation, 1 for anything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Spec(_) => 2,
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;

pub(crate) fn read_file(path: &std::path::Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

pub(crate) fn write_file(path: &std::path::Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| CliError::io(path, e))
}
