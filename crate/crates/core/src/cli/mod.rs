//! Command implementations, run configuration and on-disk formats.

pub mod commands;
pub mod config;
pub mod persist;
pub mod targets;

use std::path::{Path, PathBuf};

use thiserror::Error;

pub use commands::{dispatch, run_pipeline, Cli};
pub use config::{ProposerConfig, ProposerKind, RunConfig};

use crate::dsl::DslError;
use crate::geometry::GeometryError;
use crate::metrics::MetricsError;
use crate::selftrain::SelftrainError;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration: {0}")]
    Config(String),
    #[error("no such file or directory: {}", .0.display())]
    MissingPath(PathBuf),
    #[error("EmptyResult: program executes to an empty solid")]
    EmptyResult,
    #[error("report has no rows: {}", .0.display())]
    EmptyReport(PathBuf),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Dsl(#[from] DslError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Pipeline(#[from] SelftrainError),
    #[error("{0}")]
    Other(String),
}

impl From<GeometryError> for CliError {
    fn from(e: GeometryError) -> Self {
        match e {
            GeometryError::EmptyResult => CliError::EmptyResult,
            GeometryError::Io { path, source } if source.kind() == std::io::ErrorKind::NotFound => {
                CliError::MissingPath(path)
            }
            GeometryError::Io { path, source } => CliError::Io { path, source },
            other => CliError::Other(other.to_string()),
        }
    }
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        if source.kind() == std::io::ErrorKind::NotFound {
            CliError::MissingPath(path.to_path_buf())
        } else {
            CliError::Io {
                path: path.to_path_buf(),
                source,
            }
        }
    }

    /// Process exit status for this error.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::MissingPath(_) => 2,
            CliError::Pipeline(SelftrainError::InvalidConfig(_)) => 2,
            CliError::EmptyResult => 3,
            CliError::EmptyReport(_) => 4,
            _ => 1,
        }
    }
}
