//! Command-line harness: configuration, training runs, evaluation of
//! checkpoints, learning curves and value maps.

use std::path::{Path, PathBuf};

use thiserror::Error;

pub mod config;
pub mod metrics;
pub mod plot;
pub mod run;
pub mod svg;

#[derive(Debug, Error)]
pub enum HarnessError {
    /// Bad settings, flags or input files; exit code 2.
    #[error("{0}")]
    Config(String),
    /// Failure while training or evaluating; exit code 3.
    #[error("{0}")]
    Runtime(String),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
}

impl HarnessError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        HarnessError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) => 2,
            HarnessError::Runtime(_) | HarnessError::Io { .. } => 3,
        }
    }
}
