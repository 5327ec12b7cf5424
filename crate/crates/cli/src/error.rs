use std::path::{Path, PathBuf};

use thiserror::Error;
use uca_core::UcaError;

pub type Result<T> = std::result::Result<T, CliError>;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error("{}: {source}", path.display())]
    Csv { path: PathBuf, source: csv::Error },

    #[error("{}: {message}", path.display())]
    Model { path: PathBuf, message: String },

    #[error(transparent)]
    Core(#[from] UcaError),

    #[error("solver did not converge ({0}); rerun with --allow-unconverged to accept the result")]
    Unconverged(String),
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub fn csv(path: &Path, source: csv::Error) -> Self {
        CliError::Csv {
            path: path.to_path_buf(),
            source,
        }
    }

    /// 2 for input or schema problems, 3 for non-convergence, 4 for
    /// numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Unconverged(_) => 3,
            CliError::Core(UcaError::Numeric(_)) => 4,
            _ => 2,
        }
    }
}
