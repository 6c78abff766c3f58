use std::path::{Path, PathBuf};

use thiserror::Error;
use wsbm_core::Error as CoreError;

/// Process exit codes.
pub const EXIT_USAGE: u8 = 2;
pub const EXIT_INPUT: u8 = 3;
pub const EXIT_NUMERICAL: u8 = 4;

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad flag combination or configuration value.
    #[error("{0}")]
    Usage(String),

    #[error("config file {}: {message}", path.display())]
    Config { path: PathBuf, message: String },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{}: {source}", path.display())]
    Input {
        path: PathBuf,
        #[source]
        source: CoreError,
    },

    #[error(transparent)]
    Core(#[from] CoreError),
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub fn input(path: &Path, source: CoreError) -> Self {
        CliError::Input {
            path: path.to_path_buf(),
            source,
        }
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) | CliError::Config { .. } => EXIT_USAGE,
            CliError::Io { .. } | CliError::Input { .. } => EXIT_INPUT,
            CliError::Core(e) => match e.root() {
                CoreError::InvalidParameter(_) | CoreError::EmptyNetwork(_) => EXIT_USAGE,
                CoreError::Numerical(_) => EXIT_NUMERICAL,
                _ => EXIT_INPUT,
            },
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
