//! Batch front-end for popslab: experiment descriptors, commands and file formats.

pub mod commands;
pub mod descriptor;
pub mod formats;

use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("`{key}`: {message}")]
    Config { key: String, message: String },

    #[error(transparent)]
    Core(#[from] popslab::Error),

    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },

    #[error("{0}")]
    Format(String),
}

impl CliError {
    pub fn code(&self) -> &'static str {
        match self {
            CliError::Parse { .. } => "E_PARSE",
            CliError::Config { .. } => "E_CONFIG",
            CliError::Core(e) => e.code(),
            CliError::Io { .. } => "E_IO",
            CliError::Format(_) => "E_FORMAT",
        }
    }

    /// Process exit status for the error class.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Parse { .. } | CliError::Config { .. } => 2,
            CliError::Core(_) => 4,
            CliError::Io { .. } => 5,
            CliError::Format(_) => 6,
        }
    }
}

/// Exit status of a `validate` run whose tolerance check failed.
pub const EXIT_TOLERANCE: u8 = 3;
