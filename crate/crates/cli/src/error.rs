use std::path::PathBuf;
use std::process::ExitCode;

use thiserror::Error;

/// Failures surfaced by a subcommand. Usage errors are handled by clap
/// before a command runs and exit with [`EXIT_USAGE`].
#[derive(Debug, Error)]
pub enum CliError {
    #[error("input not found: {}", .0.display())]
    MissingInput(PathBuf),
    #[error("{context}: {message}")]
    Data { context: String, message: String },
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub const EXIT_OK: u8 = 0;
pub const EXIT_DATA: u8 = 1;
pub const EXIT_USAGE: u8 = 2;
pub const EXIT_MISSING_INPUT: u8 = 3;

impl CliError {
    pub fn data(context: impl Into<String>, err: impl std::fmt::Display) -> Self {
        CliError::Data { context: context.into(), message: err.to_string() }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io { path: path.into(), source }
    }

    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(match self {
            CliError::MissingInput(_) => EXIT_MISSING_INPUT,
            CliError::Data { .. } | CliError::Io { .. } => EXIT_DATA,
        })
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
