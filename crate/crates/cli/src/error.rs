use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error at `{key}`: {message}")]
    Config { key: String, message: String },

    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },

    #[error("solver error: {0}")]
    Solver(hum_core::Error),

    #[error("failed checks: {}", .0.join(", "))]
    Checks(Vec<String>),
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io { path: path.into(), source }
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Io { .. } => 1,
            CliError::Config { .. } => 2,
            CliError::Solver(_) => 3,
            CliError::Checks(_) => 4,
        }
    }
}

impl From<hum_core::Error> for CliError {
    fn from(e: hum_core::Error) -> Self {
        match e {
            hum_core::Error::Config { key, message } => CliError::Config { key, message },
            other => CliError::Solver(other),
        }
    }
}
