//! Corpus orchestration: generate kernels, label them by fault injection,
//! extract trace features, train the two rate predictors, predict and
//! evaluate. Owns the on-disk formats.

pub mod args;
pub mod commands;
pub mod config;
pub mod formats;
pub mod generate;

use std::path::Path;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("data: {0}")]
    Data(String),
    #[error("internal: {0}")]
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Internal(_) => 3,
        }
    }

    pub fn data(path: &Path, what: impl std::fmt::Display) -> CliError {
        CliError::Data(format!("{}: {what}", path.display()))
    }

    pub fn write(path: &Path, what: impl std::fmt::Display) -> CliError {
        CliError::Internal(format!("writing {}: {what}", path.display()))
    }
}

impl From<resil_learn::LearnError> for CliError {
    fn from(e: resil_learn::LearnError) -> Self {
        CliError::Data(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
