//! `kbc` command implementations. Each verb is a function taking parsed
//! arguments and returning a [`CliError`] whose [`CliError::exit_code`]
//! becomes the process status.

pub mod commands;
pub mod config;

use kbc_core::kg::KgError;
use kbc_core::model::CheckpointError;
use kbc_core::trainer::TrainError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad arguments or configuration.
    #[error("{0}")]
    Usage(String),
    /// Missing or malformed input files, write failures.
    #[error("{0}")]
    Data(String),
    /// Training diverged.
    #[error("{0}")]
    Numeric(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Numeric(_) => 3,
        }
    }
}

impl From<KgError> for CliError {
    fn from(e: KgError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<CheckpointError> for CliError {
    fn from(e: CheckpointError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<TrainError> for CliError {
    fn from(e: TrainError) -> Self {
        match e {
            TrainError::NonFinite(_) => CliError::Numeric(e.to_string()),
            TrainError::Observer(_) => CliError::Data(e.to_string()),
            TrainError::Config(_) | TrainError::Sampler(_) => CliError::Usage(e.to_string()),
        }
    }
}
