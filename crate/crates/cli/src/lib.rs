//! Experiment harness: configuration, runners, and report writers behind
//! the `diamond` command-line interface.

pub mod config;
pub mod report;
pub mod runner;

use thiserror::Error;

/// CLI-level error, bucketed by process exit code: 1 for configuration
/// problems, 2 for data problems, 3 for numerical failures.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error:\n{0}")]
    Config(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 1,
            CliError::Data(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }

    /// Classify a core error raised while loading or splitting data.
    pub fn from_data_phase(e: diamond_core::Error) -> CliError {
        match e {
            diamond_core::Error::Invalid(msg) => CliError::Config(msg),
            other => CliError::Data(other.to_string()),
        }
    }

    /// Classify a core error raised while fitting or predicting.
    pub fn from_compute_phase(e: diamond_core::Error) -> CliError {
        match e {
            diamond_core::Error::Invalid(msg) => CliError::Config(msg),
            diamond_core::Error::Io { path, source } => {
                CliError::Data(format!("io error on {}: {source}", path.display()))
            }
            other => CliError::Numerical(other.to_string()),
        }
    }
}
