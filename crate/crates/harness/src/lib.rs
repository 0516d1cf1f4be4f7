//! Experiment driver: configuration, convergence and bound-check
//! experiments, CSV reports.
//!
//! Everything a run produces is a deterministic function of the config file
//! and the master seed; reports are reproducible byte for byte.

pub mod config;
pub mod experiments;
pub mod report;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Core(#[from] hawkes_core::Error),

    #[error("control cell failed: {0}")]
    ControlFailed(String),

    #[error("acceptance check failed: {0}")]
    CheckFailed(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, HarnessError>;

impl HarnessError {
    /// Process exit code: 2 for validation/config problems, 3 when a
    /// statistical control or acceptance check fails.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) | HarnessError::Core(_) | HarnessError::Io(_) => 2,
            HarnessError::ControlFailed(_) | HarnessError::CheckFailed(_) => 3,
        }
    }
}
