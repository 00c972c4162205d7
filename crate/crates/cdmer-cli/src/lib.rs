//! Harness library behind the `cdmer` binary: run configuration, task
//! execution, report rendering, and the desk-scale verification suite.

pub mod config;
pub mod report;
pub mod runner;
pub mod verify;

use thiserror::Error;

/// Harness failures, split by exit code: configuration and usage problems
/// exit 1, data and execution problems exit 2, verification failures exit 3.
#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config error: {0}")]
    Config(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("verification failed: {0}")]
    Verification(String),
}

impl HarnessError {
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) => 1,
            HarnessError::Data(_) => 2,
            HarnessError::Verification(_) => 3,
        }
    }
}
