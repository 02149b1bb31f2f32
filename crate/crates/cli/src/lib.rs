//! Library side of the `sigmafloor` command: experiment configs, the `run`
//! dispatcher, one-shot tools and the self-test.

pub mod config;
pub mod io;
pub mod oneshot;
pub mod run;
pub mod selftest;

use sigmafloor_core::Error as CoreError;

/// Exit codes: 2 for configuration or input problems, 3 for numerical failures.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::InvalidInput(_) | CoreError::Shape { .. } | CoreError::MomentUnavailable(_) => {
                CliError::Config(e.to_string())
            }
            CoreError::NonFinite(_) | CoreError::NonConvergence { .. } | CoreError::InsufficientData { .. } => {
                CliError::Numerical(e.to_string())
            }
        }
    }
}
