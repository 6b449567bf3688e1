//! CLI error taxonomy and exit codes.
//!
//! 0 success, 1 usage (bad flags or config), 2 data error (missing or
//! malformed inputs, computation preconditions), 3 internal (output I/O and
//! anything unexpected).

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
    #[error("{0}")]
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
}

impl From<fediot_core::dataset::DatasetError> for CliError {
    fn from(e: fediot_core::dataset::DatasetError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<fediot_core::preprocess::PreprocessError> for CliError {
    fn from(e: fediot_core::preprocess::PreprocessError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<fediot_core::models::ModelError> for CliError {
    fn from(e: fediot_core::models::ModelError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<fediot_core::evaluation::EvalError> for CliError {
    fn from(e: fediot_core::evaluation::EvalError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<fediot_core::federation::FederationError> for CliError {
    fn from(e: fediot_core::federation::FederationError) -> Self {
        CliError::Data(e.to_string())
    }
}
