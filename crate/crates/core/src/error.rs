use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid hyperparameter: {0}")]
    InvalidHyperparameter(String),

    #[error("structural error: {0}")]
    Structural(String),

    #[error("finite-difference oracle failed at coordinate {coordinate}: f = {value}")]
    OracleFailure { coordinate: usize, value: f64 },

    #[error("optimizer fault: non-finite gradient in parameter `{parameter}`")]
    OptimizerFault { parameter: String },

    #[error("loss diverged at epoch {epoch}, step {step}: {value}")]
    Divergence {
        epoch: usize,
        step: usize,
        value: f64,
    },

    #[error("undefined metric: {0}")]
    UndefinedMetric(String),

    #[error("contract violation: {0}")]
    ContractViolation(String),

    #[error("empty group: {0}")]
    EmptyGroup(String),

    #[error("line {line}: {message}")]
    Validation { line: usize, message: String },

    #[error("format error: {0}")]
    Format(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Whether the failure stems from bad input rather than an internal fault.
    pub fn is_user_error(&self) -> bool {
        !matches!(
            self,
            Error::OracleFailure { .. } | Error::OptimizerFault { .. } | Error::Divergence { .. }
        )
    }
}
