use std::path::PathBuf;

use thiserror::Error;

/// Errors produced across the imputation engine and benchmark harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("empty input: {0}")]
    Empty(String),
    #[error("schema error: {0}")]
    Schema(String),
    #[error("parse error at row {row}, column `{column}`: cannot read `{token}` as a number")]
    NonNumeric {
        row: usize,
        column: String,
        token: String,
    },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("shape mismatch: expected {expected}, got {got}")]
    Shape { expected: String, got: String },
    #[error("calibration failed: {0}")]
    Calibration(String),
    #[error("column {0} has no observed entries")]
    FullyMissingColumn(usize),
    #[error("training diverged at epoch {epoch}, step {step}: loss {loss}, parameter norm {param_norm}")]
    Diverged {
        epoch: usize,
        step: usize,
        loss: f64,
        param_norm: f64,
    },
    #[error("non-finite activation in {stage} (parameter norm {param_norm})")]
    NonFinite { stage: String, param_norm: f64 },
    #[error("checkpoint error: {0}")]
    Checkpoint(String),
    #[error("config error: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
