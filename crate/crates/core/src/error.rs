use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("resource limit: {what} needs {requested} elements, cap is {cap}")]
    ResourceLimit {
        what: &'static str,
        requested: usize,
        cap: usize,
    },

    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    #[error(
        "covariance collapse at iteration {iteration}: innovation variance s = {s:e} is not positive \
         (tighten the covariance truncation)"
    )]
    CovarianceCollapse { iteration: usize, s: f64 },

    #[error("data error at line {line}: {message}")]
    Data { line: usize, message: String },

    #[error("corrupt model file: {0}")]
    Corrupt(String),

    #[error("unsupported model format version {found} (expected {expected})")]
    UnsupportedVersion { found: u32, expected: u32 },

    #[error("training inputs at {path} changed since the model was saved")]
    StaleInputs { path: PathBuf },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
