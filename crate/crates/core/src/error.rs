use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("numeric failure: {0}")]
    Numeric(String),
    #[error("inverse of the derivative is unbounded at z = {z} (slope supremum {sup})")]
    UnboundedInverse { z: f64, sup: f64 },
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("no analytic population mean: {0}")]
    NoAnalyticMean(String),
    #[error("theorem not applicable: {0}")]
    Inapplicable(String),
    #[error("missing moment `{0}`")]
    MissingMoment(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("oracle does not support this configuration: {0}")]
    UnsupportedOracle(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}
