use std::io;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum McgError {
    #[error("io error: {0}")]
    Io(#[from] io::Error),
    #[error("format error: {0}")]
    Format(String),
    #[error("parameter error: {0}")]
    Parameter(String),
    #[error("eigensolver did not converge after {iterations} iterations (residual {residual:.3e})")]
    Solver { iterations: usize, residual: f64 },
    #[error("at scale {scale}: {source}")]
    AtScale {
        scale: f64,
        #[source]
        source: Box<McgError>,
    },
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, McgError>;

pub(crate) fn param<T>(msg: impl Into<String>) -> Result<T> {
    Err(McgError::Parameter(msg.into()))
}

pub(crate) fn format<T>(msg: impl Into<String>) -> Result<T> {
    Err(McgError::Format(msg.into()))
}
