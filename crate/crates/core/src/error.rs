use thiserror::Error;

use crate::training::RunReport;

/// Errors raised anywhere in the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    Input(String),

    #[error("domain error in {op}: offending value {value}")]
    Domain { op: &'static str, value: f64 },

    #[error("numeric error at index {index}: {reason}")]
    Numeric { index: usize, reason: String },

    #[error("tape replay diverged: forward value {forward}, taped value {taped}")]
    TapeDivergence { forward: f64, taped: f64 },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("basis construction failed: gram deviation {deviation:e} on cell {cell}")]
    Basis { cell: usize, deviation: f64 },

    #[error("training aborted at iteration {iteration}: {reason}")]
    TrainingAborted {
        iteration: usize,
        reason: String,
        report: Box<RunReport>,
    },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn input<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Input(msg.into()))
}
