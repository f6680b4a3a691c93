use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by every fallible operation in the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("operation not supported for {variant} measures: {op}")]
    UnsupportedVariant { variant: &'static str, op: &'static str },

    #[error("parse error at row {row}, column {column}: {message}")]
    Parse { row: usize, column: usize, message: String },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("kernel singularity: evaluation point lies within {distance:e} of an atom")]
    Singularity { distance: f64 },

    #[error("budget exceeded: {what} needs {requested}, cap is {cap}")]
    Budget {
        what: &'static str,
        requested: usize,
        cap: usize,
    },

    #[error("stencil overflow: {0}")]
    Stencil(String),

    #[error("no convergence after {iterations} iterations (final residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("degenerate support: {0}")]
    DegenerateSupport(String),

    #[error("parity error: {method} requires {required} dimension, got d = {d}")]
    Parity {
        method: &'static str,
        required: &'static str,
        d: usize,
    },

    #[error("tolerance not met: successive refinements differ by {difference:e} (tolerance {tolerance:e})")]
    ToleranceNotMet { difference: f64, tolerance: f64 },

    #[error("insufficient decay: {0}")]
    Decay(String),

    #[error("bracket failure: {0}")]
    Bracket(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
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
