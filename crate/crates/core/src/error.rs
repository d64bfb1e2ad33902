use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch in {context}: expected {expected}, got {actual}")]
    Shape {
        context: &'static str,
        expected: String,
        actual: String,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("non-finite value in epoch {epoch} ({role})")]
    NonFinite { epoch: usize, role: String },

    #[error("protocol fault: {0}")]
    Protocol(String),

    #[error("schema error: {0}")]
    Schema(String),

    #[error("file not found: {}", .0.display())]
    MissingFile(PathBuf),

    #[error("header mismatch: expected {expected:?}, found {found:?}")]
    HeaderMismatch {
        expected: Vec<String>,
        found: Vec<String>,
    },

    #[error("cannot parse row {row}, column {column} ({value:?}): {message}")]
    Parse {
        row: usize,
        column: String,
        value: String,
        message: String,
    },

    #[error("constant attribute {0:?} cannot be standardized")]
    ConstantColumn(String),

    #[error("invalid vertical split: {0}")]
    Split(String),

    #[error("eigensolver did not converge after {sweeps} sweeps (off-diagonal norm {residual:e})")]
    NoConvergence { sweeps: usize, residual: f64 },

    #[error("training data has a single class")]
    SingleClass,

    #[error("calibration infeasible: epsilon {achieved} at sigma {sigma} exceeds target {target}")]
    Infeasible {
        sigma: f64,
        achieved: f64,
        target: f64,
    },

    #[error("shadow {world}/{index} failed: {source}")]
    Shadow {
        world: u8,
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn shape_err(
    context: &'static str,
    expected: impl std::fmt::Display,
    actual: impl std::fmt::Display,
) -> Error {
    Error::Shape {
        context,
        expected: expected.to_string(),
        actual: actual.to_string(),
    }
}
