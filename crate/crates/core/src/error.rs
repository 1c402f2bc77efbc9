//! Error types shared across the crate.

use thiserror::Error;

/// Crate-wide error type.
///
/// Numeric payloads (last iterate, gradient norm) are stored as `f64`
/// regardless of the scalar type the computation ran in.
#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("singular matrix: {0}")]
    SingularMatrix(String),

    #[error(
        "solver did not converge within {iterations} iterations \
         (gradient norm {gradient_norm:e})"
    )]
    NonConvergence {
        iterations: usize,
        gradient_norm: f64,
        last_iterate: Vec<f64>,
    },

    #[error("closed form unavailable: {0}")]
    ClosedFormUnavailable(String),

    #[error("no pure Nash equilibrium found: {0}")]
    EquilibriumNotFound(String),

    #[error("degenerate data: {0}")]
    DegenerateData(String),

    #[error("missing column {0:?}")]
    MissingColumn(String),

    #[error("non-numeric cell at data row {row}, column {column:?}: {value:?}")]
    NonNumericCell {
        row: usize,
        column: String,
        value: String,
    },

    #[error("empty dataset: {0}")]
    EmptyDataset(String),

    #[error("sweep failed: {0}")]
    SweepFailed(String),

    #[error("i/o error: {0}")]
    Io(String),

    #[error("csv error: {0}")]
    Csv(String),
}

impl From<std::io::Error> for Error {
    fn from(err: std::io::Error) -> Self {
        Error::Io(err.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(err: csv::Error) -> Self {
        Error::Csv(err.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
