use thiserror::Error;

/// Errors produced by the estimation and analysis routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: String, found: String },

    #[error("matrix is singular or not positive definite (pivot {pivot} = {value:e})")]
    SingularMatrix { pivot: usize, value: f64 },

    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),

    #[error("invalid noise specification: {0}")]
    InvalidNoise(String),

    #[error("insufficient measurements: {available} available, {required} required")]
    InsufficientMeasurements { available: usize, required: usize },

    #[error("normal equations are singular: {0}")]
    SingularNormalEquations(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("no trial records to aggregate")]
    EmptyInput,
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn mismatch(expected: impl ToString, found: impl ToString) -> Error {
    Error::DimensionMismatch {
        expected: expected.to_string(),
        found: found.to_string(),
    }
}
