use thiserror::Error;

use crate::sequence::MajorizationVerdict;

/// Errors raised by the library.
#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("entry {index} is not a valid probability: {value}")]
    InvalidEntry { index: usize, value: f64 },

    #[error("vector is flagged normalized but sums to {sum}")]
    NotNormalized { sum: f64 },

    #[error("empty vector")]
    Empty,

    #[error("index {index} out of range for dimension {dim}")]
    IndexOutOfRange { index: usize, dim: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("majorization does not hold: {0}")]
    MajorizationFailed(MajorizationVerdict),

    #[error("matrix is not doubly stochastic: {0}")]
    NotDoublyStochastic(String),

    #[error("residual support admits no perfect matching (remaining mass {residual})")]
    MatchingFailed { residual: f64 },

    #[error("matrix is not orthogonal (deviation {deviation})")]
    NotOrthogonal { deviation: f64 },

    #[error("matrix is not unitary (deviation {deviation})")]
    NotUnitary { deviation: f64 },

    #[error(
        "matrix is not Hermitian: entries ({row},{col}) and ({col},{row}) differ by {deviation}"
    )]
    NotHermitian {
        row: usize,
        col: usize,
        deviation: f64,
    },

    #[error("matrix is not square: {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },

    #[error("trace is {trace}, expected 1")]
    InvalidTrace { trace: f64 },

    #[error("matrix is not positive semidefinite (min eigenvalue {min_eigenvalue})")]
    NotPositive { min_eigenvalue: f64 },

    #[error("spectrum drifted from unit total by {drift}")]
    SpectrumDrift { drift: f64 },

    #[error("vector is not a unit vector (norm {norm})")]
    NotUnitVector { norm: f64 },

    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("channel is not trace preserving (deviation {deviation})")]
    NotTracePreserving { deviation: f64 },

    #[error("channel is not unital (deviation {deviation})")]
    NotUnital { deviation: f64 },

    #[error("non-finite entry at ({row},{col})")]
    NonFinite { row: usize, col: usize },

    #[error("eigensolver did not converge")]
    EigenFailed,
}

pub type Result<T> = std::result::Result<T, Error>;
