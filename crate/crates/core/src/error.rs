use alloc::string::String;

/// Errors raised by the core kernels, encoder, generator and trainer.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("row {row} has norm {norm:e}, too small to normalize")]
    ZeroRow { row: usize, norm: f64 },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("non-finite value in {0}")]
    NonFinite(String),
    #[error("distance matrix has nonzero diagonal entry {value:e} at {index}")]
    NonZeroDiagonal { index: usize, value: f64 },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("sequence {row} has no valid positions")]
    EmptySequence { row: usize },
    #[error("class set is empty")]
    EmptyClassSet,
    #[error("batch of {got} rows is too small (need at least {min})")]
    BatchTooSmall { got: usize, min: usize },
    #[error("joint covariance has rank {rank}, need at least 3")]
    DegenerateRank { rank: usize },
    #[error("non-finite loss at optimizer step {step}")]
    NumericalAbort { step: u64 },
}

pub type Result<T, E = Error> = core::result::Result<T, E>;
