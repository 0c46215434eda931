use thiserror::Error;

/// Errors produced by estimation and simulation routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("insufficient data: need at least {required} observations, got {actual}")]
    InsufficientData { required: usize, actual: usize },

    #[error("matrix is not positive definite")]
    NotPositiveDefinite,

    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    #[error("invalid rank {d}: must lie in [{min}, {max}]")]
    InvalidRank { d: usize, min: usize, max: usize },

    #[error("singular covariance estimate (sigma^2 = 0)")]
    SingularEstimate,

    #[error("rank-deficient regression design")]
    RankDeficientDesign,

    #[error("model is not causal (companion spectral radius >= 1)")]
    NonCausalModel,

    #[error("invalid autoregressive order {0}")]
    InvalidOrder(usize),

    #[error("invalid simulation case: {0}")]
    InvalidCase(String),
}

pub type Result<T> = std::result::Result<T, Error>;
