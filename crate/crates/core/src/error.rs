//! Error type shared by all modules.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Input outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),
    /// Inconsistent matrix or signal dimensions.
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    /// An operation requiring stability was given an unstable system.
    #[error("stability error: {0}")]
    Unstable(String),
    /// An iterative solver failed to converge within its cap.
    #[error("convergence error: {0}")]
    Convergence(String),
    /// A matrix was too ill-conditioned (or not positive definite).
    #[error("conditioning error: {0}")]
    Conditioning(String),
    /// A parameter combination with no implemented formula.
    #[error("unsupported: {0}")]
    Unsupported(String),
    /// An SDP was reported infeasible.
    #[error("infeasible: {0}")]
    Infeasible(String),
    /// Filter recovery from an SDP solution failed.
    #[error("recovery error: {0}")]
    Recovery(String),
}

pub type Result<T> = std::result::Result<T, Error>;
