//! Error type shared across the crate.

use thiserror::Error;

/// Errors produced by kernel design, smoothing, and estimation routines.
#[derive(Debug, Clone, Error)]
pub enum Error {
    /// The constraint system of a kernel design has no solution
    /// (too few points, inconsistent conditions, rank deficiency).
    #[error("kernel design infeasible: {reason}")]
    DesignInfeasible { reason: String },

    /// The design constraint system is numerically unreliable.
    #[error("design system condition number {condition:.3e} exceeds limit {limit:.1e}")]
    IllConditioned { condition: f64, limit: f64 },

    /// A covariance model is not positive definite or otherwise invalid.
    #[error("invalid covariance: {reason}")]
    InvalidCovariance { reason: String },

    /// The requested kernel order is not supported by this construction.
    #[error("unsupported kernel order ({q},{p}): {reason}")]
    UnsupportedOrder { q: usize, p: usize, reason: String },

    /// A smoothing window holds too few samples.
    #[error("insufficient data: window holds {available} samples, {needed} needed")]
    InsufficientData { needed: usize, available: usize },

    /// A demodulated sample has zero modulus; its phase is undefined.
    #[error("zero modulus at sample {index}; phase undefined")]
    ZeroModulus { index: usize },

    /// A multitone correction referenced a line with no reconstruction yet.
    #[error("no reconstruction available for tone {line}")]
    MissingToneEstimate { line: usize },

    /// Generic precondition violation on user input.
    #[error("invalid input: {reason}")]
    InvalidInput { reason: String },
}

impl Error {
    pub(crate) fn invalid_input(reason: impl Into<String>) -> Self {
        Error::InvalidInput {
            reason: reason.into(),
        }
    }

    pub(crate) fn infeasible(reason: impl Into<String>) -> Self {
        Error::DesignInfeasible {
            reason: reason.into(),
        }
    }
}

/// Crate-wide result alias.
pub type Result<T> = core::result::Result<T, Error>;
