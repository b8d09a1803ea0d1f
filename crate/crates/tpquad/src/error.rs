//! Error type shared across the crate.
//!
//! Diagnostic payloads are stored as `f64` regardless of the working scalar
//! type, so the error enum stays non-generic.

/// Errors produced by distribution constructors, factorizations, quadrature
/// weight computation, and filtering.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A matrix stayed indefinite after the whole jitter ladder was applied.
    #[error("{rows}x{cols} matrix not positive definite (max jitter tried: {max_jitter:.3e})")]
    NotPositiveDefinite {
        rows: usize,
        cols: usize,
        max_jitter: f64,
    },

    /// A matrix expected to be symmetric was not, within tolerance.
    #[error("matrix not symmetric: max asymmetry {asymmetry:.3e} exceeds tolerance {tolerance:.3e}")]
    NotSymmetric { asymmetry: f64, tolerance: f64 },

    /// Degrees of freedom of a distribution must exceed 2 for its covariance
    /// to be finite.
    #[error("degrees of freedom {dof} must be > 2")]
    DofTooSmall { dof: f64 },

    /// Degrees of freedom of the integrand model must exceed 2.
    #[error("model degrees of freedom {dof} must be > 2")]
    ModelDofTooSmall { dof: f64 },

    /// Vector or matrix dimensions disagree.
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    /// Mixture weights must be in [0, 1] and sum to one.
    #[error("mixture weights sum to {sum}, expected 1 within {tolerance:.1e}")]
    InvalidMixtureWeights { sum: f64, tolerance: f64 },

    /// The innovation covariance of a measurement update could not be
    /// factorized.
    #[error("innovation covariance is singular")]
    SingularInnovationCovariance,
}

pub type Result<T> = std::result::Result<T, Error>;
