//! Error types shared across the library.

use thiserror::Error;

/// Library-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A model parameter required by the family is absent.
    #[error("missing parameter `{0}`")]
    MissingParameter(String),

    /// A parameter key not understood by the model family.
    #[error("unknown parameter `{0}`")]
    UnknownParameter(String),

    /// A parameter violates its documented range constraint.
    #[error("range violation: {0}")]
    RangeViolation(String),

    /// Requested simulation exceeds the configured memory budget.
    #[error("resource limit: {0}")]
    ResourceLimit(String),

    /// A simulation step produced a non-finite value; the batch is aborted.
    #[error("numerical breakdown: {0}")]
    NumericalBreakdown(String),

    /// Payoff sampling does not align with the simulation grid.
    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    /// Too few samples for the requested statistic.
    #[error("insufficient samples: need at least {needed}, got {got}")]
    InsufficientSamples { needed: usize, got: usize },

    /// A sample was NaN or infinite.
    #[error("non-finite sample at index {0}")]
    NonFiniteSample(usize),

    /// Special function evaluated at a pole.
    #[error("pole at {0}")]
    PoleError(f64),

    /// Result exceeds f64 range.
    #[error("overflow: {0}")]
    Overflow(String),

    /// Series failed to converge within the term cap.
    #[error("no convergence: {0}")]
    NonConvergence(String),

    /// Argument outside the supported domain.
    #[error("domain error: {0}")]
    DomainError(String),

    /// Convergence-theorem moment conditions fail and no override was given.
    #[error("conditions failed: {0}")]
    ConditionsFailed(String),

    /// Too few rows with gap significantly above its standard error.
    #[error("insufficient signal: {0}")]
    InsufficientSignal(String),
}
