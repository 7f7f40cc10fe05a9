//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by the design, solver and evaluation layers.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument is outside its mathematical domain (angle range, negative
    /// variance, ...).
    #[error("domain error: {0}")]
    Domain(String),

    /// Structural validation failed (dimension mismatch, non-Hermitian input,
    /// cone layout inconsistent with the variable dimension, ...).
    #[error("validation error: {0}")]
    Validation(String),

    /// A design problem was proven infeasible; the report names the binding
    /// constraint family.
    #[error("infeasible: {0}")]
    Infeasible(crate::secure::InfeasibilityReport),

    /// The solver failed to produce a usable point.
    #[error("solver failure: {0}")]
    Solver(String),

    /// Scenario configuration errors, addressed by line/column.
    #[error("{0}")]
    Config(crate::config::ConfigError),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }
}
