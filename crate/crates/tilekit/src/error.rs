//! Error type shared across the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum TilekitError {
    /// A caller-supplied value violates an operation precondition.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    /// A tile scale cannot be represented on the requested grid (frequency
    /// support thinner than one lattice cell, or center off-lattice).
    #[error("unresolvable scale: {0}")]
    Resolution(String),
    /// A tile or point lies outside the grid window.
    #[error("out of window: {0}")]
    OutOfWindow(String),
    /// A multiplier has no evaluable points on the unit sphere.
    #[error("degenerate multiplier: {0}")]
    DegenerateMultiplier(String),
    /// Scenario or configuration validation failure.
    #[error("validation failed: {0}")]
    Validation(String),
    /// An internal invariant was violated (with diagnostics).
    #[error("internal error: {0}")]
    Internal(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, TilekitError>;

impl TilekitError {
    pub fn invalid(msg: impl Into<String>) -> Self {
        TilekitError::InvalidArgument(msg.into())
    }
}
