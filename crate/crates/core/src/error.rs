//! Error type shared by every module.

use thiserror::Error;

/// Result alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("R-transform evaluated at w = {w}, which is at or beyond the pole at w = 1")]
    Pole { w: f64 },

    #[error("{what} did not converge after {iterations} iterations (last residual {residual:.3e})")]
    NoConvergence {
        what: String,
        iterations: usize,
        residual: f64,
    },

    #[error("no sign change found on [{lo}, {hi}] while {what}")]
    Bracket { what: String, lo: f64, hi: f64 },

    #[error("RS branch divergent, alpha* = {alpha_star:.4}")]
    Diverged { alpha_star: f64 },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("limit exceeded: {0}")]
    Limit(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for failures of the numerics (as opposed to bad input or I/O).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Pole { .. }
                | Error::NoConvergence { .. }
                | Error::Bracket { .. }
                | Error::Diverged { .. }
                | Error::Domain(_)
        )
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}
