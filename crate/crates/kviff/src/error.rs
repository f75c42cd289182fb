//! Common error type shared across the crate.

use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by filters, scenario builders, the grid oracle, and the
/// experiment harness.
#[derive(Debug, Error)]
pub enum Error {
    /// Caller violated an interface contract (dimension mismatch, negative
    /// weight, unknown name, ...).
    #[error("usage error: {0}")]
    Usage(String),

    /// A numerical routine failed (non-PSD covariance, solve failure after
    /// jitter escalation, unstable integration step).
    #[error("numerical error: {0}")]
    Numerical(String),

    /// Configuration file could not be parsed or validated.
    #[error("config error: {0}")]
    Config(String),

    /// Filesystem failure, annotated with the offending path.
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// The kernel flow produced a non-finite particle.
    #[error(
        "flow diverged at inner step {step}: particle became non-finite; try a smaller step size"
    )]
    Divergence { step: usize },

    /// Posterior mass underflowed during a grid Bayes update.
    #[error("degenerate likelihood: posterior mass underflowed ({mass:e})")]
    DegenerateLikelihood { mass: f64 },
}

impl Error {
    pub(crate) fn usage(msg: impl Into<String>) -> Self {
        Error::Usage(msg.into())
    }

    pub(crate) fn numerical(msg: impl Into<String>) -> Self {
        Error::Numerical(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
