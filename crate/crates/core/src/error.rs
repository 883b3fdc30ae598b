//! Error types shared across the crate.

use thiserror::Error;

/// Crate-wide error type. Variants are grouped by the failure domain so
/// callers (notably the CLI) can map them onto exit codes.
#[derive(Debug, Error)]
pub enum Error {
    /// Incompatible tensor shapes or dimensions.
    #[error("shape error: {0}")]
    Shape(String),

    /// An argument violated an operation's precondition.
    #[error("invalid argument: {0}")]
    InvalidArg(String),

    /// Bad run configuration (rejected before any work starts).
    #[error("invalid config: {0}")]
    Config(String),

    /// A NaN/Inf surfaced where finite values are required.
    #[error("numerical abort: {0}")]
    NonFinite(String),

    /// Malformed or truncated input data file.
    #[error("data format error: {0}")]
    Format(String),

    /// Checkpoint file corruption or tag mismatch.
    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
