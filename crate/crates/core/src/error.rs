use thiserror::Error;

/// Errors produced by the library.
///
/// Rank deficiency and complete separation are *not* errors at the kernel
/// level (they map to a `-inf` log kernel); they only surface as errors from
/// the raw fitting routines.
#[derive(Debug, Error)]
pub enum Error {
    /// Invalid configuration or parameters (bad prior parameters, mismatched
    /// dimensions, out-of-range tuning constants, ...).
    #[error("invalid configuration: {0}")]
    Config(String),

    /// Numerical failure (non-finite intermediate, failed convergence).
    #[error("numerical failure: {0}")]
    Numeric(String),

    /// The normal-equation (or Hessian) matrix is numerically singular.
    #[error("singular fit: {0}")]
    SingularFit(String),

    /// Complete separation detected while fitting a logistic model.
    #[error("complete separation: {0}")]
    Separation(String),

    /// File or stream I/O failure.
    #[error("i/o failure: {0}")]
    Io(#[from] std::io::Error),

    /// Failed to parse a serialized artifact (trace file, model encoding).
    #[error("parse failure: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
