//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A parameter lies outside its mathematical domain (bad alpha, q, epsilon, ...).
    #[error("parameter out of domain: {0}")]
    Domain(String),

    /// An index (rank, row, coordinate) is out of range.
    #[error("index out of range: {0}")]
    Index(String),

    /// An operation that needs at least one element received none.
    #[error("empty input: {0}")]
    Empty(String),

    /// Two objects that must agree (e.g. estimator alpha vs sketch alpha) do not.
    #[error("configuration mismatch: {0}")]
    Config(String),

    /// The calibration table does not cover the requested cell.
    #[error("calibration miss: {0}")]
    CalibrationMiss(String),

    /// A computation degenerated numerically and no fallback applies.
    #[error("numerical degeneracy: {0}")]
    Degenerate(String),

    /// Malformed input data or sketch file.
    #[error("format error: {0}")]
    Format(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
