use alloc::string::String;
use core::fmt;

/// Errors produced by the numeric layers.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Error {
    /// An input point lies outside the domain of the operation
    /// (non-positive coordinate, origin for polar maps, off-grid image, ...).
    Domain(String),
    /// A model parameter is out of its admissible range.
    Parameter(String),
    /// A numeric procedure failed (non-PSD matrix after jitter escalation,
    /// singular matrix, non-positive value fed to a log fit, ...).
    Numeric(String),
    /// Two inputs that must agree in shape or point set do not.
    Mismatch(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Domain(msg) => write!(f, "domain error: {msg}"),
            Error::Parameter(msg) => write!(f, "parameter error: {msg}"),
            Error::Numeric(msg) => write!(f, "numeric error: {msg}"),
            Error::Mismatch(msg) => write!(f, "mismatch: {msg}"),
        }
    }
}

impl core::error::Error for Error {}

pub type Result<T> = core::result::Result<T, Error>;
