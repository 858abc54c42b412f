use thiserror::Error;

/// Errors raised across the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A parameter or argument outside its admissible domain.
    #[error("domain error: {0}")]
    Domain(String),

    /// A request that is inconsistent with the vine structure (wrong
    /// dimension, non-adjacent conditioning set, bad edge count).
    #[error("structure error: {0}")]
    Structure(String),

    /// Root finding, quadrature or optimization went wrong.
    #[error("numerical error: {0}")]
    Numerical(String),

    /// Input data that cannot be used (empty, malformed, no events).
    #[error("data error: {0}")]
    Data(String),
}

pub type Result<T> = std::result::Result<T, Error>;
