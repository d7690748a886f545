use thiserror::Error;

/// Errors raised across the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid probability: {0}")]
    InvalidProbability(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("window precision exhausted (interval length {0})")]
    PrecisionExhausted(u64),
    #[error("decode failure: {0}")]
    DecodeFailure(String),
    #[error("complexity guard: {0}")]
    ComplexityGuard(String),
    #[error("spectrum is zero at u = {0}")]
    UndefinedRegion(f64),
    #[error("outside domain: {0}")]
    Domain(String),
    #[error("malformed bitstream file: {0}")]
    Format(String),
}

pub type Result<T> = std::result::Result<T, Error>;
