use thiserror::Error;

/// Errors produced by the estimation toolkit.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("distribution needs at least 2 bins, got {0}")]
    TooFewBins(usize),

    #[error("negative or non-finite probability {value} at index {index}")]
    InvalidProbability { index: usize, value: f64 },

    #[error("probabilities sum to {0}, expected 1")]
    NotNormalized(f64),

    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),

    #[error("sample size must be positive")]
    EmptySample,

    #[error("sample too small for Frequentist-TEB: n = {0}, need n >= 2")]
    SampleTooSmall(u64),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("enumeration of {outcomes} outcomes exceeds the cap of {cap}")]
    OutcomeCapExceeded { outcomes: f64, cap: f64 },

    #[error("convex program is infeasible: {0}")]
    Infeasible(String),

    #[error("solver hit the iteration limit after {0} Newton steps")]
    IterationLimit(usize),

    #[error("zero-count bin {0}; reduce the number of bins")]
    ZeroCountBin(usize),

    #[error("io error: {0}")]
    Io(String),

    #[error("parse error: {0}")]
    Parse(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
