use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid dimension {0}: states need at least two amplitudes")]
    InvalidDimension(usize),

    #[error("seed role mismatch: expected {expected}, got {actual}")]
    RoleMismatch { expected: String, actual: String },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("length mismatch for {what}: expected {expected}, got {actual}")]
    LengthMismatch {
        what: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("empty input")]
    EmptyInput,

    #[error("ragged input: all strings must share one length")]
    RaggedLengths,

    #[error("key space of 2^{0} keys is too large for exhaustive enumeration")]
    KeySpaceTooLarge(usize),

    #[error("too few samples: need at least {needed}, got {got}")]
    TooFewSamples { needed: usize, got: usize },

    #[error("undersampled cells: expected count {expected:.3} per cell is below 5")]
    UndersampledCells { expected: f64 },

    #[error("alphabet mismatch: {0} vs {1} outcomes")]
    AlphabetMismatch(usize, usize),

    #[error("not a valid state: {0}")]
    InvalidState(String),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
