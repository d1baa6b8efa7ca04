use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("shape mismatch: expected {expected:?}, found {found:?}")]
    ShapeMismatch {
        expected: Vec<usize>,
        found: Vec<usize>,
    },

    #[error("invalid shape {shape:?}: {reason}")]
    InvalidShape { shape: Vec<usize>, reason: String },

    #[error("pooling window {window:?} does not fit signal extent {extent:?}")]
    WindowTooLarge {
        window: Vec<usize>,
        extent: Vec<usize>,
    },

    #[error("structuring function has no in-bounds offset at position {position:?}")]
    EmptyWindow { position: Vec<usize> },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("backward root must be a scalar, found shape {0:?}")]
    NonScalarRoot(Vec<usize>),

    #[error("configuration space too large: 2^{bits} exceeds the 2^{limit} cap")]
    TooManyConfigurations { bits: usize, limit: usize },

    #[error("reconstruction mismatch at configuration {witness}")]
    ReconstructionMismatch { witness: String },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
