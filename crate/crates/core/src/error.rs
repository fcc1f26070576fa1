use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the library.
#[derive(Debug, Error)]
pub enum QmcError {
    #[error("invalid base {0}: expected a prime >= 2")]
    InvalidBase(u64),

    #[error("value {value} out of range (must be < {bound})")]
    Range { value: u64, bound: u128 },

    #[error("digit count {m} too large for base {base}")]
    TooManyDigits { base: u64, m: u32 },

    #[error("order error: {0}")]
    Order(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("sequence exhausted: requested {requested} points but only {capacity} are available")]
    Exhausted { requested: u128, capacity: u128 },

    #[error("precision error: {0}")]
    Precision(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("Gram structure error: {0}")]
    Structure(String),

    #[error("singular Gram matrix: eigenvalue {index} has magnitude {magnitude:e}")]
    SingularGram { index: usize, magnitude: f64 },

    #[error("length mismatch: expected {expected}, got {got}")]
    Length { expected: usize, got: usize },

    #[error("length {0} is not a power of two")]
    NotPowerOfTwo(usize),

    #[error("kind mismatch: {0}")]
    KindMismatch(String),

    #[error("invalid degrees of freedom {0}: need at least one (R >= 2 replications)")]
    Dof(usize),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("digital interlacing is not available for Halton points (alpha = {0})")]
    Interlacing(usize),

    #[error("unknown integrand '{0}'")]
    UnknownIntegrand(String),

    #[error("{path}:{line}: {msg}")]
    Parse {
        path: String,
        line: usize,
        msg: String,
    },

    #[error("expression error at column {pos}: {msg}")]
    Expression { pos: usize, msg: String },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, QmcError>;

impl QmcError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        QmcError::Io {
            path: path.into(),
            source,
        }
    }
}
