use std::path::PathBuf;

/// Crate-wide error type.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: operator is {expected}, argument is {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("eigensolver did not converge within {iterations} iterations (best residual {residual:.3e}, value {value:.6e})")]
    EigenNoConvergence {
        value: f64,
        residual: f64,
        iterations: usize,
    },

    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    #[error("problem size {n} exceeds the hard cap {cap} for exhaustive search")]
    TooLarge { n: usize, cap: usize },

    #[error("non-finite cost encountered; the operator produced NaN or Inf")]
    NonFiniteCost,

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error in {path} at line {line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("config error: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
