use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid action {0}; expected 0, 1 or 2")]
    InvalidAction(usize),

    #[error("{what} = {value} is outside [{lo}, {hi}]")]
    OutOfRange {
        what: &'static str,
        value: f64,
        lo: f64,
        hi: f64,
    },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    /// A learner or tuner produced a non-finite value.
    #[error("divergence detected in {source_name} at step {step}: {detail}")]
    Divergence {
        source_name: &'static str,
        step: u64,
        detail: String,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(String),

    #[error("malformed checkpoint: {0}")]
    Checkpoint(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
