use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid skeleton: {0}")]
    InvalidSkeleton(String),

    #[error("invalid motion clip: {0}")]
    InvalidClip(String),

    #[error("non-finite euler angle at frame {frame}, joint {joint}")]
    NonFiniteAngle { frame: usize, joint: usize },

    #[error("shape mismatch for {what}: expected {expected}, got {actual}")]
    ShapeMismatch {
        what: &'static str,
        expected: String,
        actual: String,
    },

    #[error("sequence too short: {0}")]
    TooShort(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("training diverged at epoch {epoch}: {reason}")]
    Diverged { epoch: usize, reason: String },

    #[error("sampling produced non-finite values at step {step}")]
    SamplingNaN { step: usize },

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("gesture database: {0}")]
    Database(String),

    #[error("llm client: {0}")]
    Llm(String),

    #[error("overlapping spans: {0}")]
    OverlappingSpans(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error(transparent)]
    Tensor(#[from] candle_core::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn shape(what: &'static str, expected: impl ToString, actual: impl ToString) -> Self {
        Error::ShapeMismatch {
            what,
            expected: expected.to_string(),
            actual: actual.to_string(),
        }
    }
}
