use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid construal: {0}")]
    InvalidConstrual(String),

    #[error("construal space too large: {count} construable objects exceeds the cap of {cap}")]
    EnumerationTooLarge { count: usize, cap: usize },

    #[error("invalid object state: {0}")]
    InvalidState(String),

    #[error("scenario validation failed: {}", .0.join("; "))]
    Validation(Vec<String>),

    #[error("step on terminal state {0:?}")]
    StepOnTerminal([i32; 2]),

    #[error("value iteration did not converge after {iterations} iterations (residual {residual:e})")]
    Divergence { iterations: usize, residual: f64 },

    #[error("scenario generation failed after {attempts} attempts: {reason}")]
    GenerationFailed { attempts: usize, reason: String },

    #[error("data error: {0}")]
    Data(String),

    #[error("unknown object id {0:?}")]
    UnknownObject(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("{path}: {source}")]
    Parse {
        path: String,
        #[source]
        source: serde_json::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for errors caused by bad input rather than numerical failure.
    pub fn is_validation(&self) -> bool {
        !matches!(self, Error::Divergence { .. })
    }
}
