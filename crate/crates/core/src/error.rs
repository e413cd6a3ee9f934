use thiserror::Error;

use crate::sdp::SolveStatus;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid configuration: {0}")]
    Configuration(String),

    /// The sensor sits on a node of one of the controlled modes.
    #[error("assumption violated: |c_{index}| = {value:.3e} is not above tolerance {tol:.1e} (sensor on a node of mode {index})")]
    Assumption { index: usize, value: f64, tol: f64 },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("synthesis failed ({status:?}): {detail}")]
    Synthesis { status: SolveStatus, detail: String },

    #[error("solver inconclusive at tau = {tau}: {detail}")]
    Inconclusive { tau: f64, detail: String },

    #[error("analysis error: {0}")]
    Analysis(String),

    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
