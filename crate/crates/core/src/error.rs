use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("signal did not cross the failure threshold before t = {cap}")]
    NoThresholdCrossing { cap: f64 },

    #[error("age {age} is beyond the failure time {failure_time}; component already failed")]
    AlreadyFailed { age: f64, failure_time: f64 },

    #[error("not enough training data: {0}")]
    InsufficientTraining(String),

    #[error("observed signal has no degradation-phase samples")]
    NoDegradationPhase,

    #[error("signal is already at or above the failure threshold")]
    AtThreshold,

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("component {component} has no admissible repair epoch (t* = 1)")]
    NoFeasibleRepairEpoch { component: usize },

    #[error("component {0} has no repair epoch")]
    MissingRepairEpoch(usize),

    #[error("solver backend `{0}` is not available in this build")]
    BackendUnavailable(String),

    #[error("solver failed: {0}")]
    Solver(String),

    #[error("model is infeasible: {0}")]
    Infeasible(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
