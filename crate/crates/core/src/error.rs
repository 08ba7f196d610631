use thiserror::Error;

use crate::model::Violation;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid instance: {0}")]
    InvalidInstance(String),

    #[error("invalid schedule: {0}")]
    InvalidSchedule(Violation),

    /// A size or budget guard tripped. `parameter` names the offending quantity.
    #[error("{parameter} = {value} exceeds the limit {limit}{hint}")]
    TooLarge { parameter: &'static str, value: u128, limit: u128, hint: &'static str },

    #[error("malformed model: {0}")]
    Model(String),

    #[error("integer variable `{0}` has no finite upper bound")]
    UnboundedInteger(String),

    /// The back-to-front scheduler was handed a job set whose load after
    /// `release` does not fit before the common due date.
    #[error("jobs released at or after {release} need {load} time units but only {room} remain")]
    ReleaseOverload { release: u64, load: u64, room: i128 },

    #[error("solution is not usable here: {0}")]
    State(String),

    #[error("internal consistency violated: {0}")]
    Internal(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error("{0}")]
    Parse(String),
}

impl Error {
    pub(crate) fn too_large(parameter: &'static str, value: impl Into<u128>, limit: impl Into<u128>) -> Self {
        Error::TooLarge { parameter, value: value.into(), limit: limit.into(), hint: "" }
    }

    /// Process exit status used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidInstance(_)
            | Error::InvalidSchedule(_)
            | Error::Json(_)
            | Error::Parse(_)
            | Error::Model(_)
            | Error::UnboundedInteger(_)
            | Error::ReleaseOverload { .. }
            | Error::State(_) => 2,
            Error::TooLarge { .. } => 3,
            Error::Internal(_) => 4,
        }
    }
}
