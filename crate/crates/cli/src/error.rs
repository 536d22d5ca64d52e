use thiserror::Error;

use notescreen_core::Error as CoreError;
use notescreen_review::ReviewError;

/// Failures mapped onto process exit codes: 1 usage, 2 data, 3 runtime.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Usage(_) => 1,
            Self::Data(_) => 2,
            Self::Runtime(_) => 3,
        }
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        let msg = e.to_string();
        match e {
            CoreError::InvalidArgument(_) => Self::Usage(msg),
            CoreError::Io(_)
            | CoreError::Json(_)
            | CoreError::Csv(_)
            | CoreError::Parse { .. }
            | CoreError::DuplicateId(_)
            | CoreError::UnknownLabel(_)
            | CoreError::EmptyText(_)
            | CoreError::ClassTooSmall { .. }
            | CoreError::InfeasibleRebalance { .. }
            | CoreError::TokenOutOfRange { .. }
            | CoreError::Checkpoint(_) => Self::Data(msg),
            CoreError::Shape(_) | CoreError::NonFinite(_) | CoreError::Undefined(_) | CoreError::Training { .. } => {
                Self::Runtime(msg)
            }
        }
    }
}

impl From<ReviewError> for CliError {
    fn from(e: ReviewError) -> Self {
        match e {
            ReviewError::BadRequest(m) | ReviewError::Conflict(m) | ReviewError::NotFound(m) => Self::Data(m),
            ReviewError::Core(e) => e.into(),
            other => Self::Runtime(other.to_string()),
        }
    }
}

pub fn io_error(context: impl std::fmt::Display, e: std::io::Error) -> CliError {
    CliError::Runtime(format!("{context}: {e}"))
}
