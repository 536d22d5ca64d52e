use thiserror::Error;

/// Errors raised anywhere in the screening pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("duplicate note id {0:?}")]
    DuplicateId(String),

    #[error("unknown label {0:?} (expected \"Epilepsy\" or \"PNES\")")]
    UnknownLabel(String),

    #[error("note {0:?} has empty text")]
    EmptyText(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("label class {label} has {available} notes, at least {required} required")]
    ClassTooSmall {
        label: String,
        available: usize,
        required: usize,
    },

    #[error("infeasible rebalance: need {required_epilepsy} Epilepsy / {required_pnes} PNES, have {available_epilepsy} / {available_pnes}")]
    InfeasibleRebalance {
        required_epilepsy: usize,
        required_pnes: usize,
        available_epilepsy: usize,
        available_pnes: usize,
    },

    #[error("token id {id} out of range for vocabulary of size {vocab}")]
    TokenOutOfRange { id: usize, vocab: usize },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("metric undefined: {0}")]
    Undefined(String),

    #[error("training aborted at step {step} (note {note_id}): {message}")]
    Training {
        step: usize,
        note_id: String,
        message: String,
    },

    #[error("checkpoint: {0}")]
    Checkpoint(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
