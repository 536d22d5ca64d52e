//! Screening of clinical notes for epilepsy versus psychogenic non-epileptic
//! seizures: cohort protocols, a reference classifier with LoRA/NF4
//! adaptation, sentence-level integrated-gradients explanations and
//! bootstrap evaluation.

pub mod adapt;
pub mod corpus;
pub mod error;
pub mod eval;
pub mod exec;
pub mod experiment;
pub mod explain;
pub mod linalg;
pub mod model;
pub mod rng;
pub mod textproc;

pub use error::{Error, Result};
pub use exec::Exec;

/// Version string recorded in run directories and checkpoints.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
