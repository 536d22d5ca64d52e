//! Clinician review study service: unaided and model-assisted sessions over a
//! registered cohort, blinded case serving, one consensus decision per case,
//! and accuracy reports recomputable from an append-only event log.

pub mod api;
pub mod error;
pub mod events;
pub mod service;
pub mod state;
pub mod types;

pub use api::{router, serve, ErrorBody};
pub use error::ReviewError;
pub use events::{Event, EventLog, LogEntry};
pub use service::{system_clock, Clock, ReviewService};
pub use state::ReviewState;
pub use types::*;

/// Keys that must never appear anywhere in an unaided case view.
pub const BLINDED_KEYS: [&str; 5] = ["predicted_label", "probability", "score", "category", "rank"];

/// Recursively collects every object key in a JSON value that is in
/// [`BLINDED_KEYS`] (or otherwise carries model output).
pub fn blinded_key_violations(value: &serde_json::Value) -> Vec<String> {
    fn walk(v: &serde_json::Value, out: &mut Vec<String>) {
        match v {
            serde_json::Value::Object(map) => {
                for (k, child) in map {
                    if BLINDED_KEYS.contains(&k.as_str()) || matches!(k.as_str(), "assist" | "p_epilepsy") {
                        out.push(k.clone());
                    }
                    walk(child, out);
                }
            }
            serde_json::Value::Array(items) => items.iter().for_each(|c| walk(c, out)),
            _ => {}
        }
    }
    let mut out = Vec::new();
    walk(value, &mut out);
    out
}
