//! Append-only JSONL event log. Every state change is an event; state is a
//! fold over the log.

use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::ReviewError;
use crate::types::{CreateSession, Decision, RegisterCohort};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Event {
    CohortRegistered(RegisterCohort),
    SessionCreated {
        session_id: String,
        request: CreateSession,
        case_order: Vec<String>,
        created_at: u64,
    },
    DecisionRecorded {
        session_id: String,
        decision: Decision,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogEntry {
    pub seq: u64,
    #[serde(flatten)]
    pub event: Event,
}

/// In-memory copy of the log, optionally mirrored to a file that is flushed
/// and synced on every append.
#[derive(Debug, Default)]
pub struct EventLog {
    entries: Vec<LogEntry>,
    file: Option<(PathBuf, File)>,
}

impl EventLog {
    pub fn in_memory() -> Self {
        Self::default()
    }

    /// Opens (or creates) a log file, returning it with its existing entries.
    pub fn open(path: impl AsRef<Path>) -> Result<Self, ReviewError> {
        let path = path.as_ref().to_path_buf();
        let entries = if path.exists() {
            read_entries(&path)?
        } else {
            Vec::new()
        };
        let file = OpenOptions::new().create(true).append(true).open(&path)?;
        Ok(Self {
            entries,
            file: Some((path, file)),
        })
    }

    pub fn entries(&self) -> &[LogEntry] {
        &self.entries
    }

    pub fn path(&self) -> Option<&Path> {
        self.file.as_ref().map(|(p, _)| p.as_path())
    }

    pub fn next_seq(&self) -> u64 {
        self.entries.last().map_or(1, |e| e.seq + 1)
    }

    pub fn append(&mut self, event: Event) -> Result<&LogEntry, ReviewError> {
        let entry = LogEntry {
            seq: self.next_seq(),
            event,
        };
        if let Some((_, file)) = &mut self.file {
            let mut line = serde_json::to_vec(&entry)?;
            line.push(b'\n');
            file.write_all(&line)?;
            file.sync_data()?;
        }
        self.entries.push(entry);
        Ok(self.entries.last().expect("just pushed"))
    }
}

/// Reads a log, checking that sequence numbers increase strictly.
pub fn read_entries(path: &Path) -> Result<Vec<LogEntry>, ReviewError> {
    let reader = BufReader::new(File::open(path)?);
    let mut out: Vec<LogEntry> = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let entry: LogEntry = serde_json::from_str(&line)
            .map_err(|e| ReviewError::Log(format!("{}:{}: {e}", path.display(), i + 1)))?;
        if let Some(prev) = out.last() {
            if entry.seq <= prev.seq {
                return Err(ReviewError::Log(format!(
                    "{}:{}: sequence {} does not follow {}",
                    path.display(),
                    i + 1,
                    entry.seq,
                    prev.seq
                )));
            }
        }
        out.push(entry);
    }
    Ok(out)
}
