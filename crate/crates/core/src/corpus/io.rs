use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{Cohort, Note, NoteRecord};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Jsonl,
    Csv,
}

impl Format {
    /// Guesses the format from a file extension, defaulting to JSONL.
    pub fn from_path(path: &Path) -> Format {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("csv") => Format::Csv,
            _ => Format::Jsonl,
        }
    }
}

impl FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "jsonl" => Ok(Format::Jsonl),
            "csv" => Ok(Format::Csv),
            other => Err(Error::InvalidArgument(format!("unknown format {other:?}"))),
        }
    }
}

fn at_line(line: usize, e: Error) -> Error {
    Error::Parse {
        line,
        message: e.to_string(),
    }
}

/// Reads and validates a cohort file.
pub fn ingest(path: impl AsRef<Path>, format: Format) -> Result<Cohort> {
    let path = path.as_ref();
    let records = match format {
        Format::Jsonl => read_records_jsonl(BufReader::new(File::open(path)?))?,
        Format::Csv => read_records_csv(File::open(path)?)?,
    };
    let mut notes = Vec::with_capacity(records.len());
    for (line, rec) in records {
        notes.push(Note::try_from(rec).map_err(|e| at_line(line, e))?);
    }
    Cohort::new(notes)
}

fn read_records_jsonl(reader: impl BufRead) -> Result<Vec<(usize, NoteRecord)>> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: NoteRecord = serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: i + 1,
            message: e.to_string(),
        })?;
        out.push((i + 1, rec));
    }
    Ok(out)
}

fn read_records_csv(reader: impl std::io::Read) -> Result<Vec<(usize, NoteRecord)>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let mut out = Vec::new();
    for row in rdr.deserialize::<NoteRecord>() {
        match row {
            Ok(rec) => {
                let line = out.len() + 2;
                out.push((line, rec));
            }
            Err(e) => {
                let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
                return Err(Error::Parse {
                    line,
                    message: e.to_string(),
                });
            }
        }
    }
    Ok(out)
}

/// Reads a cohort previously written by [`write_jsonl`].
pub fn read_jsonl(path: impl AsRef<Path>) -> Result<Cohort> {
    ingest(path, Format::Jsonl)
}

pub fn write_jsonl(cohort: &Cohort, path: impl AsRef<Path>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for n in cohort.notes() {
        serde_json::to_writer(&mut w, n)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}
