//! Line-delimited JSON persistence.
//!
//! Each line is one record whose fields are exactly the struct fields in
//! declaration order; there is no type tag. The record kind is recovered
//! from a discriminating key: `chain_id` (chain), `attempt_index`
//! (attempt), `attempts_m` (summary), otherwise a problem.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::Value;

use super::types::{AttemptRecord, Chain, InvariantError, PassRateSummary, ProblemSpec};

#[derive(Debug, thiserror::Error)]
pub enum RecordError {
    #[error("serialization failed: {0}")]
    Serialization(String),
    #[error("schema error: {0}")]
    Schema(String),
    #[error(transparent)]
    Invariant(#[from] InvariantError),
    #[error("{path}:{line}: {source}")]
    AtLine {
        path: String,
        line: usize,
        #[source]
        source: Box<RecordError>,
    },
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Record {
    Problem(ProblemSpec),
    Attempt(AttemptRecord),
    Summary(PassRateSummary),
    Chain(Chain),
}

impl Record {
    fn validate(&self) -> Result<(), InvariantError> {
        match self {
            Record::Problem(p) => p.validate(),
            Record::Attempt(a) => a.validate(),
            Record::Summary(s) => s.validate(),
            Record::Chain(c) => c.validate(),
        }
    }
}

impl From<ProblemSpec> for Record {
    fn from(p: ProblemSpec) -> Self {
        Record::Problem(p)
    }
}

impl From<AttemptRecord> for Record {
    fn from(a: AttemptRecord) -> Self {
        Record::Attempt(a)
    }
}

impl From<PassRateSummary> for Record {
    fn from(s: PassRateSummary) -> Self {
        Record::Summary(s)
    }
}

impl From<Chain> for Record {
    fn from(c: Chain) -> Self {
        Record::Chain(c)
    }
}

/// Renders a record as a single line (no trailing newline).
pub fn encode_record(record: &Record) -> Result<String, RecordError> {
    record.validate()?;
    let line = match record {
        Record::Problem(p) => to_line(p),
        Record::Attempt(a) => to_line(a),
        Record::Summary(s) => to_line(s),
        Record::Chain(c) => to_line(c),
    }?;
    debug_assert!(!line.contains('\n'));
    Ok(line)
}

fn to_line<T: Serialize>(value: &T) -> Result<String, RecordError> {
    serde_json::to_string(value).map_err(|e| RecordError::Serialization(e.to_string()))
}

pub fn decode_record(line: &str) -> Result<Record, RecordError> {
    let value: Value = serde_json::from_str(line).map_err(|e| RecordError::Schema(e.to_string()))?;
    let obj = value
        .as_object()
        .ok_or_else(|| RecordError::Schema("record must be a JSON object".into()))?;
    let record = if obj.contains_key("chain_id") {
        Record::Chain(from_value(value)?)
    } else if obj.contains_key("attempt_index") {
        Record::Attempt(from_value(value)?)
    } else if obj.contains_key("attempts_m") {
        Record::Summary(from_value(value)?)
    } else {
        Record::Problem(from_value(value)?)
    };
    record.validate()?;
    Ok(record)
}

fn from_value<T: DeserializeOwned>(value: Value) -> Result<T, RecordError> {
    serde_json::from_value(value).map_err(|e| RecordError::Schema(e.to_string()))
}

/// Decodes a line that must hold a problem.
pub fn decode_problem(line: &str) -> Result<ProblemSpec, RecordError> {
    match decode_record(line)? {
        Record::Problem(p) => Ok(p),
        other => Err(RecordError::Schema(format!("expected a problem record, got {}", kind_name(&other)))),
    }
}

fn kind_name(r: &Record) -> &'static str {
    match r {
        Record::Problem(_) => "problem",
        Record::Attempt(_) => "attempt",
        Record::Summary(_) => "summary",
        Record::Chain(_) => "chain",
    }
}

/// Writes records one per line (LF endings), replacing any existing file.
pub fn write_records<I>(path: &Path, records: I) -> Result<usize, RecordError>
where
    I: IntoIterator<Item = Record>,
{
    let io_err = |source| RecordError::Io {
        path: path.display().to_string(),
        source,
    };
    let file = File::create(path).map_err(io_err)?;
    let mut out = BufWriter::new(file);
    let mut n = 0;
    for record in records {
        let line = encode_record(&record)?;
        out.write_all(line.as_bytes()).map_err(io_err)?;
        out.write_all(b"\n").map_err(io_err)?;
        n += 1;
    }
    out.flush().map_err(io_err)?;
    Ok(n)
}

/// Reads every non-blank line of a record file.
pub fn read_records(path: &Path) -> Result<Vec<Record>, RecordError> {
    let io_err = |source| RecordError::Io {
        path: path.display().to_string(),
        source,
    };
    let reader = BufReader::new(File::open(path).map_err(io_err)?);
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(io_err)?;
        if line.trim().is_empty() {
            continue;
        }
        let record = decode_record(&line).map_err(|e| RecordError::AtLine {
            path: path.display().to_string(),
            line: i + 1,
            source: Box::new(e),
        })?;
        out.push(record);
    }
    Ok(out)
}

/// Reads a file that must contain only problem records.
pub fn read_problems(path: &Path) -> Result<Vec<ProblemSpec>, RecordError> {
    read_records(path)?
        .into_iter()
        .map(|r| match r {
            Record::Problem(p) => Ok(p),
            other => Err(RecordError::Schema(format!(
                "{}: expected only problem records, found {}",
                path.display(),
                kind_name(&other)
            ))),
        })
        .collect()
}
