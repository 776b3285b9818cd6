use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{ExecMode, ExecRequest, Executor};
use crate::literal::{self, Value};
use crate::model::{sha256_hex, ExecStatus, ExecutionResult};

/// What a registered fake function does for one call.
#[derive(Debug, Clone, PartialEq)]
pub enum FakeOutcome {
    Return(Value),
    /// Guest exception; the text is the final traceback line, e.g. `AssertionError: ...`.
    Raise(String),
    Timeout,
    OutOfMemory,
}

type FakeFn = Arc<dyn Fn(&[Value]) -> FakeOutcome + Send + Sync>;

/// One row of a fake execution table file (JSON lines).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FakeTableEntry {
    pub code: String,
    pub entry: String,
    pub args_literal: String,
    pub status: ExecStatus,
    #[serde(default)]
    pub output: Option<String>,
    #[serde(default)]
    pub error_text: Option<String>,
}

/// Status, output and error text.
type TableRow = (ExecStatus, Option<String>, Option<String>);

/// In-memory executor keyed by (code digest, entry, canonical args).
///
/// Programs are looked up by the SHA-256 of their trimmed source. A call
/// is answered from the exact-args table first, then from a registered
/// Rust closure. Literal evaluation uses [`crate::literal`]. Unknown
/// programs behave like guest code lacking the entry point.
#[derive(Default, Clone)]
pub struct FakeExecutor {
    functions: HashMap<(String, String), FakeFn>,
    table: HashMap<(String, String, String), TableRow>,
    calls: Arc<AtomicU64>,
}

impl std::fmt::Debug for FakeExecutor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FakeExecutor")
            .field("functions", &self.functions.len())
            .field("table", &self.table.len())
            .finish()
    }
}

fn code_key(code: &str) -> String {
    sha256_hex(code.trim().as_bytes())
}

fn args_key(args_literal: &str) -> String {
    match literal::parse_args(args_literal) {
        Ok(args) => Value::Tuple(args).canonical(),
        Err(_) => args_literal.trim().to_string(),
    }
}

#[derive(Debug, thiserror::Error)]
pub enum FakeTableError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {msg}")]
    Entry { line: usize, msg: String },
}

impl FakeExecutor {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register_fn<F>(&mut self, code: &str, entry: &str, f: F) -> &mut Self
    where
        F: Fn(&[Value]) -> FakeOutcome + Send + Sync + 'static,
    {
        self.functions.insert((code_key(code), entry.to_string()), Arc::new(f));
        self
    }

    /// Registers the canonical result of one exact call.
    pub fn register_result(
        &mut self,
        code: &str,
        entry: &str,
        args_literal: &str,
        outcome: FakeOutcome,
    ) -> &mut Self {
        let row = match outcome {
            FakeOutcome::Return(v) => (ExecStatus::Ok, Some(v.canonical()), None),
            FakeOutcome::Raise(e) => (ExecStatus::Exception, None, Some(e)),
            FakeOutcome::Timeout => (ExecStatus::Timeout, None, Some("timed out".into())),
            FakeOutcome::OutOfMemory => (ExecStatus::OutOfMemory, None, Some("MemoryError".into())),
        };
        self.table
            .insert((code_key(code), entry.to_string(), args_key(args_literal)), row);
        self
    }

    pub fn add_entry(&mut self, e: FakeTableEntry) -> Result<&mut Self, String> {
        if (e.status == ExecStatus::Ok) != e.output.is_some() {
            return Err("output must be present exactly when status is ok".into());
        }
        let output = match e.output {
            Some(o) => Some(literal::canonicalize(&o).map_err(|err| format!("output {o:?}: {err}"))?),
            None => None,
        };
        self.table.insert(
            (code_key(&e.code), e.entry, args_key(&e.args_literal)),
            (e.status, output, e.error_text),
        );
        Ok(self)
    }

    /// Loads a JSON-lines table of [`FakeTableEntry`] rows.
    pub fn from_table_file(path: &Path) -> Result<Self, FakeTableError> {
        let mut fake = FakeExecutor::new();
        let reader = BufReader::new(File::open(path)?);
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let entry: FakeTableEntry = serde_json::from_str(&line).map_err(|e| FakeTableError::Entry {
                line: i + 1,
                msg: e.to_string(),
            })?;
            fake.add_entry(entry)
                .map_err(|msg| FakeTableError::Entry { line: i + 1, msg })?;
        }
        Ok(fake)
    }

    /// Requests served so far.
    pub fn call_count(&self) -> u64 {
        self.calls.load(Ordering::Relaxed)
    }

    fn call(&self, request: &ExecRequest) -> ExecutionResult {
        let id = request.request_id.clone();
        let code = code_key(&request.code);
        if let Some((status, output, error)) =
            self.table
                .get(&(code.clone(), request.entry.clone(), args_key(&request.args_literal)))
        {
            return ExecutionResult {
                status: *status,
                output_canonical: output.clone(),
                error_text: error.clone(),
                wall_ms: if *status == ExecStatus::Timeout { request.limits.wall_ms } else { 1 },
                request_id: id,
            };
        }
        let Some(f) = self.functions.get(&(code, request.entry.clone())) else {
            return ExecutionResult::failed(
                id,
                ExecStatus::Exception,
                format!("entry not found: {}", request.entry),
                1,
            );
        };
        let args = match literal::parse_args(&request.args_literal) {
            Ok(a) => a,
            Err(e) => return ExecutionResult::failed(id, ExecStatus::Exception, e.to_string(), 1),
        };
        match f(&args) {
            FakeOutcome::Return(v) => {
                let text = v.canonical();
                if text.len() as u64 > request.limits.max_output_bytes {
                    return ExecutionResult::failed(id, ExecStatus::Exception, "output exceeds max_output_bytes", 1);
                }
                ExecutionResult::ok(id, text, 1)
            }
            FakeOutcome::Raise(e) => ExecutionResult::failed(id, ExecStatus::Exception, e, 1),
            FakeOutcome::Timeout => {
                ExecutionResult::failed(id, ExecStatus::Timeout, "timed out", request.limits.wall_ms)
            }
            FakeOutcome::OutOfMemory => ExecutionResult::failed(id, ExecStatus::OutOfMemory, "MemoryError", 1),
        }
    }
}

impl Executor for FakeExecutor {
    fn execute(&self, request: &ExecRequest) -> ExecutionResult {
        self.calls.fetch_add(1, Ordering::Relaxed);
        match request.mode {
            ExecMode::EvalLiteral => match literal::canonicalize(&request.args_literal) {
                Ok(text) => ExecutionResult::ok(request.request_id.clone(), text, 1),
                Err(literal::LiteralError::NonLiteral(what)) => ExecutionResult::failed(
                    request.request_id.clone(),
                    ExecStatus::Exception,
                    format!("non-literal: {what}"),
                    1,
                ),
                Err(e) => ExecutionResult::failed(request.request_id.clone(), ExecStatus::Exception, e.to_string(), 1),
            },
            ExecMode::Call => self.call(request),
        }
    }
}
