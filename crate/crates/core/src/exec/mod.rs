//! Execution of guest code.
//!
//! [`Executor`] is the seam between grading logic and whatever actually runs
//! the guest program. Two implementations ship: [`SandboxExecutor`], a pool
//! of guest-harness worker processes, and [`FakeExecutor`], an in-memory
//! table for tests and offline runs.

mod fake;
mod pool;
pub mod protocol;

use std::sync::atomic::{AtomicU64, Ordering};

use serde::{Deserialize, Serialize};

pub use fake::{FakeExecutor, FakeOutcome, FakeTableEntry};
pub use pool::{SandboxConfig, SandboxExecutor, DEFAULT_RECYCLE_AFTER, SUPERVISOR_GRACE_MS};

pub use crate::model::{ExecStatus, ExecutionResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExecLimits {
    pub wall_ms: u64,
    pub cpu_ms: u64,
    pub memory_mb: u64,
    pub max_output_bytes: u64,
}

impl Default for ExecLimits {
    fn default() -> Self {
        ExecLimits {
            wall_ms: 5000,
            cpu_ms: 4000,
            memory_mb: 512,
            max_output_bytes: 65536,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid execution limits: {0}")]
pub struct LimitsError(String);

impl ExecLimits {
    pub fn validate(&self) -> Result<(), LimitsError> {
        if self.wall_ms == 0 || self.cpu_ms == 0 || self.memory_mb == 0 || self.max_output_bytes == 0 {
            return Err(LimitsError("all limits must be positive".into()));
        }
        if self.cpu_ms > self.wall_ms {
            return Err(LimitsError(format!("cpu_ms {} exceeds wall_ms {}", self.cpu_ms, self.wall_ms)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExecMode {
    /// Parse `args_literal` as an argument tuple and call `entry`.
    Call,
    /// Parse `args_literal` as a literal and return its canonical form.
    EvalLiteral,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExecRequest {
    pub request_id: String,
    pub code: String,
    pub entry: String,
    pub args_literal: String,
    pub limits: ExecLimits,
    pub mode: ExecMode,
}

impl ExecRequest {
    pub fn call(code: &str, entry: &str, args_literal: &str, limits: ExecLimits) -> Self {
        ExecRequest {
            request_id: next_request_id(),
            code: code.to_string(),
            entry: entry.to_string(),
            args_literal: args_literal.to_string(),
            limits,
            mode: ExecMode::Call,
        }
    }

    pub fn eval_literal(text: &str, limits: ExecLimits) -> Self {
        ExecRequest {
            request_id: next_request_id(),
            code: String::new(),
            entry: String::new(),
            args_literal: text.to_string(),
            limits,
            mode: ExecMode::EvalLiteral,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        match self.mode {
            ExecMode::Call if self.entry.is_empty() => Err("call request without entry".into()),
            ExecMode::Call if self.code.trim().is_empty() => Err("call request without code".into()),
            ExecMode::EvalLiteral if self.args_literal.trim().is_empty() => Err("empty literal".into()),
            _ => self.limits.validate().map_err(|e| e.to_string()),
        }
    }
}

static REQUEST_SEQ: AtomicU64 = AtomicU64::new(0);

/// Process-unique request id; unrelated to dataset record ids.
pub fn next_request_id() -> String {
    format!("{:x}-{:x}", std::process::id(), REQUEST_SEQ.fetch_add(1, Ordering::Relaxed))
}

/// Runs guest requests. Implementations must be safe to share across threads.
pub trait Executor: Send + Sync {
    fn execute(&self, request: &ExecRequest) -> ExecutionResult;

    /// Runs on a worker that has served no other request. Used by the
    /// determinism check so guest global state cannot leak between runs.
    fn execute_fresh(&self, request: &ExecRequest) -> ExecutionResult {
        self.execute(request)
    }
}

impl<E: Executor + ?Sized> Executor for &E {
    fn execute(&self, request: &ExecRequest) -> ExecutionResult {
        (**self).execute(request)
    }

    fn execute_fresh(&self, request: &ExecRequest) -> ExecutionResult {
        (**self).execute_fresh(request)
    }
}

impl<E: Executor + ?Sized> Executor for std::sync::Arc<E> {
    fn execute(&self, request: &ExecRequest) -> ExecutionResult {
        (**self).execute(request)
    }

    fn execute_fresh(&self, request: &ExecRequest) -> ExecutionResult {
        (**self).execute_fresh(request)
    }
}

fn rejected(request: &ExecRequest, why: String) -> ExecutionResult {
    ExecutionResult::failed(request.request_id.clone(), ExecStatus::Exception, why, 0)
}

/// Calls `entry` from `code` on `args_literal`.
pub fn run_function(
    executor: &dyn Executor,
    code: &str,
    entry: &str,
    args_literal: &str,
    limits: ExecLimits,
) -> ExecutionResult {
    let request = ExecRequest::call(code, entry, args_literal, limits);
    if let Err(why) = request.validate() {
        return rejected(&request, why);
    }
    executor.execute(&request)
}

/// Materializes literal text guest-side and returns its canonical form.
pub fn eval_literal(executor: &dyn Executor, text: &str, limits: ExecLimits) -> ExecutionResult {
    let request = ExecRequest::eval_literal(text, limits);
    if let Err(why) = request.validate() {
        return rejected(&request, why);
    }
    executor.execute(&request)
}

/// Outcome of running the same call twice on fresh workers.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DeterminismReport {
    pub first: ExecutionResult,
    pub second: ExecutionResult,
}

impl DeterminismReport {
    /// Both runs succeeded with byte-identical canonical output.
    pub fn is_deterministic(&self) -> bool {
        self.first.is_ok() && self.second.is_ok() && self.first.output_canonical == self.second.output_canonical
    }

    /// The first non-Ok result, if any.
    pub fn failure(&self) -> Option<&ExecutionResult> {
        [&self.first, &self.second].into_iter().find(|r| !r.is_ok())
    }
}

pub fn determinism_check(
    executor: &dyn Executor,
    code: &str,
    entry: &str,
    args_literal: &str,
    limits: ExecLimits,
) -> DeterminismReport {
    let first_req = ExecRequest::call(code, entry, args_literal, limits);
    if let Err(why) = first_req.validate() {
        let r = rejected(&first_req, why);
        return DeterminismReport {
            first: r.clone(),
            second: r,
        };
    }
    let first = executor.execute_fresh(&first_req);
    let second_req = ExecRequest::call(code, entry, args_literal, limits);
    let second = executor.execute_fresh(&second_req);
    DeterminismReport { first, second }
}
