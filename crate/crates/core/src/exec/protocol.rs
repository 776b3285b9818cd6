//! Worker wire protocol: one JSON object per line on the worker's stdin
//! (requests) and stdout (responses).
//!
//! ```text
//! -> {"request_id":"1a-0","mode":"call","code":"def f(a, b): ...","entry":"f","args_literal":"2, 3",
//!     "limits":{"wall_ms":5000,"cpu_ms":4000,"memory_mb":512,"max_output_bytes":65536}}
//! <- {"request_id":"1a-0","status":"ok","output_canonical":"5","wall_ms":3}
//! ```
//!
//! `status` is one of `ok`, `exception`, `timeout`, `out_of_memory`,
//! `protocol_error`. `output_canonical` is present only with `ok`;
//! `error_text` carries the final traceback line otherwise.

use serde::{Deserialize, Serialize};

use super::{ExecLimits, ExecMode, ExecRequest};
use crate::model::{ExecStatus, ExecutionResult};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RequestFrame {
    pub request_id: String,
    pub mode: ExecMode,
    pub code: String,
    pub entry: String,
    pub args_literal: String,
    pub limits: ExecLimits,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResponseFrame {
    pub request_id: String,
    pub status: ExecStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_canonical: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error_text: Option<String>,
    pub wall_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum FrameError {
    #[error("malformed frame: {0}")]
    Malformed(String),
    #[error("response for {got:?} while waiting for {expected:?}")]
    WrongRequest { expected: String, got: String },
    #[error("output_canonical must be present exactly when status is ok")]
    Inconsistent,
}

impl From<&ExecRequest> for RequestFrame {
    fn from(r: &ExecRequest) -> Self {
        RequestFrame {
            request_id: r.request_id.clone(),
            mode: r.mode,
            code: r.code.clone(),
            entry: r.entry.clone(),
            args_literal: r.args_literal.clone(),
            limits: r.limits,
        }
    }
}

pub fn encode_request(request: &ExecRequest) -> String {
    serde_json::to_string(&RequestFrame::from(request)).expect("request frames always serialize")
}

pub fn encode_response(frame: &ResponseFrame) -> String {
    serde_json::to_string(frame).expect("response frames always serialize")
}

/// Parses one response line and checks it answers `expected_id`.
pub fn decode_response(line: &str, expected_id: &str) -> Result<ResponseFrame, FrameError> {
    let frame: ResponseFrame =
        serde_json::from_str(line.trim_end()).map_err(|e| FrameError::Malformed(e.to_string()))?;
    if frame.request_id != expected_id {
        return Err(FrameError::WrongRequest {
            expected: expected_id.to_string(),
            got: frame.request_id,
        });
    }
    if frame.output_canonical.is_some() != (frame.status == ExecStatus::Ok) {
        return Err(FrameError::Inconsistent);
    }
    Ok(frame)
}

impl From<ResponseFrame> for ExecutionResult {
    fn from(f: ResponseFrame) -> Self {
        ExecutionResult {
            status: f.status,
            output_canonical: f.output_canonical,
            error_text: f.error_text,
            wall_ms: f.wall_ms,
            request_id: f.request_id,
        }
    }
}
