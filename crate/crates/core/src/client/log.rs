//! Structured per-run session log (JSON lines) and fixture reconstruction.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};
use tracing::{debug, warn};

use super::scripted::{FixtureSet, Match};
use super::{text_digest, ClientError, CompletionParams, ModelClient};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case", deny_unknown_fields)]
pub enum LogEvent {
    Completion {
        role: String,
        prompt_digest: String,
        response_digest: String,
        response: String,
    },
    Decision {
        seed_id: String,
        turn_index: u32,
        problem_id: Option<String>,
        kept: bool,
        drop_reason: Option<String>,
        pass_rate: Option<String>,
        detail: Option<String>,
    },
    Note {
        message: String,
    },
}

type Sink = Box<dyn Write + Send>;

pub struct SessionLog {
    sink: Mutex<Option<Sink>>,
}

impl std::fmt::Debug for SessionLog {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("SessionLog")
    }
}

impl SessionLog {
    pub fn create(path: &Path) -> io::Result<Self> {
        Ok(Self::to_writer(BufWriter::new(File::create(path)?)))
    }

    pub fn to_writer(w: impl Write + Send + 'static) -> Self {
        SessionLog {
            sink: Mutex::new(Some(Box::new(w))),
        }
    }

    pub fn stderr() -> Self {
        Self::to_writer(io::stderr())
    }

    pub fn disabled() -> Self {
        SessionLog { sink: Mutex::new(None) }
    }

    pub fn record(&self, event: &LogEvent) {
        let mut guard = self.sink.lock().unwrap_or_else(|p| p.into_inner());
        let Some(sink) = guard.as_mut() else { return };
        let line = serde_json::to_string(event).expect("log events serialize");
        if let Err(e) = writeln!(sink, "{line}").and_then(|_| sink.flush()) {
            warn!(error = %e, "session log write failed");
        }
    }

    pub fn note(&self, message: impl Into<String>) {
        self.record(&LogEvent::Note { message: message.into() });
    }
}

/// Wraps a client and logs every completion under `role`.
pub struct Logged<C> {
    inner: C,
    role: String,
    log: Arc<SessionLog>,
}

impl<C: ModelClient> Logged<C> {
    pub fn new(inner: C, role: impl Into<String>, log: Arc<SessionLog>) -> Self {
        Logged {
            inner,
            role: role.into(),
            log,
        }
    }

    fn record(&self, prompt_digest: &str, response: &str) {
        let response_digest = text_digest(response);
        debug!(role = %self.role, prompt = %&prompt_digest[..12], response = %&response_digest[..12], "completion");
        self.log.record(&LogEvent::Completion {
            role: self.role.clone(),
            prompt_digest: prompt_digest.to_string(),
            response_digest,
            response: response.to_string(),
        });
    }
}

impl<C: ModelClient> ModelClient for Logged<C> {
    fn complete(&self, prompt: &str, params: &CompletionParams) -> Result<String, ClientError> {
        let out = self.inner.complete(prompt, params)?;
        self.record(&text_digest(prompt), &out);
        Ok(out)
    }

    fn complete_n(&self, prompt: &str, params: &CompletionParams, n: usize) -> Result<Vec<String>, ClientError> {
        let out = self.inner.complete_n(prompt, params, n)?;
        let digest = text_digest(prompt);
        for r in &out {
            self.record(&digest, r);
        }
        Ok(out)
    }
}

/// Builds prompt-digest fixtures that replay a logged run.
pub fn record_replay(log_text: &str) -> Result<FixtureSet, ClientError> {
    let mut set = FixtureSet::default();
    for (i, line) in log_text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let event: LogEvent = serde_json::from_str(line).map_err(|e| ClientError::LogCorrupt {
            line: i + 1,
            msg: e.to_string(),
        })?;
        if let LogEvent::Completion {
            role,
            prompt_digest,
            response_digest,
            response,
        } = event
        {
            if text_digest(&response) != response_digest {
                return Err(ClientError::LogCorrupt {
                    line: i + 1,
                    msg: "response does not match its digest".into(),
                });
            }
            let target = match role.as_str() {
                "teacher" => &mut set.teacher,
                "student" => &mut set.student,
                other => {
                    return Err(ClientError::LogCorrupt {
                        line: i + 1,
                        msg: format!("unknown role {other:?}"),
                    })
                }
            };
            target.push(Match::Digest(prompt_digest), response);
        }
    }
    Ok(set)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::client::{ScriptedClient, ScriptedFixture};

    #[derive(Clone, Default)]
    struct Buf(Arc<Mutex<Vec<u8>>>);

    impl Write for Buf {
        fn write(&mut self, b: &[u8]) -> io::Result<usize> {
            self.0.lock().unwrap().extend_from_slice(b);
            Ok(b.len())
        }
        fn flush(&mut self) -> io::Result<()> {
            Ok(())
        }
    }

    #[test]
    fn one_turn_log_gives_one_entry() {
        let buf = Buf::default();
        let log = Arc::new(SessionLog::to_writer(buf.clone()));
        let teacher = Logged::new(ScriptedClient::new(ScriptedFixture::any(["answer"])), "teacher", log.clone());
        teacher.complete("prompt", &CompletionParams::teacher()).unwrap();
        log.note("done");
        let text = String::from_utf8(buf.0.lock().unwrap().clone()).unwrap();
        let set = record_replay(&text).unwrap();
        assert_eq!(set.len(), 1);
        let replay = ScriptedClient::new(set.teacher);
        assert_eq!(replay.complete("prompt", &CompletionParams::teacher()).unwrap(), "answer");
        assert!(replay.complete("other", &CompletionParams::teacher()).is_err());
    }

    #[test]
    fn empty_log_and_corrupt_log() {
        assert!(record_replay("").unwrap().is_empty());
        assert!(matches!(
            record_replay("{\"event\":\"completion\"}\n"),
            Err(ClientError::LogCorrupt { line: 1, .. })
        ));
    }
}
