use std::path::Path;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::{text_digest, ClientError, CompletionParams, ModelClient};

/// Which calls an entry may answer.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Match {
    Any,
    /// 0-based position in the call sequence.
    Index(usize),
    /// SHA-256 hex of the prompt.
    Digest(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FixtureEntry {
    #[serde(rename = "match")]
    pub matcher: Match,
    pub response: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ScriptedFixture {
    pub entries: Vec<FixtureEntry>,
}

impl ScriptedFixture {
    pub fn any<I, S>(responses: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        ScriptedFixture {
            entries: responses
                .into_iter()
                .map(|r| FixtureEntry {
                    matcher: Match::Any,
                    response: r.into(),
                })
                .collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn push(&mut self, matcher: Match, response: impl Into<String>) {
        self.entries.push(FixtureEntry {
            matcher,
            response: response.into(),
        });
    }
}

/// Teacher and student scripts; the on-disk fixture file format.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FixtureSet {
    #[serde(default)]
    pub teacher: ScriptedFixture,
    #[serde(default)]
    pub student: ScriptedFixture,
}

impl FixtureSet {
    pub fn load(path: &Path) -> Result<Self, ClientError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ClientError::BackendUnavailable(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| ClientError::LogCorrupt {
            line: e.line(),
            msg: e.to_string(),
        })
    }

    pub fn len(&self) -> usize {
        self.teacher.len() + self.student.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

struct State {
    used: Vec<bool>,
    calls: usize,
}

/// Plays back a fixture. Each call consumes the first unused entry whose
/// matcher accepts it; running out is `BackendUnavailable`.
pub struct ScriptedClient {
    fixture: ScriptedFixture,
    state: Mutex<State>,
}

impl ScriptedClient {
    pub fn new(fixture: ScriptedFixture) -> Self {
        let used = vec![false; fixture.entries.len()];
        ScriptedClient {
            fixture,
            state: Mutex::new(State { used, calls: 0 }),
        }
    }

    pub fn calls(&self) -> usize {
        self.state.lock().unwrap_or_else(|p| p.into_inner()).calls
    }

    pub fn remaining(&self) -> usize {
        let st = self.state.lock().unwrap_or_else(|p| p.into_inner());
        st.used.iter().filter(|u| !**u).count()
    }
}

impl ModelClient for ScriptedClient {
    fn complete(&self, prompt: &str, params: &CompletionParams) -> Result<String, ClientError> {
        params.validate()?;
        let digest = text_digest(prompt);
        let mut st = self.state.lock().unwrap_or_else(|p| p.into_inner());
        let call = st.calls;
        st.calls += 1;
        let hit = self.fixture.entries.iter().enumerate().find(|(i, e)| {
            !st.used[*i]
                && match &e.matcher {
                    Match::Any => true,
                    Match::Index(n) => *n == call,
                    Match::Digest(d) => d.eq_ignore_ascii_case(&digest),
                }
        });
        match hit {
            Some((i, e)) => {
                st.used[i] = true;
                Ok(e.response.clone())
            }
            None => Err(ClientError::BackendUnavailable(format!(
                "script exhausted at call {call} (prompt {})",
                &digest[..12]
            ))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plays_back_and_exhausts() {
        let c = ScriptedClient::new(ScriptedFixture::any(["hello"]));
        let p = CompletionParams::student();
        assert_eq!(c.complete("hi", &p).unwrap(), "hello");
        assert!(matches!(c.complete("hi", &p), Err(ClientError::BackendUnavailable(_))));
    }

    #[test]
    fn empty_fixture_errors_immediately() {
        let c = ScriptedClient::new(ScriptedFixture::default());
        assert!(c.complete("x", &CompletionParams::teacher()).is_err());
    }

    #[test]
    fn digest_and_index_matchers() {
        let mut f = ScriptedFixture::default();
        f.push(Match::Digest(text_digest("b")), "for b");
        f.push(Match::Index(1), "second call");
        f.push(Match::Any, "fallback");
        let c = ScriptedClient::new(f);
        let p = CompletionParams::teacher();
        assert_eq!(c.complete("a", &p).unwrap(), "fallback");
        assert_eq!(c.complete("a", &p).unwrap(), "second call");
        assert_eq!(c.complete("b", &p).unwrap(), "for b");
    }

    #[test]
    fn fixture_json_shape() {
        let json = r#"{"teacher":[{"match":"any","response":"t"}],"student":[{"match":{"index":0},"response":"s"}]}"#;
        let set: FixtureSet = serde_json::from_str(json).unwrap();
        assert_eq!(set.len(), 2);
        assert_eq!(serde_json::to_string(&set).unwrap(), json);
    }
}
