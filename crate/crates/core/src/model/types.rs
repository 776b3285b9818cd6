use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::fraction::Fraction;

/// One of the four teacher–student environments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnvKind {
    Induction,
    Abduction,
    Deduction,
    Fuzzing,
}

impl EnvKind {
    pub const ALL: [EnvKind; 4] = [
        EnvKind::Induction,
        EnvKind::Abduction,
        EnvKind::Deduction,
        EnvKind::Fuzzing,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            EnvKind::Induction => "induction",
            EnvKind::Abduction => "abduction",
            EnvKind::Deduction => "deduction",
            EnvKind::Fuzzing => "fuzzing",
        }
    }
}

impl fmt::Display for EnvKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for EnvKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        EnvKind::ALL
            .into_iter()
            .find(|e| e.as_str() == s.to_ascii_lowercase())
            .ok_or_else(|| format!("unknown environment {s:?}"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeedSource {
    RealSolution,
    CorpusSnippet,
}

pub const SNIPPET_MIN_LINES: usize = 25;
pub const SNIPPET_MAX_LINES: usize = 50;

/// Inspiration text handed to the teacher on turn one.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeedSnippet {
    pub seed_id: String,
    pub source: SeedSource,
    pub text: String,
    pub line_count: usize,
}

impl SeedSnippet {
    pub fn validate(&self) -> Result<(), InvariantError> {
        let lines = count_lines(&self.text);
        if lines != self.line_count {
            return Err(InvariantError::new(format!(
                "seed {}: line_count {} but text has {lines} lines",
                self.seed_id, self.line_count
            )));
        }
        if self.source == SeedSource::CorpusSnippet
            && !(SNIPPET_MIN_LINES..=SNIPPET_MAX_LINES).contains(&lines)
        {
            return Err(InvariantError::new(format!(
                "corpus snippet {} has {lines} lines, expected {SNIPPET_MIN_LINES}..={SNIPPET_MAX_LINES}",
                self.seed_id
            )));
        }
        Ok(())
    }
}

/// Number of `\n`-delimited lines; the empty string has zero lines.
pub fn count_lines(text: &str) -> usize {
    if text.is_empty() {
        0
    } else {
        text.split('\n').count()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DifficultyLabel {
    Easy,
    EasyMedium,
    Medium,
    Hard,
    Unbinned,
}

impl DifficultyLabel {
    pub fn as_str(&self) -> &'static str {
        match self {
            DifficultyLabel::Easy => "easy",
            DifficultyLabel::EasyMedium => "easy-medium",
            DifficultyLabel::Medium => "medium",
            DifficultyLabel::Hard => "hard",
            DifficultyLabel::Unbinned => "unbinned",
        }
    }
}

impl fmt::Display for DifficultyLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A materialized problem.
///
/// `inputs` are argument literals in guest syntax (`"2, 3"`), and
/// `gold_outputs` are the canonical renderings obtained by running the
/// teacher's `f` on them. Only Induction has more than one input; its
/// first `visible_k` pairs are shown to the student and the rest are
/// private tests.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSpec {
    pub problem_id: String,
    pub env: EnvKind,
    pub code: String,
    pub message: String,
    pub inputs: Vec<String>,
    pub gold_outputs: Vec<String>,
    pub visible_k: Option<usize>,
    pub seed_id: String,
    pub turn_index: u32,
    pub parent_id: Option<String>,
    pub pass_rate: Option<Fraction>,
    pub bin_label: Option<DifficultyLabel>,
    pub dedup_digest: String,
}

impl ProblemSpec {
    pub fn validate(&self) -> Result<(), InvariantError> {
        let fail = |msg: String| Err(InvariantError::new(format!("problem {}: {msg}", self.problem_id)));
        if self.gold_outputs.len() != self.inputs.len() {
            return fail(format!(
                "{} inputs but {} gold outputs",
                self.inputs.len(),
                self.gold_outputs.len()
            ));
        }
        match self.env {
            EnvKind::Induction => match self.visible_k {
                Some(k) if k >= 1 && k < self.inputs.len() => {}
                other => {
                    return fail(format!(
                        "induction needs 1 <= visible_k < {}, got {other:?}",
                        self.inputs.len()
                    ))
                }
            },
            _ => {
                if self.inputs.len() != 1 {
                    return fail(format!("{} takes exactly one input, got {}", self.env, self.inputs.len()));
                }
                if self.visible_k.is_some() {
                    return fail(format!("visible_k is only meaningful for induction ({})", self.env));
                }
            }
        }
        if self.turn_index == 0 {
            return fail("turn_index starts at 1".into());
        }
        if self.turn_index >= 2 && self.parent_id.is_none() {
            return fail(format!("turn {} has no parent_id", self.turn_index));
        }
        if let Some(p) = self.pass_rate {
            if p > Fraction::ONE {
                return fail(format!("pass_rate {p} above one"));
            }
        }
        if self.dedup_digest.len() != 64 || !self.dedup_digest.bytes().all(|b| b.is_ascii_hexdigit()) {
            return fail("dedup_digest must be 64 hex characters".into());
        }
        Ok(())
    }
}

/// How a single student attempt ended, from the grader's point of view.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttemptStatus {
    Ok,
    Exception,
    Timeout,
    ParseError,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttemptRecord {
    pub problem_id: String,
    pub attempt_index: u32,
    pub submission: String,
    pub reward: u8,
    pub exec_status: AttemptStatus,
}

impl AttemptRecord {
    pub fn validate(&self) -> Result<(), InvariantError> {
        if self.reward > 1 {
            return Err(InvariantError::new(format!(
                "attempt {}#{}: reward {} not in {{0,1}}",
                self.problem_id, self.attempt_index, self.reward
            )));
        }
        if self.reward == 1 && self.exec_status != AttemptStatus::Ok {
            return Err(InvariantError::new(format!(
                "attempt {}#{}: reward 1 with status {:?}",
                self.problem_id, self.attempt_index, self.exec_status
            )));
        }
        Ok(())
    }
}

/// Aggregate of M attempts on one problem.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PassRateSummary {
    pub problem_id: String,
    pub attempts_m: u32,
    pub pass_rate: Fraction,
    pub solved_examples: Vec<String>,
    pub failed_examples: Vec<String>,
}

impl PassRateSummary {
    /// Number of attempts that earned reward 1.
    pub fn solved_count(&self) -> Option<u64> {
        self.pass_rate.times_integer(self.attempts_m as u64)
    }

    pub fn validate(&self) -> Result<(), InvariantError> {
        let fail = |msg: String| Err(InvariantError::new(format!("summary {}: {msg}", self.problem_id)));
        if self.attempts_m == 0 {
            return fail("attempts_m must be positive".into());
        }
        match self.solved_count() {
            Some(c) if c <= self.attempts_m as u64 => {}
            _ => return fail(format!("pass_rate {} is not k/{}", self.pass_rate, self.attempts_m)),
        }
        if self.solved_examples.len() > 2 || self.failed_examples.len() > 2 {
            return fail("at most two representatives per class".into());
        }
        if self.solved_examples.is_empty() == (self.pass_rate > Fraction::ZERO) {
            return fail("solved_examples must be nonempty exactly when pass_rate > 0".into());
        }
        if self.failed_examples.is_empty() == (self.pass_rate < Fraction::ONE) {
            return fail("failed_examples must be nonempty exactly when pass_rate < 1".into());
        }
        Ok(())
    }
}

/// Hard → medium → easy variants of one task, built in reverse from the hard one.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Chain {
    pub chain_id: String,
    pub hard: ProblemSpec,
    pub medium: ProblemSpec,
    pub easy: ProblemSpec,
}

impl Chain {
    /// Structural checks on stored fields. Bin membership against a bin
    /// scheme is checked by `curation::validate_chain`.
    pub fn validate(&self) -> Result<(), InvariantError> {
        let fail = |msg: String| Err(InvariantError::new(format!("chain {}: {msg}", self.chain_id)));
        for p in [&self.hard, &self.medium, &self.easy] {
            p.validate()?;
        }
        if self.medium.parent_id.as_deref() != Some(self.hard.problem_id.as_str())
            || self.easy.parent_id.as_deref() != Some(self.medium.problem_id.as_str())
        {
            return fail("easy -> medium -> hard parent links broken".into());
        }
        if self.medium.seed_id != self.hard.seed_id || self.easy.seed_id != self.hard.seed_id {
            return fail("members come from different seeds".into());
        }
        let expected = [
            (&self.hard, DifficultyLabel::Hard),
            (&self.medium, DifficultyLabel::Medium),
            (&self.easy, DifficultyLabel::Easy),
        ];
        for (p, label) in expected {
            if p.bin_label != Some(label) {
                return fail(format!("{} labeled {:?}, expected {label}", p.problem_id, p.bin_label));
            }
        }
        match (self.hard.pass_rate, self.medium.pass_rate, self.easy.pass_rate) {
            (Some(h), Some(m), Some(e)) if h < m && m < e => Ok(()),
            _ => fail("pass rates must be present and strictly increase hard < medium < easy".into()),
        }
    }
}

/// Sandbox-level outcome of one execution request.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExecStatus {
    Ok,
    Exception,
    Timeout,
    OutOfMemory,
    ProtocolError,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExecutionResult {
    pub status: ExecStatus,
    pub output_canonical: Option<String>,
    pub error_text: Option<String>,
    pub wall_ms: u64,
    pub request_id: String,
}

impl ExecutionResult {
    pub fn ok(request_id: impl Into<String>, output: impl Into<String>, wall_ms: u64) -> Self {
        ExecutionResult {
            status: ExecStatus::Ok,
            output_canonical: Some(output.into()),
            error_text: None,
            wall_ms,
            request_id: request_id.into(),
        }
    }

    pub fn failed(
        request_id: impl Into<String>,
        status: ExecStatus,
        error_text: impl Into<String>,
        wall_ms: u64,
    ) -> Self {
        debug_assert!(status != ExecStatus::Ok);
        ExecutionResult {
            status,
            output_canonical: None,
            error_text: Some(error_text.into()),
            wall_ms,
            request_id: request_id.into(),
        }
    }

    pub fn is_ok(&self) -> bool {
        self.status == ExecStatus::Ok
    }

    /// Canonical output when the run succeeded.
    pub fn output(&self) -> Option<&str> {
        if self.is_ok() {
            self.output_canonical.as_deref()
        } else {
            None
        }
    }

    /// `timeout_floor_ms` is the smallest limit that can produce a timeout
    /// (the cpu limit, which never exceeds the wall limit).
    pub fn validate(&self, timeout_floor_ms: u64) -> Result<(), InvariantError> {
        if self.output_canonical.is_some() != (self.status == ExecStatus::Ok) {
            return Err(InvariantError::new(format!(
                "request {}: output_canonical must be set iff status is ok",
                self.request_id
            )));
        }
        if self.status == ExecStatus::Timeout && self.wall_ms < timeout_floor_ms {
            return Err(InvariantError::new(format!(
                "request {}: timeout after only {} ms",
                self.request_id, self.wall_ms
            )));
        }
        Ok(())
    }
}

/// Sidecar summary written next to every dataset file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetManifest {
    pub path: String,
    pub record_count: usize,
    pub per_env: BTreeMap<EnvKind, usize>,
    pub per_bin: BTreeMap<DifficultyLabel, usize>,
    pub created_at: String,
    pub config_fingerprint: String,
}

impl DatasetManifest {
    pub fn for_problems(
        path: impl Into<String>,
        problems: &[ProblemSpec],
        created_at: impl Into<String>,
        config_fingerprint: impl Into<String>,
    ) -> Self {
        let mut per_env = BTreeMap::new();
        let mut per_bin = BTreeMap::new();
        for p in problems {
            *per_env.entry(p.env).or_insert(0) += 1;
            *per_bin
                .entry(p.bin_label.unwrap_or(DifficultyLabel::Unbinned))
                .or_insert(0) += 1;
        }
        DatasetManifest {
            path: path.into(),
            record_count: problems.len(),
            per_env,
            per_bin,
            created_at: created_at.into(),
            config_fingerprint: config_fingerprint.into(),
        }
    }

    /// True when the counts agree with `problems`.
    pub fn matches(&self, problems: &[ProblemSpec]) -> bool {
        let fresh = Self::for_problems(self.path.clone(), problems, "", "");
        fresh.record_count == self.record_count && fresh.per_env == self.per_env && fresh.per_bin == self.per_bin
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invariant violated: {0}")]
pub struct InvariantError(pub String);

impl InvariantError {
    pub fn new(msg: impl Into<String>) -> Self {
        InvariantError(msg.into())
    }
}
