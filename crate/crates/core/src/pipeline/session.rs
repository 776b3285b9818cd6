//! Teacher turns, student grading and per-seed sessions.

use std::collections::HashSet;
use std::sync::Mutex;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use tracing::{debug, info};

use crate::client::{ClientError, CompletionParams, LogEvent, ModelClient, SessionLog};
use crate::env::{
    build_student_view, grade_completion, materialize_problem, parse_teacher_output, Directive, Lineage,
    MaterializeError, PromptSet,
};
use crate::exec::{ExecLimits, Executor};
use crate::model::{
    new_id, AttemptRecord, EnvKind, Fraction, PassRateSummary, ProblemSpec, SeedSnippet,
};

use super::{PipelineConfig, PipelineError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DropReason {
    ParseFail,
    ExecFail,
    Nondeterministic,
    TooEasy,
    TooHard,
    Duplicate,
}

impl DropReason {
    pub fn as_str(&self) -> &'static str {
        match self {
            DropReason::ParseFail => "parse_fail",
            DropReason::ExecFail => "exec_fail",
            DropReason::Nondeterministic => "nondeterministic",
            DropReason::TooEasy => "too_easy",
            DropReason::TooHard => "too_hard",
            DropReason::Duplicate => "duplicate",
        }
    }
}

/// Result of one teacher turn. `problem` is absent when the teacher output
/// never became a problem (parse or execution failure).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TurnOutcome {
    pub turn_index: u32,
    pub problem: Option<ProblemSpec>,
    pub summary: Option<PassRateSummary>,
    pub attempts: Vec<AttemptRecord>,
    pub kept: bool,
    pub drop_reason: Option<DropReason>,
    pub detail: Option<String>,
}

impl TurnOutcome {
    /// Materialized and graded, whether kept or not.
    pub fn graded(&self) -> Option<(&ProblemSpec, &PassRateSummary)> {
        self.problem.as_ref().zip(self.summary.as_ref())
    }
}

/// Difficulty adjustment for the next turn given the last pass rate.
/// 0.65 itself stays in the medium band.
pub fn progression_directive(p: Fraction) -> Directive {
    if p.is_zero() {
        Directive::MakeEasier
    } else if p > Fraction::new(13, 20).unwrap() {
        Directive::MakeHarder
    } else {
        Directive::TargetMedium
    }
}

/// Exact pass rate plus up to two of the shortest submissions per class.
///
/// Panics when `attempts.len() != m` or `m == 0`.
pub fn summarize_attempts(attempts: &[AttemptRecord], m: u32) -> PassRateSummary {
    assert!(m > 0 && attempts.len() == m as usize, "expected {m} attempts, got {}", attempts.len());
    let pick = |reward: u8| {
        let mut class: Vec<&AttemptRecord> = attempts.iter().filter(|a| a.reward == reward).collect();
        class.sort_by_key(|a| (a.submission.len(), a.attempt_index));
        class.iter().take(2).map(|a| a.submission.clone()).collect::<Vec<_>>()
    };
    let solved = attempts.iter().filter(|a| a.reward == 1).count() as u64;
    PassRateSummary {
        problem_id: attempts[0].problem_id.clone(),
        attempts_m: m,
        pass_rate: Fraction::new(solved, m as u64).expect("m > 0"),
        solved_examples: pick(1),
        failed_examples: pick(0),
    }
}

/// Digests registered so far; check-and-insert is atomic.
#[derive(Debug, Default)]
pub struct DedupIndex {
    seen: Mutex<HashSet<String>>,
}

impl DedupIndex {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_digests<I: IntoIterator<Item = String>>(digests: I) -> Self {
        DedupIndex {
            seen: Mutex::new(digests.into_iter().collect()),
        }
    }

    /// Registers `digest`; false when it was already present.
    pub fn insert(&self, digest: &str) -> bool {
        self.seen
            .lock()
            .unwrap_or_else(|p| p.into_inner())
            .insert(digest.to_string())
    }

    pub fn contains(&self, digest: &str) -> bool {
        self.seen.lock().unwrap_or_else(|p| p.into_inner()).contains(digest)
    }

    pub fn len(&self) -> usize {
        self.seen.lock().unwrap_or_else(|p| p.into_inner()).len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Band check, then dedup. Only kept problems register their digest.
pub fn filter_candidate(
    problem: &ProblemSpec,
    summary: &PassRateSummary,
    dedup: &DedupIndex,
    cfg: &PipelineConfig,
) -> Result<(), DropReason> {
    let [low, high] = cfg.filter_band;
    let p = summary.pass_rate;
    if p < low {
        return Err(DropReason::TooHard);
    }
    if p > high {
        return Err(DropReason::TooEasy);
    }
    if !dedup.insert(&problem.dedup_digest) {
        return Err(DropReason::Duplicate);
    }
    Ok(())
}

/// Collects and grades M student attempts for a problem.
pub struct Grader<'a> {
    pub student: &'a dyn ModelClient,
    pub executor: &'a dyn Executor,
    pub prompts: &'a PromptSet,
    pub params: &'a CompletionParams,
    pub limits: ExecLimits,
    pub attempts_m: u32,
}

impl Grader<'_> {
    /// Attempts come back in `attempt_index` order regardless of grading order.
    pub fn grade(&self, problem: &ProblemSpec) -> Result<(Vec<AttemptRecord>, PassRateSummary), PipelineError> {
        let prompt = self.prompts.student(&build_student_view(problem))?;
        let completions = self.student.complete_n(&prompt, self.params, self.attempts_m as usize)?;
        if completions.len() != self.attempts_m as usize {
            return Err(PipelineError::Backend(ClientError::Malformed(format!(
                "asked for {} completions, got {}",
                self.attempts_m,
                completions.len()
            ))));
        }
        let grades: Vec<_> = completions
            .par_iter()
            .map(|c| grade_completion(problem, c, self.executor, self.limits))
            .collect();
        let attempts: Vec<AttemptRecord> = grades
            .into_iter()
            .enumerate()
            .map(|(i, (submission, g))| AttemptRecord {
                problem_id: problem.problem_id.clone(),
                attempt_index: i as u32,
                submission,
                reward: g.reward,
                exec_status: g.status,
            })
            .collect();
        let summary = summarize_attempts(&attempts, self.attempts_m);
        Ok((attempts, summary))
    }
}

/// Parses and materializes one teacher completion.
pub fn materialize_candidate(
    completion: &str,
    env: EnvKind,
    executor: &dyn Executor,
    lineage: Lineage,
    limits: ExecLimits,
) -> Result<ProblemSpec, (DropReason, String)> {
    let draft = parse_teacher_output(completion).map_err(|e| (DropReason::ParseFail, e.to_string()))?;
    materialize_problem(&draft, env, executor, lineage, limits).map_err(|e| {
        let reason = match e {
            MaterializeError::GoldExecutionFailed(..) => DropReason::ExecFail,
            MaterializeError::NondeterministicProblem(_) => DropReason::Nondeterministic,
            MaterializeError::MissingTestFunctions | MaterializeError::TooFewInputs(_) => DropReason::ParseFail,
        };
        (reason, e.to_string())
    })
}

/// Everything a session needs besides its seed and rng.
#[derive(Clone, Copy)]
pub struct GenContext<'a> {
    pub teacher: &'a dyn ModelClient,
    pub student: &'a dyn ModelClient,
    pub executor: &'a dyn Executor,
    pub cfg: &'a PipelineConfig,
    pub prompts: &'a PromptSet,
    pub dedup: &'a DedupIndex,
    pub log: &'a SessionLog,
}

impl<'a> GenContext<'a> {
    pub fn grader(&self) -> Grader<'a> {
        Grader {
            student: self.student,
            executor: self.executor,
            prompts: self.prompts,
            params: &self.cfg.student,
            limits: self.cfg.limits,
            attempts_m: self.cfg.attempts_m,
        }
    }
}

/// Input to one turn: turn 1 carries only the seed.
#[derive(Debug, Clone, Copy)]
pub struct TurnState<'s> {
    pub seed: &'s SeedSnippet,
    pub turn_index: u32,
    pub previous: Option<(&'s ProblemSpec, &'s PassRateSummary)>,
}

fn teacher_prompt(ctx: &GenContext<'_>, state: &TurnState<'_>, trim_examples: bool) -> Result<String, PipelineError> {
    let n = ctx.cfg.input_count();
    Ok(match state.previous {
        None => ctx.prompts.teacher_turn1(ctx.cfg.env, &state.seed.text, n)?,
        Some((p, s)) => {
            let trimmed;
            let s = if trim_examples {
                trimmed = PassRateSummary {
                    solved_examples: vec![],
                    failed_examples: vec![],
                    ..s.clone()
                };
                &trimmed
            } else {
                s
            };
            ctx.prompts.teacher_turn_n(p, s, progression_directive(s.pass_rate), n)?
        }
    })
}

fn log_outcome(ctx: &GenContext<'_>, seed_id: &str, o: &TurnOutcome) {
    ctx.log.record(&LogEvent::Decision {
        seed_id: seed_id.to_string(),
        turn_index: o.turn_index,
        problem_id: o.problem.as_ref().map(|p| p.problem_id.clone()),
        kept: o.kept,
        drop_reason: o.drop_reason.map(|r| r.as_str().to_string()),
        pass_rate: o.summary.as_ref().map(|s| s.pass_rate.to_string()),
        detail: o.detail.clone(),
    });
}

pub fn run_turn<R: Rng + ?Sized>(
    state: TurnState<'_>,
    ctx: &GenContext<'_>,
    rng: &mut R,
) -> Result<TurnOutcome, PipelineError> {
    let prompt = teacher_prompt(ctx, &state, false)?;
    let completion = match ctx.teacher.complete(&prompt, &ctx.cfg.teacher) {
        Err(ClientError::ContextTooLong(_)) if state.previous.is_some() => {
            debug!("context too long; retrying without example submissions");
            ctx.teacher.complete(&teacher_prompt(ctx, &state, true)?, &ctx.cfg.teacher)?
        }
        r => r?,
    };
    let lineage = Lineage {
        problem_id: new_id(rng),
        seed_id: state.seed.seed_id.clone(),
        turn_index: state.turn_index,
        parent_id: state.previous.map(|(p, _)| p.problem_id.clone()),
    };
    let outcome = match materialize_candidate(&completion, ctx.cfg.env, ctx.executor, lineage, ctx.cfg.limits) {
        Err((reason, detail)) => TurnOutcome {
            turn_index: state.turn_index,
            problem: None,
            summary: None,
            attempts: vec![],
            kept: false,
            drop_reason: Some(reason),
            detail: Some(detail),
        },
        Ok(mut problem) => {
            let (attempts, summary) = ctx.grader().grade(&problem)?;
            problem.pass_rate = Some(summary.pass_rate);
            let verdict = filter_candidate(&problem, &summary, ctx.dedup, ctx.cfg);
            TurnOutcome {
                turn_index: state.turn_index,
                problem: Some(problem),
                summary: Some(summary),
                attempts,
                kept: verdict.is_ok(),
                drop_reason: verdict.err(),
                detail: None,
            }
        }
    };
    log_outcome(ctx, &state.seed.seed_id, &outcome);
    Ok(outcome)
}

/// Runs `turns_per_seed` turns. A turn that yields no graded problem keeps
/// the previous graded problem as context. Turn 1 is retried up to
/// `turn1_retries` times; its failed tries are logged but not returned.
pub fn run_seed_session<R: Rng + ?Sized>(
    seed: &SeedSnippet,
    ctx: &GenContext<'_>,
    rng: &mut R,
) -> Result<Vec<TurnOutcome>, PipelineError> {
    let mut outcomes = Vec::with_capacity(ctx.cfg.turns_per_seed as usize);
    let mut tries = 0;
    let first = loop {
        let o = run_turn(
            TurnState {
                seed,
                turn_index: 1,
                previous: None,
            },
            ctx,
            rng,
        )?;
        if o.graded().is_some() {
            break o;
        }
        tries += 1;
        if tries > ctx.cfg.turn1_retries {
            return Err(PipelineError::SeedAborted {
                seed_id: seed.seed_id.clone(),
                reason: o.detail.unwrap_or_default(),
            });
        }
    };
    let mut context = first.graded().map(|(p, s)| (p.clone(), s.clone())).expect("graded");
    outcomes.push(first);
    for t in 2..=ctx.cfg.turns_per_seed {
        let o = run_turn(
            TurnState {
                seed,
                turn_index: t,
                previous: Some((&context.0, &context.1)),
            },
            ctx,
            rng,
        )?;
        if let Some((p, s)) = o.graded() {
            context = (p.clone(), s.clone());
        }
        outcomes.push(o);
    }
    info!(
        seed = %seed.seed_id,
        kept = outcomes.iter().filter(|o| o.kept).count(),
        "session finished"
    );
    Ok(outcomes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::AttemptStatus;

    fn attempts(rewards: &[u8]) -> Vec<AttemptRecord> {
        rewards
            .iter()
            .enumerate()
            .map(|(i, &r)| AttemptRecord {
                problem_id: "p".into(),
                attempt_index: i as u32,
                submission: "x".repeat(10 - i % 10),
                reward: r,
                exec_status: AttemptStatus::Ok,
            })
            .collect()
    }

    #[test]
    fn summary_examples() {
        let s = summarize_attempts(&attempts(&[1, 1, 1, 1, 1, 1, 1, 0]), 8);
        assert_eq!(s.pass_rate, Fraction::new(7, 8).unwrap());
        assert_eq!(s.solved_examples, vec!["x".repeat(4), "x".repeat(5)]);
        s.validate().unwrap();
        let s = summarize_attempts(&attempts(&[0; 8]), 8);
        assert!(s.pass_rate.is_zero() && s.solved_examples.is_empty());
        let mut r = [0u8; 32];
        r[..8].fill(1);
        let s = summarize_attempts(&attempts(&r), 32);
        assert_eq!(s.pass_rate.to_string(), "0.250000");
        assert_eq!((s.solved_examples.len(), s.failed_examples.len()), (2, 2));
    }

    #[test]
    fn directive_thresholds() {
        let f = |n, d| progression_directive(Fraction::new(n, d).unwrap());
        assert_eq!(f(7, 8), Directive::MakeHarder);
        assert_eq!(f(0, 1), Directive::MakeEasier);
        assert_eq!(f(1, 2), Directive::TargetMedium);
        assert_eq!(f(65, 100), Directive::TargetMedium);
        assert_eq!(f(651, 1000), Directive::MakeHarder);
    }
}
