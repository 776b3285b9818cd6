//! Binary rewards for the four environments.

use crate::exec::{eval_literal, run_function, ExecLimits, Executor};
use crate::literal;
use crate::model::{AttemptStatus, EnvKind, ExecStatus, ExecutionResult, ProblemSpec};

use super::parse::extract_submission;

/// Outcome of grading one submission.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Grade {
    pub reward: u8,
    pub status: AttemptStatus,
    pub detail: Option<String>,
}

impl Grade {
    pub fn pass() -> Self {
        Grade {
            reward: 1,
            status: AttemptStatus::Ok,
            detail: None,
        }
    }

    /// Ran cleanly but the answer is wrong.
    pub fn wrong(detail: impl Into<String>) -> Self {
        Grade {
            reward: 0,
            status: AttemptStatus::Ok,
            detail: Some(detail.into()),
        }
    }

    pub fn parse_error(detail: impl Into<String>) -> Self {
        Grade {
            reward: 0,
            status: AttemptStatus::ParseError,
            detail: Some(detail.into()),
        }
    }

    fn from_failure(r: &ExecutionResult) -> Self {
        let status = match r.status {
            ExecStatus::Timeout => AttemptStatus::Timeout,
            _ => AttemptStatus::Exception,
        };
        Grade {
            reward: 0,
            status,
            detail: r.error_text.clone(),
        }
    }
}

/// 1 iff the candidate's `f` reproduces every gold output, private ones included.
pub fn reward_induction(candidate_code: &str, problem: &ProblemSpec, executor: &dyn Executor, limits: ExecLimits) -> Grade {
    for (i, (input, gold)) in problem.inputs.iter().zip(&problem.gold_outputs).enumerate() {
        let r = run_function(executor, candidate_code, "f", input, limits);
        if !r.is_ok() {
            return Grade::from_failure(&r);
        }
        if r.output() != Some(gold.as_str()) {
            return Grade::wrong(format!("input {} mismatch", i + 1));
        }
    }
    Grade::pass()
}

/// Rejects non-literal or malformed answers before they reach guest code.
fn check_literal(candidate: &str, executor: &dyn Executor, limits: ExecLimits) -> Result<String, Grade> {
    let r = eval_literal(executor, candidate, limits);
    match r.status {
        ExecStatus::Ok => Ok(r.output_canonical.unwrap_or_default()),
        ExecStatus::Exception => Err(Grade::parse_error(r.error_text.unwrap_or_default())),
        _ => Err(Grade::from_failure(&r)),
    }
}

/// 1 iff `f(candidate)` equals the gold output; any preimage counts.
pub fn reward_abduction(candidate_input: &str, problem: &ProblemSpec, executor: &dyn Executor, limits: ExecLimits) -> Grade {
    if let Err(g) = check_literal(candidate_input, executor, limits) {
        return g;
    }
    let r = run_function(executor, &problem.code, "f", candidate_input, limits);
    if !r.is_ok() {
        return Grade::from_failure(&r);
    }
    if r.output() == problem.gold_outputs.first().map(String::as_str) {
        Grade::pass()
    } else {
        Grade::wrong("output differs")
    }
}

/// 1 iff the candidate's canonical form equals the gold canonical form.
pub fn reward_deduction(candidate_output: &str, problem: &ProblemSpec, executor: &dyn Executor, limits: ExecLimits) -> Grade {
    match check_literal(candidate_output, executor, limits) {
        Err(g) => g,
        Ok(canon) if Some(canon.as_str()) == problem.gold_outputs.first().map(String::as_str) => Grade::pass(),
        Ok(canon) => Grade::wrong(format!("predicted {canon}")),
    }
}

/// Python truthiness of a canonical return value. `None` means the check
/// ran to completion without returning a verdict, which counts as passing.
fn verdict(output: &str) -> bool {
    match literal::parse_literal(output) {
        Ok(literal::Value::None) => true,
        Ok(v) => v.is_truthy(),
        // not literal syntax: some object, truthy by default
        Err(_) => true,
    }
}

/// 1 iff `pre_test_f` accepts the candidate and `test_f` rejects it.
///
/// `test_f` rejects by returning a falsy value other than `None` or by
/// raising anything. A timeout in either check scores 0.
pub fn reward_fuzzing(candidate_input: &str, problem: &ProblemSpec, executor: &dyn Executor, limits: ExecLimits) -> Grade {
    if let Err(g) = check_literal(candidate_input, executor, limits) {
        return g;
    }
    let pre = run_function(executor, &problem.code, "pre_test_f", candidate_input, limits);
    if !pre.is_ok() {
        return Grade::from_failure(&pre);
    }
    if !verdict(pre.output().unwrap_or("None")) {
        return Grade::wrong("pre_test_f rejected the input");
    }
    let test = run_function(executor, &problem.code, "test_f", candidate_input, limits);
    match test.status {
        ExecStatus::Ok if verdict(test.output().unwrap_or("None")) => Grade::wrong("test_f passed"),
        ExecStatus::Ok | ExecStatus::Exception => Grade::pass(),
        _ => Grade::from_failure(&test),
    }
}

pub fn reward(env: EnvKind, submission: &str, problem: &ProblemSpec, executor: &dyn Executor, limits: ExecLimits) -> Grade {
    match env {
        EnvKind::Induction => reward_induction(submission, problem, executor, limits),
        EnvKind::Abduction => reward_abduction(submission, problem, executor, limits),
        EnvKind::Deduction => reward_deduction(submission, problem, executor, limits),
        EnvKind::Fuzzing => reward_fuzzing(submission, problem, executor, limits),
    }
}

/// Extracts the answer block from a raw student completion and grades it.
/// Returns the stored submission text alongside the grade.
pub fn grade_completion(
    problem: &ProblemSpec,
    completion: &str,
    executor: &dyn Executor,
    limits: ExecLimits,
) -> (String, Grade) {
    match extract_submission(problem.env, completion) {
        Some(sub) => {
            let g = reward(problem.env, &sub, problem, executor, limits);
            (sub, g)
        }
        None => (
            completion.trim().to_string(),
            Grade::parse_error(format!("no ```{}``` block", super::parse::submission_tag(problem.env))),
        ),
    }
}
