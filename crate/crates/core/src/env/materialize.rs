use crate::exec::{determinism_check, ExecLimits, Executor};
use crate::model::{canonical_digest, EnvKind, ExecutionResult, ProblemSpec};

use super::parse::{defines_function, TeacherDraft};

/// Shown-pair count for an Induction problem with `k` inputs.
pub fn visible_k_for(k: usize) -> usize {
    3.min(k.saturating_sub(1))
}

/// Where a materialized problem sits in its session.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Lineage {
    pub problem_id: String,
    pub seed_id: String,
    pub turn_index: u32,
    pub parent_id: Option<String>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MaterializeError {
    /// 1-based input index and the failing run.
    #[error("gold execution failed on input {0}: {status:?} {text}", status = .1.status, text = .1.error_text.as_deref().unwrap_or(""))]
    GoldExecutionFailed(usize, ExecutionResult),
    #[error("input {0} gives different outputs on two fresh runs")]
    NondeterministicProblem(usize),
    #[error("fuzzing code must define pre_test_f and test_f")]
    MissingTestFunctions,
    #[error("induction needs at least 2 inputs, got {0}")]
    TooFewInputs(usize),
}

/// Computes gold outputs by running the teacher's `f` on its own inputs.
///
/// Each input runs twice on fresh workers; the first run supplies the gold
/// output and the second must agree with it. Abduction, Deduction and
/// Fuzzing keep only the first teacher input.
pub fn materialize_problem(
    draft: &TeacherDraft,
    env: EnvKind,
    executor: &dyn Executor,
    lineage: Lineage,
    limits: ExecLimits,
) -> Result<ProblemSpec, MaterializeError> {
    let inputs: Vec<String> = match env {
        EnvKind::Induction => {
            if draft.input_literals.len() < 2 {
                return Err(MaterializeError::TooFewInputs(draft.input_literals.len()));
            }
            draft.input_literals.clone()
        }
        _ => draft.input_literals.iter().take(1).cloned().collect(),
    };
    if env == EnvKind::Fuzzing
        && !(defines_function(&draft.code, "pre_test_f") && defines_function(&draft.code, "test_f"))
    {
        return Err(MaterializeError::MissingTestFunctions);
    }
    let mut gold = Vec::with_capacity(inputs.len());
    for (i, input) in inputs.iter().enumerate() {
        let report = determinism_check(executor, &draft.code, "f", input, limits);
        if let Some(bad) = report.failure() {
            return Err(MaterializeError::GoldExecutionFailed(i + 1, bad.clone()));
        }
        if !report.is_deterministic() {
            return Err(MaterializeError::NondeterministicProblem(i + 1));
        }
        gold.push(report.first.output_canonical.unwrap_or_default());
    }
    let visible_k = (env == EnvKind::Induction).then(|| visible_k_for(inputs.len()));
    let mut problem = ProblemSpec {
        problem_id: lineage.problem_id,
        env,
        code: draft.code.clone(),
        message: draft.message.clone(),
        inputs,
        gold_outputs: gold,
        visible_k,
        seed_id: lineage.seed_id,
        turn_index: lineage.turn_index,
        parent_id: lineage.parent_id,
        pass_rate: None,
        bin_label: None,
        dedup_digest: String::new(),
    };
    problem.dedup_digest = canonical_digest(&problem);
    Ok(problem)
}
