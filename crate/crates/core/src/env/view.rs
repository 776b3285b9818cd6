use serde::Serialize;

use crate::model::{EnvKind, ProblemSpec};

/// What the student gets to see. Never carries a private gold output.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "env", rename_all = "snake_case")]
pub enum StudentView {
    Induction { message: String, pairs: Vec<(String, String)> },
    Abduction { code: String, output: String },
    Deduction { code: String, input: String },
    /// `code` holds `f`, `pre_test_f` and `test_f`.
    Fuzzing { code: String },
}

impl StudentView {
    pub fn env(&self) -> EnvKind {
        match self {
            StudentView::Induction { .. } => EnvKind::Induction,
            StudentView::Abduction { .. } => EnvKind::Abduction,
            StudentView::Deduction { .. } => EnvKind::Deduction,
            StudentView::Fuzzing { .. } => EnvKind::Fuzzing,
        }
    }
}

/// Induction shows the first `visible_k` pairs in teacher order.
pub fn build_student_view(problem: &ProblemSpec) -> StudentView {
    match problem.env {
        EnvKind::Induction => {
            let k = problem.visible_k.unwrap_or(0).min(problem.inputs.len());
            StudentView::Induction {
                message: problem.message.clone(),
                pairs: problem
                    .inputs
                    .iter()
                    .zip(&problem.gold_outputs)
                    .take(k)
                    .map(|(i, o)| (i.clone(), o.clone()))
                    .collect(),
            }
        }
        EnvKind::Abduction => StudentView::Abduction {
            code: problem.code.clone(),
            output: problem.gold_outputs.first().cloned().unwrap_or_default(),
        },
        EnvKind::Deduction => StudentView::Deduction {
            code: problem.code.clone(),
            input: problem.inputs.first().cloned().unwrap_or_default(),
        },
        EnvKind::Fuzzing => StudentView::Fuzzing {
            code: problem.code.clone(),
        },
    }
}
