//! The four environments: teacher parsing, problem materialization,
//! student views and rewards.

pub mod materialize;
pub mod parse;
pub mod prompts;
pub mod reward;
pub mod view;

pub use materialize::{materialize_problem, visible_k_for, Lineage, MaterializeError};
pub use parse::{extract_submission, parse_teacher_output, ParseError, TeacherDraft, NO_MESSAGE_TEXT};
pub use prompts::{Directive, PromptSet, TemplateError};
pub use reward::{
    grade_completion, reward, reward_abduction, reward_deduction, reward_fuzzing, reward_induction, Grade,
};
pub use view::{build_student_view, StudentView};
