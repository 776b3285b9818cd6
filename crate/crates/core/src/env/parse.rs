//! Fenced-block extraction from model completions.

use crate::model::EnvKind;

/// Failure text for a completion without a message block.
pub const NO_MESSAGE_TEXT: &str = "No message found! Make sure to correctly format the message.";

/// What the teacher emitted for one problem, before execution.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TeacherDraft {
    pub code: String,
    pub input_literals: Vec<String>,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ParseError {
    #[error("no ```{0}``` block found")]
    MissingCode(&'static str),
    #[error("no ```{0}``` block found")]
    MissingInputs(&'static str),
    #[error("{}", NO_MESSAGE_TEXT)]
    MissingMessage(&'static str),
}

/// One fenced block: the info-string tag and the body between the fences.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Fence<'a> {
    pub tag: &'a str,
    pub body: String,
}

/// Returns every closed fenced block in order. Unclosed trailing blocks are ignored.
pub fn fences(text: &str) -> Vec<Fence<'_>> {
    let mut out = Vec::new();
    let mut open: Option<(&str, Vec<&str>)> = None;
    for line in text.lines() {
        let trimmed = line.trim();
        match open.take() {
            None => {
                if let Some(rest) = trimmed.strip_prefix("```") {
                    let tag = rest.split_whitespace().next().unwrap_or("");
                    open = Some((tag, Vec::new()));
                }
            }
            Some((tag, mut body)) => {
                if trimmed == "```" {
                    out.push(Fence {
                        tag,
                        body: body.join("\n"),
                    });
                } else {
                    body.push(line);
                    open = Some((tag, body));
                }
            }
        }
    }
    out
}

/// Drops a leading reasoning section closed by `</think>`.
fn answer_part(text: &str) -> &str {
    match text.rfind("</think>") {
        Some(i) => &text[i + "</think>".len()..],
        None => text,
    }
}

fn is_code_tag(tag: &str) -> bool {
    matches!(tag.to_ascii_lowercase().as_str(), "python" | "py" | "python3")
}

pub fn parse_teacher_output(text: &str) -> Result<TeacherDraft, ParseError> {
    let blocks = fences(answer_part(text));
    let code = blocks
        .iter()
        .rev()
        .find(|f| is_code_tag(f.tag) && !f.body.trim().is_empty())
        .map(|f| f.body.trim_end().to_string())
        .ok_or(ParseError::MissingCode("python"))?;
    let inputs: Vec<String> = blocks
        .iter()
        .filter(|f| f.tag == "input" && !f.body.trim().is_empty())
        .map(|f| f.body.trim().to_string())
        .collect();
    if inputs.is_empty() {
        return Err(ParseError::MissingInputs("input"));
    }
    let message = blocks
        .iter()
        .rev()
        .find(|f| f.tag == "message" && !f.body.trim().is_empty())
        .map(|f| f.body.trim().to_string())
        .ok_or(ParseError::MissingMessage("message"))?;
    Ok(TeacherDraft {
        code,
        input_literals: inputs,
        message,
    })
}

/// Fence tag the student answers in, per environment.
pub fn submission_tag(env: EnvKind) -> &'static str {
    match env {
        EnvKind::Induction => "python",
        EnvKind::Abduction | EnvKind::Fuzzing => "input",
        EnvKind::Deduction => "output",
    }
}

/// Pulls the last answer block of the expected kind from a student completion.
pub fn extract_submission(env: EnvKind, completion: &str) -> Option<String> {
    let blocks = fences(answer_part(completion));
    blocks
        .iter()
        .rev()
        .find(|f| match env {
            EnvKind::Induction => is_code_tag(f.tag),
            _ => f.tag == submission_tag(env),
        })
        .map(|f| f.body.trim().to_string())
        .filter(|s| !s.is_empty())
}

/// True when `code` has a top-level or nested `def name(`.
pub fn defines_function(code: &str, name: &str) -> bool {
    code.lines().any(|line| {
        let Some(rest) = line.trim_start().strip_prefix("def ") else {
            return false;
        };
        let rest = rest.trim_start();
        rest.strip_prefix(name)
            .is_some_and(|tail| tail.trim_start().starts_with('('))
    })
}
