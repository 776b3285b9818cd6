//! Prompt templates and their rendering.
//!
//! Templates are plain text with `{name}` placeholders (lowercase letters
//! and underscores). Rendering is a single pass, so substituted text is
//! never re-scanned. Unknown placeholders are an error.

use std::collections::HashMap;
use std::path::Path;

use crate::model::{EnvKind, Fraction, PassRateSummary, ProblemSpec};

use super::view::StudentView;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TemplateError {
    #[error("template {template}: no value for {{{name}}}")]
    Unbound { template: String, name: String },
    #[error("reading {path}: {msg}")]
    Io { path: String, msg: String },
}

const BUILTIN: &[(&str, &str)] = &[
    ("teacher_turn1", include_str!("../../assets/prompts/teacher_turn1.txt")),
    ("teacher_turn_n", include_str!("../../assets/prompts/teacher_turn_n.txt")),
    ("chain_step", include_str!("../../assets/prompts/chain_step.txt")),
    ("progression_harder", include_str!("../../assets/prompts/progression_harder.txt")),
    ("progression_easier", include_str!("../../assets/prompts/progression_easier.txt")),
    ("progression_medium", include_str!("../../assets/prompts/progression_medium.txt")),
    ("format_induction", include_str!("../../assets/prompts/format_induction.txt")),
    ("format_abduction", include_str!("../../assets/prompts/format_abduction.txt")),
    ("format_deduction", include_str!("../../assets/prompts/format_deduction.txt")),
    ("format_fuzzing", include_str!("../../assets/prompts/format_fuzzing.txt")),
    ("student_induction", include_str!("../../assets/prompts/student_induction.txt")),
    ("student_abduction", include_str!("../../assets/prompts/student_abduction.txt")),
    ("student_deduction", include_str!("../../assets/prompts/student_deduction.txt")),
    ("student_fuzzing", include_str!("../../assets/prompts/student_fuzzing.txt")),
];

/// Substitutes `{name}` placeholders in one pass.
pub fn render(name: &str, template: &str, vars: &[(&str, &str)]) -> Result<String, TemplateError> {
    let mut out = String::with_capacity(template.len());
    let mut rest = template;
    while let Some(open) = rest.find('{') {
        out.push_str(&rest[..open]);
        let after = &rest[open + 1..];
        let len = after
            .bytes()
            .take_while(|b| b.is_ascii_lowercase() || *b == b'_')
            .count();
        if len > 0 && after.as_bytes().get(len) == Some(&b'}') {
            let key = &after[..len];
            let value = vars
                .iter()
                .find(|(k, _)| *k == key)
                .ok_or_else(|| TemplateError::Unbound {
                    template: name.to_string(),
                    name: key.to_string(),
                })?;
            out.push_str(value.1);
            rest = &after[len + 1..];
        } else {
            out.push('{');
            rest = after;
        }
    }
    out.push_str(rest);
    Ok(out)
}

/// Difficulty adjustment requested from the teacher for the next turn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Directive {
    MakeHarder,
    MakeEasier,
    TargetMedium,
}

/// The full template set; loads from a directory with built-in fallbacks.
#[derive(Debug, Clone)]
pub struct PromptSet {
    templates: HashMap<String, String>,
}

impl Default for PromptSet {
    fn default() -> Self {
        Self::builtin()
    }
}

impl PromptSet {
    pub fn builtin() -> Self {
        PromptSet {
            templates: BUILTIN.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect(),
        }
    }

    /// Files named `<template>.txt` in `dir` override the built-ins.
    pub fn from_dir(dir: &Path) -> Result<Self, TemplateError> {
        let mut set = Self::builtin();
        for (name, _) in BUILTIN {
            let path = dir.join(format!("{name}.txt"));
            if path.exists() {
                let text = std::fs::read_to_string(&path).map_err(|e| TemplateError::Io {
                    path: path.display().to_string(),
                    msg: e.to_string(),
                })?;
                set.templates.insert(name.to_string(), text);
            }
        }
        Ok(set)
    }

    fn get(&self, name: &str) -> &str {
        self.templates.get(name).map(String::as_str).unwrap_or("")
    }

    fn fill(&self, name: &str, vars: &[(&str, &str)]) -> Result<String, TemplateError> {
        render(name, self.get(name), vars)
    }

    pub fn env_instructions(&self, env: EnvKind, input_count: usize) -> Result<String, TemplateError> {
        let n = input_count.to_string();
        self.fill(&format!("format_{}", env.as_str()), &[("input_count", &n)])
    }

    pub fn teacher_turn1(&self, env: EnvKind, seed_snippet: &str, input_count: usize) -> Result<String, TemplateError> {
        let instructions = self.env_instructions(env, input_count)?;
        self.fill(
            "teacher_turn1",
            &[("seed_snippet", seed_snippet), ("env_instructions", &instructions)],
        )
    }

    pub fn progression(&self, directive: Directive, pass_rate: Fraction) -> Result<String, TemplateError> {
        let name = match directive {
            Directive::MakeHarder => "progression_harder",
            Directive::MakeEasier => "progression_easier",
            Directive::TargetMedium => "progression_medium",
        };
        self.fill(name, &[("pass_rate", &format_rate(pass_rate))])
    }

    /// Turn n sees only the preceding problem and its summary.
    pub fn teacher_turn_n(
        &self,
        previous: &ProblemSpec,
        summary: &PassRateSummary,
        directive: Directive,
        input_count: usize,
    ) -> Result<String, TemplateError> {
        let instructions = self.env_instructions(previous.env, input_count)?;
        let progression = self.progression(directive, summary.pass_rate)?;
        self.fill(
            "teacher_turn_n",
            &[
                ("attempts", &summary.attempts_m.to_string()),
                ("previous_problem", &render_problem(previous)),
                ("pass_rate", &format_rate(summary.pass_rate)),
                ("solved_examples", &render_examples(&summary.solved_examples)),
                ("failed_examples", &render_examples(&summary.failed_examples)),
                ("progression_strategy", &progression),
                ("env_instructions", &instructions),
            ],
        )
    }

    pub fn chain_step(
        &self,
        previous: &ProblemSpec,
        attempts: u32,
        target_level: &str,
        target_band: &str,
        input_count: usize,
    ) -> Result<String, TemplateError> {
        let instructions = self.env_instructions(previous.env, input_count)?;
        let rate = previous.pass_rate.map(format_rate).unwrap_or_else(|| "unknown".into());
        self.fill(
            "chain_step",
            &[
                ("pass_rate", &rate),
                ("attempts", &attempts.to_string()),
                ("previous_problem", &render_problem(previous)),
                ("target_level", target_level),
                ("target_band", target_band),
                ("env_instructions", &instructions),
            ],
        )
    }

    pub fn student(&self, view: &StudentView) -> Result<String, TemplateError> {
        match view {
            StudentView::Induction { message, pairs } => {
                let pairs: Vec<String> = pairs
                    .iter()
                    .map(|(i, o)| format!("```input\n{i}\n```\n```output\n{o}\n```"))
                    .collect();
                self.fill(
                    "student_induction",
                    &[("message", message), ("pairs", &pairs.join("\n\n"))],
                )
            }
            StudentView::Abduction { code, output } => {
                self.fill("student_abduction", &[("code", code), ("output", output)])
            }
            StudentView::Deduction { code, input } => {
                self.fill("student_deduction", &[("code", code), ("input", input)])
            }
            StudentView::Fuzzing { code } => self.fill("student_fuzzing", &[("code", code)]),
        }
    }
}

/// Three decimals, as shown to the teacher.
pub fn format_rate(p: Fraction) -> String {
    format!("{:.3}", p.to_f64())
}

/// Code, input/output pairs and message in fenced blocks.
pub fn render_problem(p: &ProblemSpec) -> String {
    let mut out = format!("```python\n{}\n```\n", p.code.trim_end());
    for (i, o) in p.inputs.iter().zip(&p.gold_outputs) {
        out.push_str(&format!("\n```input\n{i}\n```\n```output\n{o}\n```\n"));
    }
    out.push_str(&format!("\n```message\n{}\n```", p.message.trim()));
    out
}

fn render_examples(examples: &[String]) -> String {
    if examples.is_empty() {
        return "(none)".into();
    }
    examples
        .iter()
        .enumerate()
        .map(|(i, e)| format!("Example {}:\n{}", i + 1, e.trim_end()))
        .collect::<Vec<_>>()
        .join("\n\n")
}
