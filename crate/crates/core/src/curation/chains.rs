//! Hard → medium → easy chains, built backwards from a hard problem.

use std::fmt;

use rand::Rng;
use tracing::debug;

use super::bins::{assign_bin, BinConfig};
use crate::client::LogEvent;
use crate::env::Lineage;
use crate::model::{new_id, Chain, DifficultyLabel, EnvKind, ProblemSpec};
use crate::pipeline::{materialize_candidate, GenContext, Grader, PipelineError};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChainBuildConfig {
    pub attempts_m: u32,
    pub max_regeneration_tries: u32,
    pub bin_config: BinConfig,
}

impl Default for ChainBuildConfig {
    fn default() -> Self {
        ChainBuildConfig {
            attempts_m: 32,
            max_regeneration_tries: 4,
            bin_config: crate::presets::Presets::builtin().bin_config("appendix-b").expect("shipped").clone(),
        }
    }
}

impl ChainBuildConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.attempts_m == 0 || self.max_regeneration_tries == 0 {
            return Err("attempts_m and max_regeneration_tries must be positive".into());
        }
        for l in [DifficultyLabel::Hard, DifficultyLabel::Medium, DifficultyLabel::Easy] {
            if self.bin_config.bin(l).is_none() {
                return Err(format!("bin scheme {} has no {l} bin", self.bin_config.name));
            }
        }
        self.bin_config.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChainLevel {
    Medium,
    Easy,
}

impl ChainLevel {
    pub fn label(self) -> DifficultyLabel {
        match self {
            ChainLevel::Medium => DifficultyLabel::Medium,
            ChainLevel::Easy => DifficultyLabel::Easy,
        }
    }
}

impl fmt::Display for ChainLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label().as_str())
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ChainError {
    #[error("problem {problem_id} is not hard under {scheme} (pass rate {pass_rate})")]
    NotHard {
        problem_id: String,
        scheme: String,
        pass_rate: String,
    },
    #[error("no {level} variant after {tries} tries (last: {last})")]
    ChainFailed { level: ChainLevel, tries: u32, last: String },
    #[error("built chain is invalid: {0:?}")]
    Invalid(Vec<ChainViolation>),
    #[error("{0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
}

fn input_count(env: EnvKind, ctx: &GenContext<'_>) -> usize {
    match env {
        EnvKind::Induction => ctx.cfg.induction_inputs,
        _ => 1,
    }
}

/// Asks for a variant of `prev` until one grades into `level`'s bin.
fn next_level<R: Rng + ?Sized>(
    prev: &ProblemSpec,
    level: ChainLevel,
    ctx: &GenContext<'_>,
    cfg: &ChainBuildConfig,
    rng: &mut R,
) -> Result<ProblemSpec, ChainError> {
    let target = level.label();
    let band = cfg.bin_config.bin(target).expect("validated").range_text();
    let grader = Grader {
        attempts_m: cfg.attempts_m,
        ..ctx.grader()
    };
    let prompt = ctx
        .prompts
        .chain_step(prev, cfg.attempts_m, target.as_str(), &band, input_count(prev.env, ctx))
        .map_err(PipelineError::from)?;
    let mut last = String::new();
    for attempt in 1..=cfg.max_regeneration_tries {
        let completion = ctx.teacher.complete(&prompt, &ctx.cfg.teacher).map_err(PipelineError::from)?;
        let lineage = Lineage {
            problem_id: new_id(rng),
            seed_id: prev.seed_id.clone(),
            turn_index: prev.turn_index + 1,
            parent_id: Some(prev.problem_id.clone()),
        };
        let (problem, drop, detail) = match materialize_candidate(&completion, prev.env, ctx.executor, lineage, ctx.cfg.limits) {
            Err((reason, detail)) => (None, Some(reason.as_str().to_string()), detail),
            Ok(mut p) => {
                let (_, summary) = grader.grade(&p)?;
                p.pass_rate = Some(summary.pass_rate);
                let got = assign_bin(summary.pass_rate, &cfg.bin_config);
                p.bin_label = Some(got);
                let detail = format!("graded {} -> {got}, wanted {target}", summary.pass_rate);
                if got == target {
                    (Some(p), None, detail)
                } else {
                    (Some(p), Some("wrong_bin".into()), detail)
                }
            }
        };
        ctx.log.record(&LogEvent::Decision {
            seed_id: prev.seed_id.clone(),
            turn_index: prev.turn_index + 1,
            problem_id: problem.as_ref().map(|p| p.problem_id.clone()),
            kept: drop.is_none(),
            drop_reason: drop.clone(),
            pass_rate: problem.as_ref().and_then(|p| p.pass_rate).map(|r| r.to_string()),
            detail: Some(format!("chain {level} try {attempt}: {detail}")),
        });
        debug!(level = %level, attempt, %detail, "chain step");
        match (problem, drop) {
            (Some(p), None) => return Ok(p),
            _ => last = detail,
        }
    }
    Err(ChainError::ChainFailed {
        level,
        tries: cfg.max_regeneration_tries,
        last,
    })
}

/// Builds medium then easy variants of a graded hard problem.
pub fn build_chain<R: Rng + ?Sized>(
    hard: &ProblemSpec,
    ctx: &GenContext<'_>,
    cfg: &ChainBuildConfig,
    rng: &mut R,
) -> Result<Chain, ChainError> {
    cfg.validate().map_err(ChainError::InvalidConfig)?;
    let hard_label = hard.pass_rate.map(|p| assign_bin(p, &cfg.bin_config));
    if hard_label != Some(DifficultyLabel::Hard) {
        return Err(ChainError::NotHard {
            problem_id: hard.problem_id.clone(),
            scheme: cfg.bin_config.name.clone(),
            pass_rate: hard.pass_rate.map(|p| p.to_string()).unwrap_or_else(|| "none".into()),
        });
    }
    let mut hard = hard.clone();
    hard.bin_label = Some(DifficultyLabel::Hard);
    let medium = next_level(&hard, ChainLevel::Medium, ctx, cfg, rng)?;
    let easy = next_level(&medium, ChainLevel::Easy, ctx, cfg, rng)?;
    let chain = Chain {
        chain_id: new_id(rng),
        hard,
        medium,
        easy,
    };
    let violations = validate_chain(&chain, &cfg.bin_config);
    if violations.is_empty() {
        Ok(chain)
    } else {
        Err(ChainError::Invalid(violations))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ChainViolation {
    /// `child`'s parent_id does not name `parent`.
    Lineage { child: String, parent: String },
    SeedMismatch { problem_id: String },
    EnvMismatch { problem_id: String },
    MissingPassRate { member: DifficultyLabel },
    /// Pass rate falls outside the member's bin.
    NotInBin { member: DifficultyLabel, got: DifficultyLabel },
    /// Stored bin_label disagrees with the member's position.
    Label { member: DifficultyLabel, stored: Option<DifficultyLabel> },
    Ordering,
}

impl fmt::Display for ChainViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ChainViolation::Lineage { child, parent } => write!(f, "lineage: {child} does not descend from {parent}"),
            ChainViolation::SeedMismatch { problem_id } => write!(f, "{problem_id} comes from another seed"),
            ChainViolation::EnvMismatch { problem_id } => write!(f, "{problem_id} is in another environment"),
            ChainViolation::MissingPassRate { member } => write!(f, "{member} member has no pass rate"),
            ChainViolation::NotInBin { member, got } => write!(f, "{member} member not in {member} bin (bins as {got})"),
            ChainViolation::Label { member, stored } => write!(f, "{member} member labeled {stored:?}"),
            ChainViolation::Ordering => write!(f, "pass rates not strictly increasing hard < medium < easy"),
        }
    }
}

/// Every condition the chain breaks; empty when valid.
pub fn validate_chain(chain: &Chain, bins: &BinConfig) -> Vec<ChainViolation> {
    let mut out = Vec::new();
    for (child, parent) in [(&chain.medium, &chain.hard), (&chain.easy, &chain.medium)] {
        if child.parent_id.as_deref() != Some(parent.problem_id.as_str()) {
            out.push(ChainViolation::Lineage {
                child: child.problem_id.clone(),
                parent: parent.problem_id.clone(),
            });
        }
    }
    let members = [
        (&chain.hard, DifficultyLabel::Hard),
        (&chain.medium, DifficultyLabel::Medium),
        (&chain.easy, DifficultyLabel::Easy),
    ];
    for (p, _) in &members[1..] {
        if p.seed_id != chain.hard.seed_id {
            out.push(ChainViolation::SeedMismatch {
                problem_id: p.problem_id.clone(),
            });
        }
        if p.env != chain.hard.env {
            out.push(ChainViolation::EnvMismatch {
                problem_id: p.problem_id.clone(),
            });
        }
    }
    for (p, member) in members {
        match p.pass_rate {
            None => out.push(ChainViolation::MissingPassRate { member }),
            Some(r) => {
                let got = assign_bin(r, bins);
                if got != member {
                    out.push(ChainViolation::NotInBin { member, got });
                }
            }
        }
        if p.bin_label.is_some_and(|l| l != member) {
            out.push(ChainViolation::Label {
                member,
                stored: p.bin_label,
            });
        }
    }
    if let (Some(h), Some(m), Some(e)) = (chain.hard.pass_rate, chain.medium.pass_rate, chain.easy.pass_rate) {
        if !(h < m && m < e) {
            out.push(ChainViolation::Ordering);
        }
    }
    out
}
