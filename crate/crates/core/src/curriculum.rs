//! Step-indexed sampling weights over difficulty splits.

use std::collections::BTreeMap;

use num_rational::Ratio;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::model::Fraction;

/// Training horizon shared by the shipped schedules, in RL steps.
pub const DEFAULT_HORIZON: u64 = 40_000;

const SIMPLEX_TOL: f64 = 1e-9;

/// One half-open stage `[start_step, end_step)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Stage {
    pub start_step: u64,
    pub end_step: u64,
    pub weights: BTreeMap<String, Fraction>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CurriculumSchedule {
    pub name: String,
    /// Split labels in sampling order.
    pub splits: Vec<String>,
    pub stages: Vec<Stage>,
}

/// Weights in declared split order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitWeights(pub Vec<(String, Fraction)>);

impl SplitWeights {
    pub fn get(&self, split: &str) -> Option<Fraction> {
        self.0.iter().find(|(s, _)| s == split).map(|(_, w)| *w)
    }

    /// `easy=0.80 medium=0.15 hard=0.05`
    pub fn render(&self) -> String {
        self.0
            .iter()
            .map(|(s, w)| format!("{s}={:.2}", w.to_f64()))
            .collect::<Vec<_>>()
            .join(" ")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CurriculumError {
    #[error("step {step} outside schedule {name} (horizon {horizon})")]
    StepOutOfRange { name: String, step: u64, horizon: u64 },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ScheduleViolation {
    NoStages,
    Gap { from: u64, to: u64 },
    Overlap { at: u64 },
    EmptyStage { index: usize },
    Overrun { end: u64, horizon: u64 },
    Simplex { index: usize, sum: String },
    Labels { index: usize, missing: Vec<String>, extra: Vec<String> },
    DuplicateSplit(String),
}

impl std::fmt::Display for ScheduleViolation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ScheduleViolation::NoStages => write!(f, "schedule has no stages"),
            ScheduleViolation::Gap { from, to } => write!(f, "gap: steps {from}..{to} uncovered"),
            ScheduleViolation::Overlap { at } => write!(f, "overlap at step {at}"),
            ScheduleViolation::EmptyStage { index } => write!(f, "stage {index} is empty"),
            ScheduleViolation::Overrun { end, horizon } => write!(f, "stages end at {end}, past horizon {horizon}"),
            ScheduleViolation::Simplex { index, sum } => write!(f, "stage {index} weights sum to {sum}"),
            ScheduleViolation::Labels { index, missing, extra } => {
                write!(f, "stage {index} labels: missing {missing:?}, extra {extra:?}")
            }
            ScheduleViolation::DuplicateSplit(s) => write!(f, "split {s} declared twice"),
        }
    }
}

impl CurriculumSchedule {
    /// Single stage, equal weight on every split.
    pub fn uniform(name: impl Into<String>, splits: &[&str], horizon: u64) -> Self {
        let w = Fraction::new(1, splits.len().max(1) as u64).expect("nonzero");
        CurriculumSchedule {
            name: name.into(),
            splits: splits.iter().map(|s| s.to_string()).collect(),
            stages: vec![Stage {
                start_step: 0,
                end_step: horizon,
                weights: splits.iter().map(|s| (s.to_string(), w)).collect(),
            }],
        }
    }

    pub fn horizon(&self) -> u64 {
        self.stages.last().map(|s| s.end_step).unwrap_or(0)
    }
}

pub fn stage_weights(schedule: &CurriculumSchedule, step: u64) -> Result<SplitWeights, CurriculumError> {
    let stage = schedule
        .stages
        .iter()
        .find(|s| s.start_step <= step && step < s.end_step)
        .ok_or_else(|| CurriculumError::StepOutOfRange {
            name: schedule.name.clone(),
            step,
            horizon: schedule.horizon(),
        })?;
    Ok(SplitWeights(
        schedule
            .splits
            .iter()
            .map(|s| (s.clone(), stage.weights.get(s).copied().unwrap_or(Fraction::ZERO)))
            .collect(),
    ))
}

/// Inverse-CDF draw over the labels in declared order.
pub fn sample_split<'w, R: Rng + ?Sized>(weights: &'w SplitWeights, rng: &mut R) -> &'w str {
    let u: f64 = rng.random();
    let mut cum = 0.0;
    for (label, w) in &weights.0 {
        cum += w.to_f64();
        if u < cum {
            return label;
        }
    }
    // rounding left u above the last cumulative value
    weights
        .0
        .iter()
        .rev()
        .find(|(_, w)| !w.is_zero())
        .or(weights.0.last())
        .map(|(l, _)| l.as_str())
        .unwrap_or("")
}

/// Draws a split, then an item from it uniformly. `None` when the drawn
/// split is missing or empty.
pub fn sample_item<'d, T, R: Rng + ?Sized>(
    weights: &SplitWeights,
    data: &'d BTreeMap<String, Vec<T>>,
    rng: &mut R,
) -> Option<&'d T> {
    let items = data.get(sample_split(weights, rng))?;
    if items.is_empty() {
        return None;
    }
    Some(&items[rng.random_range(0..items.len())])
}

pub fn validate_schedule(schedule: &CurriculumSchedule, horizon: u64) -> Vec<ScheduleViolation> {
    let mut out = Vec::new();
    let mut declared = std::collections::BTreeSet::new();
    for s in &schedule.splits {
        if !declared.insert(s.clone()) {
            out.push(ScheduleViolation::DuplicateSplit(s.clone()));
        }
    }
    if schedule.stages.is_empty() {
        out.push(ScheduleViolation::NoStages);
        return out;
    }
    let mut cursor = 0;
    for (i, st) in schedule.stages.iter().enumerate() {
        if st.start_step > cursor {
            out.push(ScheduleViolation::Gap {
                from: cursor,
                to: st.start_step,
            });
        } else if st.start_step < cursor {
            out.push(ScheduleViolation::Overlap { at: st.start_step });
        }
        if st.end_step <= st.start_step {
            out.push(ScheduleViolation::EmptyStage { index: i });
        }
        cursor = cursor.max(st.end_step);

        let sum = st
            .weights
            .values()
            .fold(Ratio::<u128>::from_integer(0), |acc, w| {
                acc + Ratio::new(w.numer() as u128, w.denom() as u128)
            });
        let sum_f = *sum.numer() as f64 / *sum.denom() as f64;
        if (sum_f - 1.0).abs() > SIMPLEX_TOL {
            out.push(ScheduleViolation::Simplex {
                index: i,
                sum: format!("{sum_f}"),
            });
        }
        let keys: std::collections::BTreeSet<String> = st.weights.keys().cloned().collect();
        let missing: Vec<String> = declared.difference(&keys).cloned().collect();
        let extra: Vec<String> = keys.difference(&declared).cloned().collect();
        if !missing.is_empty() || !extra.is_empty() {
            out.push(ScheduleViolation::Labels { index: i, missing, extra });
        }
    }
    if cursor < horizon {
        out.push(ScheduleViolation::Gap { from: cursor, to: horizon });
    } else if cursor > horizon {
        out.push(ScheduleViolation::Overrun { end: cursor, horizon });
    }
    out
}

/// Draws split labels for successive training steps. One per consumer.
pub struct SplitSampler {
    schedule: CurriculumSchedule,
    rng: ChaCha8Rng,
}

impl SplitSampler {
    pub fn new(schedule: CurriculumSchedule, seed: u64) -> Self {
        use rand::SeedableRng;
        SplitSampler {
            schedule,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn sample(&mut self, step: u64) -> Result<String, CurriculumError> {
        let w = stage_weights(&self.schedule, step)?;
        Ok(sample_split(&w, &mut self.rng).to_string())
    }
}
