use serde::{Deserialize, Serialize};

use crate::model::{DifficultyLabel, Fraction, ProblemSpec};

/// A pass-rate interval. Closed unless `low_open`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Bin {
    pub label: DifficultyLabel,
    pub low: Fraction,
    pub high: Fraction,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub low_open: bool,
}

impl Bin {
    pub fn contains(&self, p: Fraction) -> bool {
        let above = if self.low_open { p > self.low } else { p >= self.low };
        above && p <= self.high
    }

    /// `0.41-0.59`
    pub fn range_text(&self) -> String {
        format!("{:.2}-{:.2}", self.low.to_f64(), self.high.to_f64())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BinConfig {
    pub name: String,
    pub bins: Vec<Bin>,
}

impl BinConfig {
    pub fn validate(&self) -> Result<(), String> {
        let mut sorted: Vec<&Bin> = self.bins.iter().collect();
        for b in &sorted {
            if b.low > b.high || (b.low_open && b.low == b.high) {
                return Err(format!("{}: bin {} is empty", self.name, b.label));
            }
            if b.label == DifficultyLabel::Unbinned {
                return Err(format!("{}: unbinned is not a bin", self.name));
            }
        }
        sorted.sort_by_key(|b| (b.low, b.low_open));
        for w in sorted.windows(2) {
            let (lo, hi) = (w[0], w[1]);
            if hi.low < lo.high || (hi.low == lo.high && !hi.low_open) {
                return Err(format!("{}: bins {} and {} overlap", self.name, lo.label, hi.label));
            }
        }
        Ok(())
    }

    pub fn bin(&self, label: DifficultyLabel) -> Option<&Bin> {
        self.bins.iter().find(|b| b.label == label)
    }
}

/// Label of the bin holding `p`, else Unbinned.
pub fn assign_bin(p: Fraction, cfg: &BinConfig) -> DifficultyLabel {
    cfg.bins
        .iter()
        .find(|b| b.contains(p))
        .map(|b| b.label)
        .unwrap_or(DifficultyLabel::Unbinned)
}

/// Label for a problem; Unbinned when it has no pass rate.
pub fn label_of(problem: &ProblemSpec, cfg: &BinConfig) -> DifficultyLabel {
    problem
        .pass_rate
        .map(|p| assign_bin(p, cfg))
        .unwrap_or(DifficultyLabel::Unbinned)
}

/// Sets `bin_label` on every problem.
pub fn bin_dataset(problems: &mut [ProblemSpec], cfg: &BinConfig) {
    for p in problems {
        p.bin_label = Some(label_of(p, cfg));
    }
}
