use std::collections::BTreeMap;

use rand::Rng;

use super::bins::{label_of, BinConfig};
use crate::model::{DifficultyLabel, ProblemSpec};

/// Per-label counts under `cfg`, Unbinned excluded.
pub fn label_counts(records: &[ProblemSpec], cfg: &BinConfig) -> BTreeMap<DifficultyLabel, usize> {
    let mut m: BTreeMap<DifficultyLabel, usize> = cfg.bins.iter().map(|b| (b.label, 0)).collect();
    for r in records {
        let l = label_of(r, cfg);
        if l != DifficultyLabel::Unbinned {
            *m.entry(l).or_insert(0) += 1;
        }
    }
    m
}

/// Subsamples both datasets so every bin holds min(count_a, count_b)
/// records on each side. Selection is uniform without replacement; the
/// survivors keep their input order. Unbinned records are dropped.
pub fn match_histograms<R: Rng + ?Sized>(
    a: &[ProblemSpec],
    b: &[ProblemSpec],
    cfg: &BinConfig,
    rng: &mut R,
) -> (Vec<ProblemSpec>, Vec<ProblemSpec>) {
    let group = |d: &[ProblemSpec]| {
        let mut m: BTreeMap<DifficultyLabel, Vec<usize>> = BTreeMap::new();
        for (i, r) in d.iter().enumerate() {
            m.entry(label_of(r, cfg)).or_default().push(i);
        }
        m
    };
    let (ga, gb) = (group(a), group(b));
    let mut keep_a = vec![false; a.len()];
    let mut keep_b = vec![false; b.len()];
    for bin in &cfg.bins {
        let empty = Vec::new();
        let ia = ga.get(&bin.label).unwrap_or(&empty);
        let ib = gb.get(&bin.label).unwrap_or(&empty);
        let n = ia.len().min(ib.len());
        for (idx, keep) in [(ia, &mut keep_a), (ib, &mut keep_b)] {
            for j in rand::seq::index::sample(rng, idx.len(), n) {
                keep[idx[j]] = true;
            }
        }
    }
    let pick = |d: &[ProblemSpec], keep: &[bool]| {
        d.iter()
            .zip(keep)
            .filter(|(_, k)| **k)
            .map(|(r, _)| r.clone())
            .collect::<Vec<_>>()
    };
    (pick(a, &keep_a), pick(b, &keep_b))
}
