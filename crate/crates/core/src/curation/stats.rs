use std::collections::{BTreeMap, HashMap};

use serde::Serialize;

use super::bins::{label_of, BinConfig};
use crate::model::{DifficultyLabel, EnvKind, ProblemSpec};

pub const HISTOGRAM_BUCKETS: usize = 20;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DatasetStats {
    pub records: usize,
    pub per_env: BTreeMap<EnvKind, usize>,
    /// Bucket `i` covers `[i/20, (i+1)/20)`; 1.0 lands in the last one.
    pub pass_rate_histogram: [usize; HISTOGRAM_BUCKETS],
    pub without_pass_rate: usize,
    /// Scheme name to per-label counts, Unbinned included.
    pub per_bin: BTreeMap<String, BTreeMap<DifficultyLabel, usize>>,
    /// Records sharing a dedup digest with an earlier record.
    pub digest_collisions: usize,
}

pub fn dataset_stats(records: &[ProblemSpec], schemes: &[&BinConfig]) -> DatasetStats {
    let mut per_env: BTreeMap<EnvKind, usize> = EnvKind::ALL.iter().map(|e| (*e, 0)).collect();
    let mut hist = [0; HISTOGRAM_BUCKETS];
    let mut without = 0;
    let mut per_bin: BTreeMap<String, BTreeMap<DifficultyLabel, usize>> = schemes
        .iter()
        .map(|s| {
            let mut m: BTreeMap<_, _> = s.bins.iter().map(|b| (b.label, 0)).collect();
            m.insert(DifficultyLabel::Unbinned, 0);
            (s.name.clone(), m)
        })
        .collect();
    let mut digests: HashMap<&str, usize> = HashMap::new();
    for r in records {
        *per_env.entry(r.env).or_insert(0) += 1;
        match r.pass_rate {
            Some(p) => {
                let b = (p.numer() as u128 * HISTOGRAM_BUCKETS as u128 / p.denom() as u128) as usize;
                hist[b.min(HISTOGRAM_BUCKETS - 1)] += 1;
            }
            None => without += 1,
        }
        for s in schemes {
            *per_bin
                .get_mut(&s.name)
                .expect("scheme registered")
                .entry(label_of(r, s))
                .or_insert(0) += 1;
        }
        *digests.entry(r.dedup_digest.as_str()).or_insert(0) += 1;
    }
    DatasetStats {
        records: records.len(),
        per_env,
        pass_rate_histogram: hist,
        without_pass_rate: without,
        per_bin,
        digest_collisions: digests.values().map(|n| n - 1).sum(),
    }
}
