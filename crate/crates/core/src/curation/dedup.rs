//! Exact and near-duplicate removal.

use std::collections::{HashMap, HashSet};
use std::hash::{DefaultHasher, Hash, Hasher};

use crate::model::digest::strip_comments;
use crate::model::{Fraction, ProblemSpec};

pub const SHINGLE_SIZE: usize = 5;

/// Word tokens (identifier and number runs) and single punctuation marks.
pub fn tokens(text: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let mut start = None;
    for (i, c) in text.char_indices() {
        let word = c.is_alphanumeric() || c == '_';
        match (word, start) {
            (true, None) => start = Some(i),
            (true, Some(_)) => {}
            (false, s) => {
                if let Some(s) = s {
                    out.push(&text[s..i]);
                    start = None;
                }
                if !c.is_whitespace() {
                    out.push(&text[i..i + c.len_utf8()]);
                }
            }
        }
    }
    if let Some(s) = start {
        out.push(&text[s..]);
    }
    out
}

/// Hashed token 5-grams; shorter texts yield one shingle of all tokens.
pub fn shingles(text: &str) -> HashSet<u64> {
    let toks = tokens(text);
    let hash = |window: &[&str]| {
        let mut h = DefaultHasher::new();
        window.hash(&mut h);
        h.finish()
    };
    if toks.is_empty() {
        return HashSet::new();
    }
    if toks.len() < SHINGLE_SIZE {
        return HashSet::from([hash(&toks)]);
    }
    toks.windows(SHINGLE_SIZE).map(hash).collect()
}

/// Text a problem is compared on: comment-free code plus message.
pub fn dedup_text(p: &ProblemSpec) -> String {
    format!("{}\n{}", strip_comments(&p.code), p.message)
}

pub fn jaccard(a: &HashSet<u64>, b: &HashSet<u64>) -> f64 {
    if a.is_empty() && b.is_empty() {
        return 1.0;
    }
    let inter = a.intersection(b).count();
    inter as f64 / (a.len() + b.len() - inter) as f64
}

#[derive(Debug, Clone, PartialEq)]
pub enum DuplicateOf {
    Exact { of: String },
    Near { of: String, similarity: f64 },
}

#[derive(Debug, Clone, Default)]
pub struct DedupOutcome {
    pub kept: Vec<ProblemSpec>,
    pub dropped: Vec<(ProblemSpec, DuplicateOf)>,
}

/// Drops exact-digest repeats, then records whose shingle Jaccard against
/// an already-kept record reaches `threshold`. First occurrence wins and
/// input order is preserved.
pub fn dedup_dataset(records: Vec<ProblemSpec>, threshold: Fraction) -> DedupOutcome {
    let mut out = DedupOutcome::default();
    let mut by_digest: HashMap<String, String> = HashMap::new();
    let mut kept_sets: Vec<HashSet<u64>> = Vec::new();
    let mut postings: HashMap<u64, Vec<usize>> = HashMap::new();

    for p in records {
        if let Some(of) = by_digest.get(&p.dedup_digest) {
            let of = of.clone();
            out.dropped.push((p, DuplicateOf::Exact { of }));
            continue;
        }
        let set = shingles(&dedup_text(&p));
        let mut shared: HashMap<usize, usize> = HashMap::new();
        for s in &set {
            for &k in postings.get(s).map(Vec::as_slice).unwrap_or(&[]) {
                *shared.entry(k).or_insert(0) += 1;
            }
        }
        // exact rational comparison: inter / union >= num / den
        let (num, den) = (threshold.numer() as u128, threshold.denom() as u128);
        let near = shared
            .into_iter()
            .filter(|&(k, inter)| {
                let union = set.len() + kept_sets[k].len() - inter;
                inter as u128 * den >= num * union as u128
            })
            .min_by_key(|&(k, _)| k);
        if let Some((k, inter)) = near {
            let union = set.len() + kept_sets[k].len() - inter;
            let of = out.kept[k].problem_id.clone();
            out.dropped.push((
                p,
                DuplicateOf::Near {
                    of,
                    similarity: inter as f64 / union as f64,
                },
            ));
            continue;
        }
        let idx = out.kept.len();
        for s in &set {
            postings.entry(*s).or_default().push(idx);
        }
        by_digest.insert(p.dedup_digest.clone(), p.problem_id.clone());
        kept_sets.push(set);
        out.kept.push(p);
    }
    out
}
