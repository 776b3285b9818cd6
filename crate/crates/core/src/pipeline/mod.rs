//! The multi-turn generation loop.

mod config;
mod seed;
mod session;

use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::thread;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::client::ClientError;
use crate::env::TemplateError;
use crate::model::{
    write_records, AttemptRecord, DatasetManifest, PassRateSummary, ProblemSpec, Record, RecordError, SeedSnippet,
};

pub use crate::env::Directive;
pub use config::PipelineConfig;
pub use seed::{sample_seed, Corpus};
pub use session::{
    filter_candidate, materialize_candidate, progression_directive, run_seed_session, run_turn, summarize_attempts,
    DedupIndex, DropReason, GenContext, Grader, TurnOutcome, TurnState,
};

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error("corpus {name} has {lines} lines; at least 50 are needed")]
    CorpusTooSmall { name: String, lines: usize },
    #[error("seed {seed_id} aborted: no valid turn-1 problem ({reason})")]
    SeedAborted { seed_id: String, reason: String },
    #[error(transparent)]
    Backend(#[from] ClientError),
    #[error(transparent)]
    Template(#[from] TemplateError),
    #[error(transparent)]
    Record(#[from] RecordError),
    #[error("{0}")]
    InvalidConfig(String),
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// One seed's session. `aborted` holds the reason when turn 1 never produced a problem.
#[derive(Debug, Clone)]
pub struct SeedResult {
    pub seed: SeedSnippet,
    pub outcomes: Vec<TurnOutcome>,
    pub aborted: Option<String>,
}

#[derive(Debug, Clone, Default)]
pub struct PipelineRun {
    pub seeds: Vec<SeedResult>,
}

impl PipelineRun {
    fn outcomes(&self) -> impl Iterator<Item = &TurnOutcome> {
        self.seeds.iter().flat_map(|s| s.outcomes.iter())
    }

    pub fn kept(&self) -> Vec<ProblemSpec> {
        self.outcomes()
            .filter(|o| o.kept)
            .filter_map(|o| o.problem.clone())
            .collect()
    }

    /// Graded problems that were filtered out.
    pub fn dropped(&self) -> Vec<ProblemSpec> {
        self.outcomes()
            .filter(|o| !o.kept)
            .filter_map(|o| o.problem.clone())
            .collect()
    }

    pub fn attempts(&self) -> Vec<AttemptRecord> {
        self.outcomes().flat_map(|o| o.attempts.iter().cloned()).collect()
    }

    pub fn summaries(&self) -> Vec<PassRateSummary> {
        self.outcomes().filter_map(|o| o.summary.clone()).collect()
    }

    pub fn drop_counts(&self) -> std::collections::BTreeMap<DropReason, usize> {
        let mut m = std::collections::BTreeMap::new();
        for r in self.outcomes().filter_map(|o| o.drop_reason) {
            *m.entry(r).or_insert(0) += 1;
        }
        m
    }
}

/// Seed `i` draws from its own ChaCha stream so sessions do not share rng state.
pub fn seed_rng(rng_seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    rng.set_stream(index as u64);
    rng
}

/// Samples `num_seeds` snippets and runs a session on each, `cfg.concurrency`
/// at a time. Aborted seeds are recorded; backend failures end the run.
pub fn run_pipeline(corpora: &[Corpus], num_seeds: usize, ctx: &GenContext<'_>) -> Result<PipelineRun, PipelineError> {
    ctx.cfg.validate().map_err(PipelineError::InvalidConfig)?;
    let eligible: Vec<&Corpus> = corpora.iter().filter(|c| c.line_count() >= 50).collect();
    if eligible.is_empty() {
        let c = corpora.first();
        return Err(PipelineError::CorpusTooSmall {
            name: c.map(|c| c.name.clone()).unwrap_or_default(),
            lines: c.map(|c| c.line_count()).unwrap_or(0),
        });
    }
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<Result<SeedResult, PipelineError>>>> =
        Mutex::new((0..num_seeds).map(|_| None).collect());
    let run_one = |i: usize| -> Result<SeedResult, PipelineError> {
        let mut rng = seed_rng(ctx.cfg.rng_seed, i);
        let corpus = eligible[rng.random_range(0..eligible.len())];
        let seed = sample_seed(corpus, &mut rng)?;
        match run_seed_session(&seed, ctx, &mut rng) {
            Ok(outcomes) => Ok(SeedResult {
                seed,
                outcomes,
                aborted: None,
            }),
            Err(PipelineError::SeedAborted { reason, .. }) => {
                ctx.log.note(format!("seed {} aborted: {reason}", seed.seed_id));
                Ok(SeedResult {
                    seed,
                    outcomes: vec![],
                    aborted: Some(reason),
                })
            }
            Err(e) => Err(e),
        }
    };
    thread::scope(|s| {
        for _ in 0..ctx.cfg.concurrency.min(num_seeds.max(1)) {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                if i >= num_seeds {
                    break;
                }
                let r = run_one(i);
                let failed = r.is_err();
                slots.lock().unwrap_or_else(|p| p.into_inner())[i] = Some(r);
                if failed {
                    // stop handing out new seeds
                    next.store(num_seeds, Ordering::SeqCst);
                    break;
                }
            });
        }
    });
    let mut run = PipelineRun::default();
    for slot in slots.into_inner().unwrap_or_else(|p| p.into_inner()).into_iter().flatten() {
        run.seeds.push(slot?);
    }
    Ok(run)
}

/// Dataset file names inside an output directory.
pub const PROBLEMS_FILE: &str = "problems.jsonl";
pub const DROPPED_FILE: &str = "dropped.jsonl";
pub const ATTEMPTS_FILE: &str = "attempts.jsonl";
pub const SUMMARIES_FILE: &str = "summaries.jsonl";
pub const MANIFEST_FILE: &str = "manifest.json";

/// Writes kept and dropped problems, attempts, summaries and the manifest.
pub fn write_dataset(run: &PipelineRun, dir: &Path, cfg: &PipelineConfig) -> Result<DatasetManifest, PipelineError> {
    std::fs::create_dir_all(dir).map_err(|e| PipelineError::Io {
        path: dir.display().to_string(),
        source: e,
    })?;
    let kept = run.kept();
    write_records(&dir.join(PROBLEMS_FILE), kept.iter().cloned().map(Record::from))?;
    write_records(&dir.join(DROPPED_FILE), run.dropped().into_iter().map(Record::from))?;
    write_records(&dir.join(ATTEMPTS_FILE), run.attempts().into_iter().map(Record::from))?;
    write_records(&dir.join(SUMMARIES_FILE), run.summaries().into_iter().map(Record::from))?;
    let manifest = write_manifest(dir, PROBLEMS_FILE, &kept, &cfg.fingerprint())?;
    Ok(manifest)
}

/// Writes `manifest.json` describing `file` (which holds `problems`).
pub fn write_manifest(
    dir: &Path,
    file: &str,
    problems: &[ProblemSpec],
    fingerprint: &str,
) -> Result<DatasetManifest, PipelineError> {
    let manifest = DatasetManifest::for_problems(
        file,
        problems,
        chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
        fingerprint,
    );
    let path = dir.join(MANIFEST_FILE);
    let body = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    std::fs::write(&path, body + "\n").map_err(|e| PipelineError::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    Ok(manifest)
}
