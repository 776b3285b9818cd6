use std::path::Path;

use rand::Rng;

use crate::model::{new_id, SeedSnippet, SeedSource, SNIPPET_MAX_LINES, SNIPPET_MIN_LINES};

use super::PipelineError;

/// A source file that seed snippets are cut from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Corpus {
    pub name: String,
    lines: Vec<String>,
}

impl Corpus {
    pub fn from_text(name: impl Into<String>, text: &str) -> Self {
        Corpus {
            name: name.into(),
            lines: text.lines().map(str::to_string).collect(),
        }
    }

    pub fn load(path: &Path) -> std::io::Result<Self> {
        Ok(Self::from_text(path.display().to_string(), &std::fs::read_to_string(path)?))
    }

    pub fn line_count(&self) -> usize {
        self.lines.len()
    }
}

/// Cuts a window of 25 to 50 consecutive lines. Length and start are uniform.
pub fn sample_seed<R: Rng + ?Sized>(corpus: &Corpus, rng: &mut R) -> Result<SeedSnippet, PipelineError> {
    let n = corpus.lines.len();
    if n < SNIPPET_MAX_LINES {
        return Err(PipelineError::CorpusTooSmall {
            name: corpus.name.clone(),
            lines: n,
        });
    }
    let len = rng.random_range(SNIPPET_MIN_LINES..=SNIPPET_MAX_LINES);
    let start = rng.random_range(0..=n - len);
    let text = corpus.lines[start..start + len].join("\n");
    Ok(SeedSnippet {
        seed_id: new_id(rng),
        source: SeedSource::CorpusSnippet,
        text,
        line_count: len,
    })
}
