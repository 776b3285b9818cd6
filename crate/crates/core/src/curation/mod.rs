//! Binning, dedup, histogram matching, chains and dataset statistics.

mod bins;
mod chains;
mod dedup;
mod histogram;
mod stats;

pub use bins::{assign_bin, bin_dataset, label_of, Bin, BinConfig};
pub use chains::{build_chain, validate_chain, ChainBuildConfig, ChainError, ChainLevel, ChainViolation};
pub use dedup::{dedup_dataset, dedup_text, jaccard, shingles, tokens, DedupOutcome, DuplicateOf, SHINGLE_SIZE};
pub use histogram::{label_counts, match_histograms};
pub use stats::{dataset_stats, DatasetStats, HISTOGRAM_BUCKETS};
