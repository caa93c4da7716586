//! Length filtering and the deterministic 95/5 train/test split.

use rand::seq::SliceRandom;
use rand_chacha::{rand_core::SeedableRng, ChaCha8Rng};
use serde::{Deserialize, Serialize};

use super::vocab::EOS_ID;

/// Maximum document length in tokens; longer documents are dropped.
pub const MAX_DOCUMENT_TOKENS: usize = 500;

/// Test-set share: one example in twenty (5%).
pub const TEST_DENOMINATOR: usize = 20;

/// Which field is the summary and how long it may be.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SummaryProfile {
    /// Post title as summary, capped at 20 tokens.
    Short,
    /// TL;DR line as summary, capped at 50 tokens.
    Long,
}

impl SummaryProfile {
    pub fn summary_cap(self) -> usize {
        match self {
            SummaryProfile::Short => 20,
            SummaryProfile::Long => 50,
        }
    }
}

/// One preprocessed (document, summary) pair with its provenance id.
/// `summary_ids` carries the trailing `<eos>`; the length caps apply to the
/// content tokens before it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Example {
    pub id: String,
    pub document_ids: Vec<usize>,
    pub summary_ids: Vec<usize>,
}

impl Example {
    /// Summary length not counting the terminating `<eos>`.
    pub fn summary_content_len(&self) -> usize {
        match self.summary_ids.last() {
            Some(&id) if id == EOS_ID => self.summary_ids.len() - 1,
            _ => self.summary_ids.len(),
        }
    }
}

/// Shared length predicate: documents of 1..=500 tokens, summaries of
/// 1..=cap content tokens survive.
pub fn within_length_caps(doc_len: usize, summary_len: usize, profile: SummaryProfile) -> bool {
    doc_len >= 1
        && doc_len <= MAX_DOCUMENT_TOKENS
        && summary_len >= 1
        && summary_len <= profile.summary_cap()
}

/// Drops over-long (or empty) examples, shuffles deterministically by seed,
/// and splits 95% train / 5% test.
pub fn filter_and_split(
    examples: Vec<Example>,
    profile: SummaryProfile,
    seed: u64,
) -> (Vec<Example>, Vec<Example>) {
    let mut survivors: Vec<Example> = examples
        .into_iter()
        .filter(|e| within_length_caps(e.document_ids.len(), e.summary_content_len(), profile))
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    survivors.shuffle(&mut rng);
    let n_test = survivors.len() / TEST_DENOMINATOR;
    let test = survivors.split_off(survivors.len() - n_test);
    (survivors, test)
}
