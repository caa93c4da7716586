//! Summarization metrics and corpus-bias diagnostics.

pub mod location;
pub mod ngrams;
pub mod report;
pub mod rouge;
pub mod sentences;

pub use location::{bigram_location_density, LocationAccumulator, LocationHistogram};
pub use ngrams::novel_ngram_ratio;
pub use report::{abstractive_ratios, bias_report, histogram_csv, AbstractiveRatios, BiasReport, RougeTriple};
pub use rouge::{rouge_l_f1, rouge_n_f1, RougeScore};
pub use sentences::{ext_oracle, lead_baseline, mean_rouge_f1, sentence_split, ExtOracle};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AnalyticsError {
    EmptyCorpus,
    EmptyDocument,
}

impl std::fmt::Display for AnalyticsError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            AnalyticsError::EmptyCorpus => write!(f, "corpus has no scorable documents"),
            AnalyticsError::EmptyDocument => write!(f, "document has no sentences"),
        }
    }
}

impl std::error::Error for AnalyticsError {}
