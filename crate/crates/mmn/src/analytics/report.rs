//! Corpus-level bias report: Lead / Ext-Oracle ROUGE, novel n-gram ratios,
//! bigram location histogram, and abstractive-vs-extractive ratios.

use serde::{Deserialize, Serialize};

use crate::corpus::TokenizedExample;

use super::location::{LocationAccumulator, LocationHistogram};
use super::ngrams::novel_ngram_ratio;
use super::rouge::{rouge_l_f1, rouge_n_f1};
use super::sentences::{ext_oracle, lead_baseline, sentence_split};
use super::AnalyticsError;

/// ROUGE-1/2/L F1 on the conventional 0–100 scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RougeTriple {
    pub rouge_1: f64,
    pub rouge_2: f64,
    pub rouge_l: f64,
}

/// Ratios of an external abstractive system's ROUGE-L to the extractive
/// baselines computed here.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AbstractiveRatios {
    pub external_rouge_l: f64,
    pub pg_lead: f64,
    pub pg_oracle: f64,
}

/// Aggregated abstractiveness diagnostics for one corpus split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiasReport {
    pub documents: usize,
    pub lead: RougeTriple,
    pub ext_oracle: RougeTriple,
    /// Mean novel n-gram percentage for n = 1..=4 (undefined documents are
    /// skipped per n).
    pub novel_ngram_pct: Vec<f64>,
    pub histogram: LocationHistogram,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ratios: Option<AbstractiveRatios>,
}

/// Ratio of an abstractive system's score to the two extractive baselines.
pub fn abstractive_ratios(
    external_rouge_l: f64,
    lead_rouge_l: f64,
    oracle_rouge_l: f64,
) -> AbstractiveRatios {
    AbstractiveRatios {
        external_rouge_l,
        pg_lead: external_rouge_l / lead_rouge_l,
        pg_oracle: external_rouge_l / oracle_rouge_l,
    }
}

/// Computes the full bias report over tokenized (document, summary) pairs.
///
/// Lead-1 and Ext-Oracle(k=1) run per document on its sentence split; the
/// histogram pools every bigram match across the corpus. When an external
/// abstractive ROUGE-L is supplied, the Lead and Oracle ratio fields are
/// populated from the corpus means computed here.
pub fn bias_report(
    corpus: &[TokenizedExample],
    bins: usize,
    external_rouge_l: Option<f64>,
) -> Result<BiasReport, AnalyticsError> {
    if corpus.is_empty() {
        return Err(AnalyticsError::EmptyCorpus);
    }
    let mut lead_sum = [0.0f64; 3];
    let mut oracle_sum = [0.0f64; 3];
    let mut novel_sum = [0.0f64; 4];
    let mut novel_count = [0usize; 4];
    let mut histogram = LocationAccumulator::new(bins);
    let mut scored = 0usize;

    for example in corpus {
        let text = example.document.join(" ");
        let sentences = sentence_split(&text);
        if sentences.is_empty() || example.summary.is_empty() {
            continue;
        }
        scored += 1;
        let reference = &example.summary;

        let lead = lead_baseline(&sentences, 1)?;
        lead_sum[0] += rouge_n_f1(&lead, reference, 1).f1;
        lead_sum[1] += rouge_n_f1(&lead, reference, 2).f1;
        lead_sum[2] += rouge_l_f1(&lead, reference).f1;

        let oracle = ext_oracle(&sentences, reference, 1)?;
        oracle_sum[0] += rouge_n_f1(&oracle.tokens, reference, 1).f1;
        oracle_sum[1] += rouge_n_f1(&oracle.tokens, reference, 2).f1;
        oracle_sum[2] += rouge_l_f1(&oracle.tokens, reference).f1;

        for n in 1..=4 {
            if let Some(ratio) = novel_ngram_ratio(&example.document, reference, n) {
                novel_sum[n - 1] += ratio;
                novel_count[n - 1] += 1;
            }
        }
        histogram.record(&example.document, reference);
    }
    if scored == 0 {
        return Err(AnalyticsError::EmptyCorpus);
    }

    let scale = 100.0 / scored as f64;
    let lead = RougeTriple {
        rouge_1: lead_sum[0] * scale,
        rouge_2: lead_sum[1] * scale,
        rouge_l: lead_sum[2] * scale,
    };
    let oracle = RougeTriple {
        rouge_1: oracle_sum[0] * scale,
        rouge_2: oracle_sum[1] * scale,
        rouge_l: oracle_sum[2] * scale,
    };
    let novel_ngram_pct = (0..4)
        .map(|i| {
            if novel_count[i] > 0 {
                100.0 * novel_sum[i] / novel_count[i] as f64
            } else {
                0.0
            }
        })
        .collect();
    let ratios = external_rouge_l.map(|ext| abstractive_ratios(ext, lead.rouge_l, oracle.rouge_l));
    Ok(BiasReport {
        documents: scored,
        lead,
        ext_oracle: oracle,
        novel_ngram_pct,
        histogram: histogram.finish(),
        ratios,
    })
}

/// Renders the histogram as `(bin_start, density)` CSV rows.
pub fn histogram_csv(histogram: &LocationHistogram) -> String {
    let mut out = String::from("bin_start,density\n");
    for (start, density) in histogram.bin_starts.iter().zip(&histogram.densities) {
        out.push_str(&format!("{},{}\n", start, density));
    }
    out
}
