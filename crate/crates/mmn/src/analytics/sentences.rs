//! Sentence splitting plus the Lead and Ext-Oracle extractive baselines.

use crate::corpus::tokenize;

use super::rouge::{rouge_l_f1, rouge_n_f1};
use super::AnalyticsError;

/// Splits normalized text on terminal punctuation (`.`, `!`, `?`) followed
/// by whitespace. Runs of terminal punctuation stay attached to their
/// sentence; trailing text without a terminator forms the last sentence.
pub fn sentence_split(text: &str) -> Vec<String> {
    let chars: Vec<char> = text.chars().collect();
    let mut sentences = Vec::new();
    let mut start = 0;
    let mut i = 0;
    while i < chars.len() {
        if matches!(chars[i], '.' | '!' | '?') {
            // absorb the whole punctuation run
            let mut end = i + 1;
            while end < chars.len() && matches!(chars[end], '.' | '!' | '?') {
                end += 1;
            }
            if end >= chars.len() || chars[end].is_whitespace() {
                let sentence: String = chars[start..end].iter().collect();
                let sentence = sentence.trim();
                if !sentence.is_empty() {
                    sentences.push(sentence.to_string());
                }
                start = end;
            }
            i = end;
        } else {
            i += 1;
        }
    }
    if start < chars.len() {
        let tail: String = chars[start..].iter().collect();
        let tail = tail.trim();
        if !tail.is_empty() {
            sentences.push(tail.to_string());
        }
    }
    sentences
}

/// Lead-k baseline: the first `k` sentences, tokenized.
pub fn lead_baseline(sentences: &[String], k: usize) -> Result<Vec<String>, AnalyticsError> {
    if sentences.is_empty() {
        return Err(AnalyticsError::EmptyDocument);
    }
    let take = k.min(sentences.len());
    Ok(tokenize(&sentences[..take].join(" ")))
}

/// Extractive-oracle selection.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtOracle {
    /// Indices of the chosen sentences, in document order.
    pub selected: Vec<usize>,
    /// Tokenized concatenation of the chosen sentences.
    pub tokens: Vec<String>,
    /// Mean of ROUGE-1/2/L F1 against the reference.
    pub score: f64,
}

/// Mean of F1 ROUGE-1/2/L; the Ext-Oracle selection criterion.
pub fn mean_rouge_f1(candidate: &[String], reference: &[String]) -> f64 {
    let r1 = rouge_n_f1(candidate, reference, 1).f1;
    let r2 = rouge_n_f1(candidate, reference, 2).f1;
    let rl = rouge_l_f1(candidate, reference).f1;
    (r1 + r2 + rl) / 3.0
}

/// Best extractive summary: for `k = 1` the single sentence maximizing mean
/// ROUGE-1/2/L F1 (ties to the earliest sentence); for `k > 1` greedy
/// forward selection, stopping early once no addition improves the mean.
pub fn ext_oracle(
    sentences: &[String],
    reference: &[String],
    k: usize,
) -> Result<ExtOracle, AnalyticsError> {
    if sentences.is_empty() {
        return Err(AnalyticsError::EmptyDocument);
    }
    let tokenized: Vec<Vec<String>> = sentences.iter().map(|s| tokenize(s)).collect();
    let mut selected: Vec<usize> = Vec::new();
    let mut best_score = f64::NEG_INFINITY;
    for _ in 0..k.max(1) {
        let mut round_best: Option<(usize, f64)> = None;
        for idx in 0..sentences.len() {
            if selected.contains(&idx) {
                continue;
            }
            let mut trial = selected.clone();
            trial.push(idx);
            trial.sort_unstable();
            let candidate = concat_tokens(&tokenized, &trial);
            let score = mean_rouge_f1(&candidate, reference);
            let better = match round_best {
                None => true,
                Some((_, s)) => score > s,
            };
            if better {
                round_best = Some((idx, score));
            }
        }
        match round_best {
            Some((idx, score)) if score > best_score => {
                selected.push(idx);
                selected.sort_unstable();
                best_score = score;
            }
            _ => break,
        }
    }
    let tokens = concat_tokens(&tokenized, &selected);
    Ok(ExtOracle { selected, tokens, score: best_score })
}

fn concat_tokens(tokenized: &[Vec<String>], indices: &[usize]) -> Vec<String> {
    indices.iter().flat_map(|&i| tokenized[i].iter().cloned()).collect()
}
