//! Perplexity and ROUGE evaluation of a trained model.

use serde::{Deserialize, Serialize};

use crate::analytics::{rouge_l_f1, rouge_n_f1};
use crate::corpus::{Example, EOS_ID};
use crate::model::InferenceModel;

use super::TrainError;

/// Evaluation summary; ROUGE on the 0–100 scale, perplexity ≥ 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub perplexity: f64,
    pub rouge_1: f64,
    pub rouge_2: f64,
    pub rouge_l: f64,
    pub examples: usize,
}

/// exp(mean per-target-token negative log-likelihood), teacher-forced,
/// un-smoothed, natural log. The terminating EOS counts as a target.
pub fn perplexity(model: &InferenceModel<f32>, examples: &[Example]) -> Result<f64, TrainError> {
    if examples.is_empty() {
        return Err(TrainError::EmptyEvalSet);
    }
    let mut nll = 0.0f64;
    let mut tokens = 0usize;
    for e in examples {
        for lp in model.target_log_probs(&e.document_ids, &e.summary_ids) {
            nll -= lp as f64;
            tokens += 1;
        }
    }
    Ok((nll / tokens as f64).exp())
}

/// Greedy-decodes every document and reports mean ROUGE-1/2/L F1 against
/// the gold summaries, plus perplexity.
pub fn evaluate(
    model: &InferenceModel<f32>,
    examples: &[Example],
    max_len: usize,
) -> Result<EvalReport, TrainError> {
    if examples.is_empty() {
        return Err(TrainError::EmptyEvalSet);
    }
    let mut sums = [0.0f64; 3];
    for e in examples {
        let decoded = model.greedy_decode(&e.document_ids, max_len);
        let reference = reference_content(&e.summary_ids);
        sums[0] += rouge_n_f1(&decoded, reference, 1).f1;
        sums[1] += rouge_n_f1(&decoded, reference, 2).f1;
        sums[2] += rouge_l_f1(&decoded, reference).f1;
    }
    let scale = 100.0 / examples.len() as f64;
    Ok(EvalReport {
        perplexity: perplexity(model, examples)?,
        rouge_1: sums[0] * scale,
        rouge_2: sums[1] * scale,
        rouge_l: sums[2] * scale,
        examples: examples.len(),
    })
}

/// Gold summary without the terminating EOS, for ROUGE comparison against
/// decoded ids (which never contain control tokens).
pub fn reference_content(summary_ids: &[usize]) -> &[usize] {
    match summary_ids.last() {
        Some(&id) if id == EOS_ID => &summary_ids[..summary_ids.len() - 1],
        _ => summary_ids,
    }
}
