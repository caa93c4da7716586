//! Tokenized F1 ROUGE, implemented from scratch (no stemming, no stopword
//! removal).

use std::collections::HashMap;
use std::hash::Hash;

/// Precision / recall / F1, each in [0, 1].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RougeScore {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl RougeScore {
    fn from_pr(precision: f64, recall: f64) -> RougeScore {
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        RougeScore { precision, recall, f1 }
    }

    const ZERO: RougeScore = RougeScore { precision: 0.0, recall: 0.0, f1: 0.0 };
}

/// ROUGE-N: n-gram overlap counted with clipped multiplicity.
pub fn rouge_n_f1<T: Eq + Hash>(candidate: &[T], reference: &[T], n: usize) -> RougeScore {
    assert!(n >= 1, "rouge_n_f1: n must be at least 1");
    let cand_total = candidate.len().saturating_sub(n - 1);
    let ref_total = reference.len().saturating_sub(n - 1);
    if cand_total == 0 || ref_total == 0 {
        return RougeScore::ZERO;
    }
    let mut ref_counts: HashMap<&[T], usize> = HashMap::new();
    for gram in reference.windows(n) {
        *ref_counts.entry(gram).or_insert(0) += 1;
    }
    let mut overlap = 0usize;
    for gram in candidate.windows(n) {
        if let Some(count) = ref_counts.get_mut(gram) {
            if *count > 0 {
                *count -= 1;
                overlap += 1;
            }
        }
    }
    RougeScore::from_pr(overlap as f64 / cand_total as f64, overlap as f64 / ref_total as f64)
}

/// ROUGE-L: longest common subsequence against sequence lengths.
pub fn rouge_l_f1<T: Eq>(candidate: &[T], reference: &[T]) -> RougeScore {
    if candidate.is_empty() || reference.is_empty() {
        return RougeScore::ZERO;
    }
    let lcs = lcs_length(candidate, reference) as f64;
    RougeScore::from_pr(lcs / candidate.len() as f64, lcs / reference.len() as f64)
}

/// Standard O(n·m) dynamic program over prefix pairs.
fn lcs_length<T: Eq>(a: &[T], b: &[T]) -> usize {
    let m = b.len();
    let mut prev = vec![0usize; m + 1];
    let mut curr = vec![0usize; m + 1];
    for ai in a {
        for (j, bj) in b.iter().enumerate() {
            curr[j + 1] = if ai == bj {
                prev[j] + 1
            } else {
                prev[j + 1].max(curr[j])
            };
        }
        std::mem::swap(&mut prev, &mut curr);
    }
    prev[m]
}

#[cfg(test)]
mod tests {
    use super::*;

    fn words(s: &str) -> Vec<&str> {
        s.split_whitespace().collect()
    }

    #[test]
    fn identical_sequences_score_one() {
        let t = words("the cat sat on the mat");
        assert_eq!(rouge_n_f1(&t, &t, 1).f1, 1.0);
        assert_eq!(rouge_n_f1(&t, &t, 2).f1, 1.0);
        assert_eq!(rouge_l_f1(&t, &t).f1, 1.0);
    }

    #[test]
    fn disjoint_sequences_score_zero() {
        let a = words("alpha beta gamma");
        let b = words("delta epsilon zeta");
        assert_eq!(rouge_n_f1(&a, &b, 1).f1, 0.0);
        assert_eq!(rouge_l_f1(&a, &b).f1, 0.0);
    }

    #[test]
    fn unigram_two_thirds_example() {
        // brute-force n-gram count oracle: overlap {the, cat} = 2 of 3
        let cand = words("the cat sat");
        let reference = words("the cat ran");
        let s = rouge_n_f1(&cand, &reference, 1);
        assert!((s.precision - 2.0 / 3.0).abs() < 1e-12);
        assert!((s.recall - 2.0 / 3.0).abs() < 1e-12);
        assert!((s.f1 - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn clipped_multiplicity() {
        // "a a a" vs "a a": overlap clips at 2
        let cand = words("a a a");
        let reference = words("a a");
        let s = rouge_n_f1(&cand, &reference, 1);
        assert!((s.precision - 2.0 / 3.0).abs() < 1e-12);
        assert!((s.recall - 1.0).abs() < 1e-12);
    }

    #[test]
    fn lcs_half_overlap_example() {
        // exhaustive LCS oracle gives 2 for these
        let cand = words("a b c d");
        let reference = words("a x c y");
        let s = rouge_l_f1(&cand, &reference);
        assert_eq!(s.precision, 0.5);
        assert_eq!(s.recall, 0.5);
        assert_eq!(s.f1, 0.5);
    }

    #[test]
    fn empty_candidate_scores_zero() {
        let reference = words("something here");
        assert_eq!(rouge_l_f1::<&str>(&[], &reference).f1, 0.0);
        assert_eq!(rouge_n_f1::<&str>(&[], &reference, 1).f1, 0.0);
    }

    #[test]
    fn f1_is_symmetric_under_swap() {
        let a = words("the quick brown fox jumps");
        let b = words("a quick red fox leaps high");
        assert!((rouge_n_f1(&a, &b, 2).f1 - rouge_n_f1(&b, &a, 2).f1).abs() < 1e-12);
        assert!((rouge_l_f1(&a, &b).f1 - rouge_l_f1(&b, &a).f1).abs() < 1e-12);
    }

    #[test]
    fn short_reference_handles_n_larger_than_len() {
        let cand = words("a b c");
        let reference = words("a");
        assert_eq!(rouge_n_f1(&cand, &reference, 2), RougeScore::ZERO);
    }
}
