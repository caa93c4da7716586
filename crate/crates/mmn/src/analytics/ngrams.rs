//! Novel n-gram ratio: how much of the reference summary is absent from the
//! source document.

use std::collections::HashSet;
use std::hash::Hash;

/// Fraction of reference n-grams (with multiplicity) that never occur in the
/// document. Returns `None` when the reference is shorter than `n`, which
/// leaves the ratio undefined.
pub fn novel_ngram_ratio<T: Eq + Hash>(
    document: &[T],
    reference: &[T],
    n: usize,
) -> Option<f64> {
    assert!(n >= 1, "novel_ngram_ratio: n must be at least 1");
    if reference.len() < n {
        return None;
    }
    let doc_grams: HashSet<&[T]> = document.windows(n).collect();
    let total = reference.len() - n + 1;
    let novel = reference
        .windows(n)
        .filter(|gram| !doc_grams.contains(*gram))
        .count();
    Some(novel as f64 / total as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn words(s: &str) -> Vec<&str> {
        s.split_whitespace().collect()
    }

    #[test]
    fn contiguous_substring_has_no_novelty() {
        let doc = words("a b c d e f");
        let reference = words("c d e");
        for n in 1..=3 {
            assert_eq!(novel_ngram_ratio(&doc, &reference, n), Some(0.0));
        }
    }

    #[test]
    fn disjoint_vocabulary_is_fully_novel() {
        let doc = words("a b c");
        let reference = words("x y z");
        for n in 1..=3 {
            assert_eq!(novel_ngram_ratio(&doc, &reference, n), Some(1.0));
        }
    }

    #[test]
    fn half_novel_bigram_example() {
        // set-membership oracle: bigrams {a b, b x}; "a b" present, "b x" novel
        let doc = words("a b c d");
        let reference = words("a b x");
        assert_eq!(novel_ngram_ratio(&doc, &reference, 2), Some(0.5));
    }

    #[test]
    fn short_reference_is_undefined() {
        let doc = words("a b c");
        let reference = words("a");
        assert_eq!(novel_ngram_ratio(&doc, &reference, 2), None);
    }

    #[test]
    fn multiplicity_counts_on_reference_side() {
        // "x" appears twice in the reference; doc lacks it -> 2/3 novel
        let doc = words("a b");
        let reference = words("x a x");
        let r = novel_ngram_ratio(&doc, &reference, 1).unwrap();
        assert!((r - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn adding_reference_to_document_drives_ratio_to_zero() {
        let reference = words("p q r");
        let mut doc = words("a b c");
        assert_eq!(novel_ngram_ratio(&doc, &reference, 2), Some(1.0));
        doc.extend(&reference);
        assert_eq!(novel_ngram_ratio(&doc, &reference, 2), Some(0.0));
    }
}
