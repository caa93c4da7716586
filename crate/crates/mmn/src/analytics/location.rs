//! Where in the source document the gold summary's bigrams occur.

use std::collections::HashSet;
use std::hash::Hash;

use serde::{Deserialize, Serialize};

/// Density histogram over relative match locations in [0, 1).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocationHistogram {
    /// Left edge of each bin; bins have equal width `1 / len`.
    pub bin_starts: Vec<f64>,
    /// Fraction of matches per bin; sums to 1 when any bigram matched.
    pub densities: Vec<f64>,
    /// Total number of recorded match positions.
    pub matches: usize,
}

impl LocationHistogram {
    pub fn empty(bins: usize) -> LocationHistogram {
        LocationHistogram {
            bin_starts: (0..bins).map(|b| b as f64 / bins as f64).collect(),
            densities: vec![0.0; bins],
            matches: 0,
        }
    }

    /// True when no reference bigram matched the document.
    pub fn is_empty(&self) -> bool {
        self.matches == 0
    }

    pub fn bins(&self) -> usize {
        self.densities.len()
    }
}

/// Accumulates match positions across documents before normalizing.
#[derive(Debug, Clone)]
pub struct LocationAccumulator {
    counts: Vec<usize>,
}

impl LocationAccumulator {
    pub fn new(bins: usize) -> LocationAccumulator {
        assert!(bins >= 1, "histogram needs at least one bin");
        LocationAccumulator { counts: vec![0; bins] }
    }

    /// Records every document position whose bigram appears in the reference,
    /// normalized by `(first token index) / (|doc| − 1)`.
    pub fn record<T: Eq + Hash>(&mut self, document: &[T], reference: &[T]) {
        if document.len() < 2 || reference.len() < 2 {
            return;
        }
        let ref_bigrams: HashSet<&[T]> = reference.windows(2).collect();
        let bins = self.counts.len();
        let denom = (document.len() - 1) as f64;
        for (i, gram) in document.windows(2).enumerate() {
            if ref_bigrams.contains(gram) {
                let pos = i as f64 / denom;
                let bin = ((pos * bins as f64) as usize).min(bins - 1);
                self.counts[bin] += 1;
            }
        }
    }

    pub fn finish(self) -> LocationHistogram {
        let bins = self.counts.len();
        let total: usize = self.counts.iter().sum();
        let mut hist = LocationHistogram::empty(bins);
        hist.matches = total;
        if total > 0 {
            for (d, &c) in hist.densities.iter_mut().zip(&self.counts) {
                *d = c as f64 / total as f64;
            }
        }
        hist
    }
}

/// Single-document histogram of reference-bigram locations.
pub fn bigram_location_density<T: Eq + Hash>(
    document: &[T],
    reference: &[T],
    bins: usize,
) -> LocationHistogram {
    let mut acc = LocationAccumulator::new(bins);
    acc.record(document, reference);
    acc.finish()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn words(s: &str) -> Vec<&str> {
        s.split_whitespace().collect()
    }

    #[test]
    fn match_at_start_lands_in_bin_zero() {
        let doc = words("key phrase then other words follow here");
        let reference = words("the key phrase");
        let hist = bigram_location_density(&doc, &reference, 20);
        assert_eq!(hist.matches, 1);
        assert_eq!(hist.densities[0], 1.0);
        assert!((hist.densities.iter().sum::<f64>() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn midpoint_match_lands_in_middle_bin() {
        // index arithmetic: doc of 101 tokens, match at index 50 -> 50/100 = 0.5
        let mut doc: Vec<String> = (0..101).map(|i| format!("w{}", i)).collect();
        doc[50] = "hit".to_string();
        doc[51] = "pair".to_string();
        let reference: Vec<String> = vec!["hit".to_string(), "pair".to_string()];
        let hist = bigram_location_density(&doc, &reference, 20);
        assert_eq!(hist.matches, 1);
        // 0.5 * 20 = bin 10
        assert_eq!(hist.densities[10], 1.0);
    }

    #[test]
    fn no_matches_sets_empty_flag() {
        let doc = words("a b c d");
        let reference = words("x y z");
        let hist = bigram_location_density(&doc, &reference, 20);
        assert!(hist.is_empty());
        assert_eq!(hist.densities.iter().sum::<f64>(), 0.0);
    }

    #[test]
    fn every_match_position_contributes() {
        let doc = words("a b c a b");
        let reference = words("a b");
        let hist = bigram_location_density(&doc, &reference, 4);
        assert_eq!(hist.matches, 2);
        assert!((hist.densities.iter().sum::<f64>() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn accumulator_pools_documents() {
        let mut acc = LocationAccumulator::new(2);
        acc.record(&words("x y a a"), &words("x y"));
        acc.record(&words("a a x y"), &words("x y"));
        let hist = acc.finish();
        assert_eq!(hist.matches, 2);
        assert_eq!(hist.densities, vec![0.5, 0.5]);
    }
}
