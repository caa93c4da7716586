//! Frequency-ranked vocabulary with reserved control tokens.

use std::collections::HashMap;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use super::CorpusError;

/// Reserved control token ids.
pub const PAD_ID: usize = 0;
pub const UNK_ID: usize = 1;
pub const BOS_ID: usize = 2;
pub const EOS_ID: usize = 3;

/// Surface forms of the reserved tokens, in id order.
pub const RESERVED_TOKENS: [&str; 4] = ["<pad>", "<unk>", "<bos>", "<eos>"];

/// Default vocabulary budget (non-reserved entries).
pub const DEFAULT_VOCAB_BUDGET: usize = 15_000;

/// Bijective token ↔ id map. Ids are contiguous from 0; the first four are
/// the reserved control tokens, then corpus tokens in descending frequency
/// order (ties broken by earliest first occurrence).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    token_to_id: HashMap<String, usize>,
    id_to_token: Vec<String>,
}

impl Vocabulary {
    /// Builds from token lists, keeping the `v_max` most frequent tokens.
    pub fn build<'a, I, S>(corpus: I, v_max: usize) -> Result<Vocabulary, CorpusError>
    where
        I: IntoIterator<Item = S>,
        S: IntoIterator<Item = &'a String>,
    {
        if v_max < 1 {
            return Err(CorpusError::InvalidVocabBudget);
        }
        let mut stats: HashMap<&'a String, (u64, usize)> = HashMap::new();
        let mut position = 0usize;
        let mut any = false;
        for list in corpus {
            any = true;
            for token in list {
                let entry = stats.entry(token).or_insert((0, position));
                entry.0 += 1;
                position += 1;
            }
        }
        if !any {
            return Err(CorpusError::EmptyCorpus);
        }
        let mut ranked: Vec<(&String, (u64, usize))> = stats.into_iter().collect();
        ranked.sort_by(|a, b| b.1 .0.cmp(&a.1 .0).then(a.1 .1.cmp(&b.1 .1)));

        let mut vocab = Vocabulary::reserved_only();
        for (token, _) in ranked {
            if vocab.id_to_token.len() >= v_max + RESERVED_TOKENS.len() {
                break;
            }
            if vocab.token_to_id.contains_key(token.as_str()) {
                continue; // a literal reserved surface form in the corpus
            }
            vocab.push(token.clone());
        }
        Ok(vocab)
    }

    fn reserved_only() -> Vocabulary {
        let mut vocab = Vocabulary { token_to_id: HashMap::new(), id_to_token: Vec::new() };
        for t in RESERVED_TOKENS {
            vocab.push(t.to_string());
        }
        vocab
    }

    fn push(&mut self, token: String) {
        let id = self.id_to_token.len();
        self.token_to_id.insert(token.clone(), id);
        self.id_to_token.push(token);
    }

    /// Total size including the four reserved tokens.
    pub fn len(&self) -> usize {
        self.id_to_token.len()
    }

    pub fn is_empty(&self) -> bool {
        self.id_to_token.is_empty()
    }

    pub fn id(&self, token: &str) -> Option<usize> {
        self.token_to_id.get(token).copied()
    }

    pub fn token(&self, id: usize) -> Option<&str> {
        self.id_to_token.get(id).map(|s| s.as_str())
    }

    /// Token → id, with out-of-vocabulary tokens mapped to `<unk>`.
    pub fn encode(&self, tokens: &[String]) -> Vec<usize> {
        tokens
            .iter()
            .map(|t| self.token_to_id.get(t).copied().unwrap_or(UNK_ID))
            .collect()
    }

    /// Id → token; errors on ids outside the vocabulary.
    pub fn decode(&self, ids: &[usize]) -> Result<Vec<String>, CorpusError> {
        ids.iter()
            .map(|&id| {
                self.id_to_token
                    .get(id)
                    .cloned()
                    .ok_or(CorpusError::InvalidTokenId { id, vocab_size: self.id_to_token.len() })
            })
            .collect()
    }

    /// Writes one token per line; the file line number equals the token id,
    /// so the first four lines are the reserved literals.
    pub fn save(&self, path: &Path) -> Result<(), CorpusError> {
        let mut file = std::fs::File::create(path)?;
        for token in &self.id_to_token {
            writeln!(file, "{}", token)?;
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Vocabulary, CorpusError> {
        let reader = BufReader::new(std::fs::File::open(path)?);
        let mut vocab = Vocabulary { token_to_id: HashMap::new(), id_to_token: Vec::new() };
        for (line_no, line) in reader.lines().enumerate() {
            let token = line?;
            if line_no < RESERVED_TOKENS.len() && token != RESERVED_TOKENS[line_no] {
                return Err(CorpusError::MalformedRecord {
                    line: line_no + 1,
                    message: format!(
                        "vocabulary must start with the reserved tokens, found {:?}",
                        token
                    ),
                });
            }
            if vocab.token_to_id.contains_key(&token) {
                return Err(CorpusError::MalformedRecord {
                    line: line_no + 1,
                    message: format!("duplicate vocabulary token {:?}", token),
                });
            }
            vocab.push(token);
        }
        if vocab.len() < RESERVED_TOKENS.len() {
            return Err(CorpusError::MalformedRecord {
                line: vocab.len(),
                message: "vocabulary file is missing reserved tokens".to_string(),
            });
        }
        Ok(vocab)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn words(list: &[&str]) -> Vec<String> {
        list.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn frequency_order_with_first_occurrence_ties() {
        let corpus = vec![words(&["a", "a", "b"])];
        let vocab = Vocabulary::build(&corpus, 2).unwrap();
        assert_eq!(vocab.id("a"), Some(4));
        assert_eq!(vocab.id("b"), Some(5));
        assert_eq!(vocab.len(), 6);
    }

    #[test]
    fn budget_caps_vocab_size() {
        let corpus = vec![words(&["a", "b", "c", "d", "a", "b", "c", "a", "b"])];
        let vocab = Vocabulary::build(&corpus, 2).unwrap();
        assert_eq!(vocab.len(), 2 + RESERVED_TOKENS.len());
        assert_eq!(vocab.id("a"), Some(4));
        assert_eq!(vocab.id("b"), Some(5));
        assert_eq!(vocab.id("c"), None);
    }

    #[test]
    fn oov_encodes_to_unk() {
        let corpus = vec![words(&["a"])];
        let vocab = Vocabulary::build(&corpus, 10).unwrap();
        assert_eq!(vocab.encode(&words(&["zzz-unseen"])), vec![UNK_ID]);
    }

    #[test]
    fn round_trip_is_identity_for_in_vocab() {
        let corpus = vec![words(&["the", "cat", "sat"])];
        let vocab = Vocabulary::build(&corpus, 10).unwrap();
        let sentence = words(&["the", "cat", "sat"]);
        let decoded = vocab.decode(&vocab.encode(&sentence)).unwrap();
        assert_eq!(decoded, sentence);
    }

    #[test]
    fn mixed_sentence_per_token_lookup() {
        let corpus = vec![words(&["the", "cat"])];
        let vocab = Vocabulary::build(&corpus, 10).unwrap();
        let ids = vocab.encode(&words(&["the", "dog", "cat"]));
        assert_eq!(ids, vec![vocab.id("the").unwrap(), UNK_ID, vocab.id("cat").unwrap()]);
        let decoded = vocab.decode(&ids).unwrap();
        assert_eq!(decoded, words(&["the", "<unk>", "cat"]));
    }

    #[test]
    fn decode_rejects_out_of_range_id() {
        let corpus = vec![words(&["a"])];
        let vocab = Vocabulary::build(&corpus, 10).unwrap();
        assert!(matches!(
            vocab.decode(&[99]),
            Err(CorpusError::InvalidTokenId { id: 99, .. })
        ));
    }

    #[test]
    fn ids_are_contiguous_bijection() {
        let corpus = vec![words(&["x", "y", "z", "x"])];
        let vocab = Vocabulary::build(&corpus, 100).unwrap();
        for id in 0..vocab.len() {
            let token = vocab.token(id).unwrap();
            assert_eq!(vocab.id(token), Some(id));
        }
    }

    #[test]
    fn save_load_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("vocab.txt");
        let corpus = vec![words(&["alpha", "beta", "alpha"])];
        let vocab = Vocabulary::build(&corpus, 10).unwrap();
        vocab.save(&path).unwrap();
        let loaded = Vocabulary::load(&path).unwrap();
        assert_eq!(vocab, loaded);
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("<pad>\n<unk>\n<bos>\n<eos>\nalpha\nbeta\n"));
    }
}
