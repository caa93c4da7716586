//! Corpus preprocessing: normalization, tokenization, summary-prefix
//! trimming, vocabulary construction, length filtering and splitting.

pub mod io;
pub mod normalize;
pub mod split;
pub mod tokenize;
pub mod vocab;

pub use io::{read_examples, read_posts, write_examples, RawPost};
pub use normalize::{normalize_text, trim_summary_prefix};
pub use split::{
    filter_and_split, within_length_caps, Example, SummaryProfile, MAX_DOCUMENT_TOKENS,
};
pub use tokenize::tokenize;
pub use vocab::{Vocabulary, BOS_ID, DEFAULT_VOCAB_BUDGET, EOS_ID, PAD_ID, UNK_ID};

/// A post after normalization and tokenization, before id encoding.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenizedExample {
    pub id: String,
    pub document: Vec<String>,
    pub summary: Vec<String>,
}

/// Normalizes and tokenizes one post under a profile. `Short` summarizes
/// with the title, `Long` with the TL;DR line (posts lacking one are
/// skipped). The summary side additionally has its conventional prefixes
/// trimmed.
pub fn prepare_post(post: &RawPost, profile: SummaryProfile) -> Option<TokenizedExample> {
    let summary_text = match profile {
        SummaryProfile::Short => post.title.as_str(),
        SummaryProfile::Long => post.tldr.as_deref()?,
    };
    let document = tokenize(&normalize_text(&post.body));
    let summary = tokenize(&trim_summary_prefix(&normalize_text(summary_text)));
    Some(TokenizedExample { id: post.id.clone(), document, summary })
}

/// Full preprocessing pipeline: prepare, length-filter, build the
/// vocabulary over the surviving examples, encode, then shuffle and split.
pub fn preprocess(
    posts: &[RawPost],
    profile: SummaryProfile,
    vocab_budget: usize,
    seed: u64,
) -> Result<(Vec<Example>, Vec<Example>, Vocabulary), CorpusError> {
    let tokenized: Vec<TokenizedExample> = posts
        .iter()
        .filter_map(|p| prepare_post(p, profile))
        .filter(|t| within_length_caps(t.document.len(), t.summary.len(), profile))
        .collect();
    if tokenized.is_empty() {
        return Err(CorpusError::EmptyCorpus);
    }
    let vocab = Vocabulary::build(
        tokenized.iter().flat_map(|t| [&t.document, &t.summary]),
        vocab_budget,
    )?;
    let examples: Vec<Example> = tokenized
        .iter()
        .map(|t| Example {
            id: t.id.clone(),
            document_ids: vocab.encode(&t.document),
            summary_ids: {
                let mut ids = vocab.encode(&t.summary);
                ids.push(EOS_ID);
                ids
            },
        })
        .collect();
    let (train, test) = filter_and_split(examples, profile, seed);
    Ok((train, test, vocab))
}

/// Corpus-stage failures.
#[derive(Debug)]
pub enum CorpusError {
    Io(std::io::Error),
    MalformedRecord { line: usize, message: String },
    EmptyCorpus,
    InvalidVocabBudget,
    InvalidTokenId { id: usize, vocab_size: usize },
    Serialize(String),
}

impl std::fmt::Display for CorpusError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CorpusError::Io(e) => write!(f, "io error: {}", e),
            CorpusError::MalformedRecord { line, message } => {
                write!(f, "malformed record at line {}: {}", line, message)
            }
            CorpusError::EmptyCorpus => write!(f, "no usable examples in the corpus"),
            CorpusError::InvalidVocabBudget => write!(f, "vocabulary budget must be at least 1"),
            CorpusError::InvalidTokenId { id, vocab_size } => {
                write!(f, "token id {} outside vocabulary of size {}", id, vocab_size)
            }
            CorpusError::Serialize(msg) => write!(f, "serialization failed: {}", msg),
        }
    }
}

impl std::error::Error for CorpusError {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            CorpusError::Io(e) => Some(e),
            _ => None,
        }
    }
}

impl From<std::io::Error> for CorpusError {
    fn from(e: std::io::Error) -> Self {
        CorpusError::Io(e)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn post(id: &str, body: &str, title: &str, tldr: Option<&str>) -> RawPost {
        RawPost {
            id: id.to_string(),
            body: body.to_string(),
            title: title.to_string(),
            tldr: tldr.map(|s| s.to_string()),
        }
    }

    #[test]
    fn short_profile_uses_title_long_uses_tldr() {
        let p = post("p1", "i fell down the stairs today.", "TIFU by falling", Some("TL;DR: i fell"));
        let short = prepare_post(&p, SummaryProfile::Short).unwrap();
        assert_eq!(short.summary, vec!["falling"]);
        let long = prepare_post(&p, SummaryProfile::Long).unwrap();
        assert_eq!(long.summary, vec!["i", "fell"]);
    }

    #[test]
    fn long_profile_skips_posts_without_tldr() {
        let p = post("p1", "body", "title", None);
        assert!(prepare_post(&p, SummaryProfile::Long).is_none());
    }

    #[test]
    fn pipeline_produces_consistent_ids() {
        let posts: Vec<RawPost> = (0..40)
            .map(|i| {
                post(
                    &format!("p{}", i),
                    &format!("document number {} has several words in it.", i),
                    &format!("summary {}", i),
                    None,
                )
            })
            .collect();
        let (train, test, vocab) = preprocess(&posts, SummaryProfile::Short, 100, 13).unwrap();
        assert_eq!(train.len() + test.len(), 40);
        assert_eq!(test.len(), 2);
        for e in train.iter().chain(&test) {
            assert!(e.document_ids.iter().all(|&id| id < vocab.len()));
            assert!(e.summary_ids.iter().all(|&id| id < vocab.len()));
            assert_eq!(*e.summary_ids.last().unwrap(), EOS_ID);
        }
    }

    #[test]
    fn pipeline_drops_empty_documents_and_summaries() {
        let posts = vec![
            post("empty-doc", "", "a summary", None),
            post("empty-summary", "a body with words", "", None),
            post("ok", "a body with words", "a summary", None),
        ];
        let (train, test, _) = preprocess(&posts, SummaryProfile::Short, 100, 13).unwrap();
        let ids: Vec<&str> = train.iter().chain(&test).map(|e| e.id.as_str()).collect();
        assert_eq!(ids, vec!["ok"]);
    }
}
