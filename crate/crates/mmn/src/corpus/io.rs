//! Line-delimited JSON corpus files.

use std::collections::HashSet;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::split::Example;
use super::CorpusError;

/// One crawled post. The wire field for the body text is `"document"`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RawPost {
    pub id: String,
    #[serde(rename = "document")]
    pub body: String,
    pub title: String,
    pub tldr: Option<String>,
}

/// Reads a corpus of one JSON record per line, validating that ids are
/// non-empty and unique. Parse failures report the 1-based line number.
pub fn read_posts(path: &Path) -> Result<Vec<RawPost>, CorpusError> {
    let reader = BufReader::new(std::fs::File::open(path)?);
    let mut posts = Vec::new();
    let mut seen = HashSet::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let post: RawPost = serde_json::from_str(&line).map_err(|e| {
            CorpusError::MalformedRecord { line: idx + 1, message: e.to_string() }
        })?;
        if post.id.is_empty() {
            return Err(CorpusError::MalformedRecord {
                line: idx + 1,
                message: "empty post id".to_string(),
            });
        }
        if !seen.insert(post.id.clone()) {
            return Err(CorpusError::MalformedRecord {
                line: idx + 1,
                message: format!("duplicate post id {:?}", post.id),
            });
        }
        posts.push(post);
    }
    Ok(posts)
}

/// Writes one encoded example per line.
pub fn write_examples(path: &Path, examples: &[Example]) -> Result<(), CorpusError> {
    let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
    for example in examples {
        serde_json::to_writer(&mut file, example)
            .map_err(|e| CorpusError::Serialize(e.to_string()))?;
        file.write_all(b"\n")?;
    }
    file.flush()?;
    Ok(())
}

pub fn read_examples(path: &Path) -> Result<Vec<Example>, CorpusError> {
    let reader = BufReader::new(std::fs::File::open(path)?);
    let mut examples = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let example: Example = serde_json::from_str(&line).map_err(|e| {
            CorpusError::MalformedRecord { line: idx + 1, message: e.to_string() }
        })?;
        examples.push(example);
    }
    Ok(examples)
}
