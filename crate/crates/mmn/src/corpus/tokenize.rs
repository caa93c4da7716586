//! Rule-based word tokenizer.
//!
//! Splits on whitespace, detaches leading/trailing punctuation as single
//! tokens, and splits English contractions at the apostrophe ("don't" →
//! "do" + "n't"). Word-internal punctuation ("tl;dr", "0.0") stays put, and
//! '@' counts as a word character so the `@subreddit` / `@userid`
//! placeholders survive intact.

/// Suffix contractions split off as their own token.
const APOSTROPHE_SUFFIXES: [&str; 6] = ["'s", "'re", "'ve", "'ll", "'d", "'m"];

fn is_word_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '@'
}

pub fn tokenize(text: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    for chunk in text.split_whitespace() {
        let chars: Vec<char> = chunk.chars().collect();
        let mut start = 0;
        let mut end = chars.len();
        while start < end && !is_word_char(chars[start]) {
            tokens.push(chars[start].to_string());
            start += 1;
        }
        let mut trailing = Vec::new();
        while end > start && !is_word_char(chars[end - 1]) && chars[end - 1] != '\'' {
            trailing.push(chars[end - 1].to_string());
            end -= 1;
        }
        if end > start {
            let core: String = chars[start..end].iter().collect();
            split_contraction(&core, &mut tokens);
        }
        tokens.extend(trailing.into_iter().rev());
    }
    tokens
}

fn split_contraction(core: &str, tokens: &mut Vec<String>) {
    if !core.is_ascii() {
        // only normalized (ASCII) text gets contraction treatment
        tokens.push(core.to_string());
        return;
    }
    let lower = core.to_lowercase();
    if lower.len() > 3 && lower.ends_with("n't") {
        tokens.push(core[..core.len() - 3].to_string());
        tokens.push(core[core.len() - 3..].to_string());
        return;
    }
    for suffix in APOSTROPHE_SUFFIXES {
        if lower.len() > suffix.len() && lower.ends_with(suffix) {
            tokens.push(core[..core.len() - suffix.len()].to_string());
            tokens.push(core[core.len() - suffix.len()..].to_string());
            return;
        }
    }
    // strip a dangling trailing apostrophe ("dogs'" -> "dogs" + "'")
    if let Some(stripped) = core.strip_suffix('\'') {
        if !stripped.is_empty() {
            tokens.push(stripped.to_string());
        }
        tokens.push("'".to_string());
        return;
    }
    tokens.push(core.to_string());
}
