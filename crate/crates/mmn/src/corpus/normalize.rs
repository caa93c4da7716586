//! Text normalization for crawled forum posts.
//!
//! The pipeline is deliberately rule-based and idempotent: markdown markup
//! is stripped, URLs and non-ASCII bytes dropped, everything lowercased,
//! digits collapsed to '0', and subreddit/user references replaced with
//! `@subreddit` / `@userid` placeholder tokens.

use std::sync::OnceLock;

use regex::Regex;

fn re(cache: &'static OnceLock<Regex>, pattern: &str) -> &'static Regex {
    cache.get_or_init(|| Regex::new(pattern).expect("static regex"))
}

macro_rules! static_re {
    ($name:ident, $pattern:expr) => {
        fn $name() -> &'static Regex {
            static CACHE: OnceLock<Regex> = OnceLock::new();
            re(&CACHE, $pattern)
        }
    };
}

static_re!(re_image, r"!\[([^\]]*)\]\(([^)]*)\)");
static_re!(re_link, r"\[([^\]]*)\]\(([^)]*)\)");
static_re!(re_url, r"(?i)(?:https?://|www\.)[^\s]+");
static_re!(re_ordered_list, r"^\d+[.)]\s+");
static_re!(re_subreddit, r"(^|[^a-z0-9_@/])/?r/[a-z0-9_]+");
static_re!(re_userid, r"(^|[^a-z0-9_@/])/?u/[a-z0-9_]+");

/// Normalizes one raw text field. Idempotent; the output contains only
/// lowercase ASCII, with every digit as '0'.
pub fn normalize_text(raw: &str) -> String {
    let text = strip_markdown(raw);
    let text = re_url().replace_all(&text, " ");
    let text: String = text.chars().filter(|c| c.is_ascii()).collect();
    let text = text.to_lowercase();
    let text = re_subreddit().replace_all(&text, "${1}@subreddit");
    let text = re_userid().replace_all(&text, "${1}@userid");
    let text: String = text
        .chars()
        .map(|c| if c.is_ascii_digit() { '0' } else { c })
        .collect();
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// CommonMark-subset stripper: headers, blockquotes, list markers, fences,
/// horizontal rules, links/images, and emphasis/code markup characters.
fn strip_markdown(raw: &str) -> String {
    let mut lines = Vec::new();
    for line in raw.lines() {
        let trimmed = line.trim_start();
        if trimmed.starts_with("```") || is_horizontal_rule(trimmed) {
            continue;
        }
        let mut rest = trimmed;
        // blockquote markers, possibly nested
        while let Some(r) = rest.strip_prefix('>') {
            rest = r.trim_start();
        }
        // ATX headers
        if rest.starts_with('#') {
            rest = rest.trim_start_matches('#').trim_start();
        }
        // unordered list markers ('*' is handled by emphasis stripping)
        if let Some(r) = rest.strip_prefix("- ").or_else(|| rest.strip_prefix("+ ")) {
            rest = r;
        }
        let rest = re_ordered_list().replace(rest, "");
        lines.push(rest.into_owned());
    }
    let joined = lines.join("\n");
    let joined = re_image().replace_all(&joined, "$1");
    let joined = re_link().replace_all(&joined, "$1");
    joined
        .chars()
        .filter(|c| !matches!(c, '*' | '_' | '`' | '~'))
        .collect()
}

fn is_horizontal_rule(line: &str) -> bool {
    let meaningful: Vec<char> = line.chars().filter(|c| !c.is_whitespace()).collect();
    meaningful.len() >= 3
        && meaningful.iter().all(|&c| c == '-' || c == '*' || c == '_')
}

/// Strips the conventional leading markers from a summary line: the patterns
/// `tifu by`, `tifu-`, `tifu :`, `tl;dr :` and `tl;dr` (case-insensitive,
/// flexible spacing around the punctuation), plus any punctuation or spaces
/// that follow. Applied repeatedly until nothing matches.
pub fn trim_summary_prefix(summary: &str) -> String {
    static CACHE: OnceLock<Regex> = OnceLock::new();
    let prefix = re(
        &CACHE,
        r"(?i)^\s*(tifu by\b|tifu\s*-|tifu\s*:|tl;dr\s*:|tl;dr\b)[\s:,.!-]*",
    );
    let mut text = summary.trim_start().to_string();
    loop {
        let next = prefix.replace(&text, "").into_owned();
        if next == text {
            return next.trim().to_string();
        }
        text = next;
    }
}
