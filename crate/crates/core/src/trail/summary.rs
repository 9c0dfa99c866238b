//! Short per-node summaries shown next to trail entries.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::query::{Query, TermKind};
use crate::relational::RowKey;
use crate::vdoc::Element;

/// Longest snippet, in display tokens (attribute labels included).
pub const SNIPPET_TOKENS: usize = 24;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Summary {
    pub title: String,
    /// Plain text with matched words wrapped in `<b>..</b>`; everything else
    /// is HTML-escaped.
    pub snippet: String,
}

struct Word<'a> {
    text: &'a str,
    label: bool,
    hit: bool,
}

/// Title from `title_column` when the row has it, else the rendered key.
/// The snippet is a window of [`SNIPPET_TOKENS`] words around the first
/// query-term occurrence, or the leading words when nothing matches.
pub fn summarize_node(key: &RowKey, elements: &[Element], title_column: Option<&str>, query: &Query) -> Summary {
    let title = title_column
        .and_then(|c| elements.iter().find(|e| e.attribute.eq_ignore_ascii_case(c)))
        .map(|e| e.text.clone())
        .unwrap_or_else(|| key.to_string());

    let mut words = Vec::new();
    for e in elements {
        words.push(Word { text: &e.attribute, label: true, hit: false });
        let attr = e.attribute.to_lowercase();
        for piece in e.text.split(|c: char| !c.is_alphanumeric()).filter(|s| !s.is_empty()) {
            let lower = piece.to_lowercase();
            words.push(Word { text: piece, label: false, hit: is_hit(query, &attr, &lower) });
        }
    }
    let first_hit = words.iter().position(|w| w.hit).unwrap_or(0);
    let end = (first_hit.saturating_sub(SNIPPET_TOKENS / 2) + SNIPPET_TOKENS).min(words.len());
    let start = end.saturating_sub(SNIPPET_TOKENS);

    let mut parts: Vec<String> = Vec::new();
    if start > 0 {
        parts.push("…".into());
    }
    for w in &words[start..end] {
        let text = escape(w.text);
        parts.push(match (w.label, w.hit) {
            (true, _) => format!("{text}:"),
            (false, true) => format!("<b>{text}</b>"),
            (false, false) => text,
        });
    }
    if end < words.len() {
        parts.push("…".into());
    }
    Summary { title, snippet: parts.join(" ") }
}

fn is_hit(query: &Query, attribute: &str, token: &str) -> bool {
    query.positive_terms().any(|t| match &t.kind {
        TermKind::Keyword(w) => w == token,
        TermKind::Pair { attribute: a, value } => a == attribute && value == token,
        TermKind::Link(_) => false,
    })
}

fn escape(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for c in text.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            c => out.push(c),
        }
    }
    out
}
