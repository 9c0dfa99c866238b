//! Virtual documents: the transient XML rendering of a row used as indexing
//! input, and the tokenizer applied to its text.

use alloc::string::String;
use alloc::vec::Vec;

use crate::relational::{Row, RowKey, SchemaDescriptor};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Element {
    /// Uppercased column name.
    pub attribute: String,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VirtualDocument {
    pub row_key: RowKey,
    pub elements: Vec<Element>,
}

/// Renders a validated row. Null columns are omitted; the remaining elements
/// keep schema column order.
///
/// # Panics
///
/// If the row's table is not part of `schema` or its arity is wrong; rows
/// coming out of a [`crate::Dataset`] are always valid.
pub fn build_virtual_document(schema: &SchemaDescriptor, row: &Row) -> VirtualDocument {
    let (_, table) = schema.table(&row.table).expect("row of unknown table");
    assert_eq!(table.columns.len(), row.values.len(), "row arity mismatch");
    let pk_values =
        table.primary_key_indices().into_iter().map(|i| row.values[i].clone().unwrap_or_default()).collect();
    let elements = table
        .columns
        .iter()
        .zip(&row.values)
        .filter_map(|(c, v)| v.as_ref().map(|text| Element { attribute: c.name.to_uppercase(), text: text.clone() }))
        .collect();
    VirtualDocument { row_key: RowKey::new(table.name.clone(), pk_values), elements }
}

impl VirtualDocument {
    /// `<TABLE><row><COL>value</COL>...</row></TABLE>`, one element per line.
    pub fn to_xml(&self) -> String {
        let tag = self.row_key.table.to_uppercase();
        let mut out = String::new();
        out.push('<');
        out.push_str(&tag);
        out.push_str(">\n  <row>\n");
        for e in &self.elements {
            out.push_str("    <");
            out.push_str(&e.attribute);
            out.push('>');
            escape_into(&e.text, &mut out);
            out.push_str("</");
            out.push_str(&e.attribute);
            out.push_str(">\n");
        }
        out.push_str("  </row>\n</");
        out.push_str(&tag);
        out.push_str(">\n");
        out
    }

    /// Canonical text used for exact-duplicate detection.
    pub fn content(&self) -> String {
        content_of(&self.elements)
    }
}

pub(crate) fn content_of(elements: &[Element]) -> String {
    let mut out = String::new();
    for e in elements {
        out.push_str(&e.attribute);
        out.push('\u{1f}');
        out.push_str(&e.text);
        out.push('\u{1e}');
    }
    out
}

fn escape_into(text: &str, out: &mut String) {
    for c in text.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            c => out.push(c),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub text: String,
    pub position: usize,
}

/// Lowercases and splits on every non-alphanumeric character.
pub fn tokenize(text: &str) -> Vec<Token> {
    token_strs(text).enumerate().map(|(position, text)| Token { text, position }).collect()
}

/// The token texts of `text`, without positions.
pub fn token_strs(text: &str) -> impl Iterator<Item = String> {
    let lower = if text.bytes().any(|b| !b.is_ascii() || b.is_ascii_uppercase()) {
        text.to_lowercase()
    } else {
        String::from(text)
    };
    lower
        .split(|c: char| !c.is_alphanumeric())
        .filter(|s| !s.is_empty())
        .map(String::from)
        .collect::<Vec<_>>()
        .into_iter()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::relational::Dataset;
    use crate::testutil::dblp_tables;
    use alloc::string::ToString;
    use alloc::vec;
    use proptest::prelude::*;

    fn texts(s: &str) -> Vec<String> {
        tokenize(s).into_iter().map(|t| t.text).collect()
    }

    #[test]
    fn tokenizer_examples() {
        assert_eq!(texts("Computer Driven Displays"), ["computer", "driven", "displays"]);
        assert!(tokenize("").is_empty());
        assert_eq!(texts("journals/ac/Dam66"), ["journals", "ac", "dam66"]);
        let toks = tokenize("  Man/Machine  Interaction. ");
        assert_eq!(toks.iter().map(|t| t.position).collect::<Vec<_>>(), [0, 1, 2]);
        assert_eq!(texts("Schütze ÉCOLE"), ["schütze", "école"]);
    }

    #[test]
    fn element_order_follows_columns_and_skips_nulls() {
        let schema = crate::SchemaDescriptor::new(dblp_tables()).unwrap();
        let mut d = Dataset::new(schema.clone());
        d.insert("publication", vec![None, Some("k1".into()), Some("A & B <c>".into()), None, Some("1999".into())])
            .unwrap();
        let (_, row) = d.scan().next().unwrap();
        let doc = build_virtual_document(&schema, row);
        let attrs: Vec<_> = doc.elements.iter().map(|e| e.attribute.as_str()).collect();
        assert_eq!(attrs, ["KEY", "TITLE", "YEAR"]);
        assert_eq!(doc.row_key, RowKey::new("publication", vec!["k1".to_string()]));
        let xml = doc.to_xml();
        assert!(xml.starts_with("<PUBLICATION>\n  <row>\n"));
        assert!(xml.contains("<TITLE>A &amp; B &lt;c&gt;</TITLE>"));
        assert!(xml.ends_with("  </row>\n</PUBLICATION>\n"));
    }

    #[test]
    fn only_key_columns_when_rest_is_null() {
        let schema = crate::SchemaDescriptor::new(dblp_tables()).unwrap();
        let row = Row { table: "author".into(), values: vec![Some("4".into()), None] };
        let doc = build_virtual_document(&schema, &row);
        assert_eq!(doc.elements, vec![Element { attribute: "ID".into(), text: "4".into() }]);
    }

    proptest! {
        #[test]
        fn tokenize_is_idempotent(s in "\\PC{0,60}") {
            let once = texts(&s);
            let again = texts(&once.join(" "));
            prop_assert_eq!(once, again);
        }

        #[test]
        fn tokens_are_normalized(s in "\\PC{0,60}") {
            for t in tokenize(&s) {
                prop_assert!(!t.text.is_empty());
                prop_assert!(t.text.chars().all(|c| c.is_alphanumeric()));
                prop_assert_eq!(t.text.to_lowercase(), t.text.clone());
            }
        }
    }
}
