//! Reading virtual-document XML back into a [`VirtualDocument`].

use dbtrail_core::{Element, RowKey, SchemaDescriptor, VirtualDocument};
use quick_xml::escape::resolve_xml_entity;
use quick_xml::events::Event;
use quick_xml::Reader;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum XmlError {
    #[error("malformed XML: {0}")]
    Syntax(String),
    #[error("unknown table element `{0}`")]
    UnknownTable(String),
    #[error("expected {expected}, found {found}")]
    Structure { expected: &'static str, found: String },
    #[error("primary key column `{0}` missing")]
    MissingKey(String),
}

/// Parses `<TABLE><row><COL>text</COL>...</row></TABLE>`.
pub fn parse_virtual_document(schema: &SchemaDescriptor, xml: &str) -> Result<VirtualDocument, XmlError> {
    let mut reader = Reader::from_str(xml);
    reader.config_mut().trim_text(false);
    let syntax = |e: quick_xml::Error| XmlError::Syntax(e.to_string());

    let mut stack: Vec<String> = Vec::new();
    let mut table = None;
    let mut elements = Vec::new();
    let mut text = String::new();
    loop {
        match reader.read_event().map_err(syntax)? {
            Event::Start(e) => {
                let name = String::from_utf8_lossy(e.name().as_ref()).into_owned();
                match stack.len() {
                    0 => {
                        let (_, t) = schema.table(&name).ok_or_else(|| XmlError::UnknownTable(name.clone()))?;
                        table = Some(t);
                    }
                    1 if name != "row" => return Err(XmlError::Structure { expected: "<row>", found: name }),
                    1 => {}
                    2 => text.clear(),
                    _ => return Err(XmlError::Structure { expected: "text", found: name }),
                }
                stack.push(name);
            }
            Event::Empty(e) if stack.len() == 2 => {
                let name = String::from_utf8_lossy(e.name().as_ref()).into_owned();
                elements.push(Element { attribute: name, text: String::new() });
            }
            Event::Text(t) if stack.len() == 3 => {
                text.push_str(&t.unescape_with(resolve_xml_entity).map_err(syntax)?);
            }
            Event::Text(t) => {
                let raw = t.unescape().map_err(syntax)?;
                if !raw.trim().is_empty() {
                    return Err(XmlError::Structure { expected: "element", found: raw.into_owned() });
                }
            }
            Event::End(_) => {
                let name = stack.pop().unwrap_or_default();
                if stack.len() == 2 {
                    elements.push(Element { attribute: name, text: std::mem::take(&mut text) });
                }
            }
            Event::Eof => break,
            Event::Decl(_) | Event::Comment(_) => {}
            other => return Err(XmlError::Structure { expected: "element", found: format!("{other:?}") }),
        }
    }
    let table = table.ok_or(XmlError::Structure { expected: "table element", found: "end of input".into() })?;
    let mut pk_values = Vec::new();
    for i in table.primary_key_indices() {
        let column = table.columns[i].name.to_uppercase();
        let value =
            elements.iter().find(|e| e.attribute == column).ok_or_else(|| XmlError::MissingKey(column.clone()))?;
        pk_values.push(value.text.clone());
    }
    Ok(VirtualDocument { row_key: RowKey::new(table.name.clone(), pk_values), elements })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::dblp_schema;
    use dbtrail_core::{build_virtual_document, Row};
    use proptest::prelude::*;

    #[test]
    fn dam66_round_trip() {
        let schema = dblp_schema();
        let row = Row {
            table: "publication".into(),
            values: vec![
                None,
                Some("Advances in Computers".into()),
                Some("journals/ac/Dam66".into()),
                Some("239-290".into()),
                None,
                None,
                Some("Computer Driven Displays and Their Use in Man/Machine Interaction.".into()),
                Some("article".into()),
                Some("http://dblp.uni-trier.de/db/journals/ac/ac7.html#Dam66".into()),
                Some("7".into()),
                Some("1966".into()),
            ],
        };
        let doc = build_virtual_document(&schema, &row);
        let xml = doc.to_xml();
        assert!(xml.starts_with("<PUBLICATION>\n  <row>\n    <JOURNAL>Advances in Computers</JOURNAL>\n"));
        let names: Vec<&str> = doc.elements.iter().map(|e| e.attribute.as_str()).collect();
        assert_eq!(names, ["JOURNAL", "KEY", "PAGES", "TITLE", "TYPE", "URL", "VOLUME", "YEAR"]);
        assert_eq!(parse_virtual_document(&schema, &xml).unwrap(), doc);
    }

    #[test]
    fn rejects_unknown_table() {
        let err = parse_virtual_document(&dblp_schema(), "<NOPE><row></row></NOPE>").unwrap_err();
        assert_eq!(err, XmlError::UnknownTable("NOPE".into()));
    }

    proptest! {
        #[test]
        fn any_text_round_trips(
            name in "[^\\x00-\\x1f\\x7f]{0,40}",
            id in "[^\\x00-\\x1f\\x7f]{1,12}",
        ) {
            let schema = dblp_schema();
            let row = Row { table: "author".into(), values: vec![Some(id), Some(name)] };
            let doc = build_virtual_document(&schema, &row);
            prop_assert_eq!(parse_virtual_document(&schema, &doc.to_xml()).unwrap(), doc);
        }
    }
}
