//! Loading datasets from `schema.json` plus one CSV file per table, and
//! converting a DBLP XML dump into that layout.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};

use dbtrail_core::{ColumnDef, Dataset, DatasetError, ForeignKeyDef, SchemaDescriptor, SchemaError, TableDef};
use quick_xml::escape::resolve_html5_entity;
use quick_xml::events::Event;
use quick_xml::Reader;
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum IngestError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: invalid schema JSON: {source}")]
    Json { path: PathBuf, source: serde_json::Error },
    #[error("invalid schema: {0}")]
    Schema(#[from] SchemaError),
    #[error("{path}: {source}")]
    Csv { path: PathBuf, source: csv::Error },
    #[error("{path}: missing column `{column}`")]
    MissingColumn { path: PathBuf, column: String },
    #[error("{path}: unexpected column `{column}`")]
    UnexpectedColumn { path: PathBuf, column: String },
    #[error("{path}: {source}")]
    Row { path: PathBuf, source: DatasetError },
    #[error("{path}: malformed XML at byte {position}: {message}")]
    Xml { path: PathBuf, position: u64, message: String },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> IngestError + '_ {
    move |source| IngestError::Io { path: path.to_path_buf(), source }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SchemaFile {
    tables: Vec<TableFile>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TableFile {
    name: String,
    columns: Vec<ColumnFile>,
    primary_key: Vec<String>,
    #[serde(default)]
    foreign_keys: Vec<ForeignKeyFile>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ColumnFile {
    name: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ForeignKeyFile {
    columns: Vec<String>,
    ref_table: String,
    ref_columns: Vec<String>,
}

pub fn parse_schema(json: &str, path: &Path) -> Result<SchemaDescriptor, IngestError> {
    let file: SchemaFile =
        serde_json::from_str(json).map_err(|source| IngestError::Json { path: path.to_path_buf(), source })?;
    let tables = file
        .tables
        .into_iter()
        .map(|t| TableDef {
            name: t.name,
            columns: t.columns.into_iter().map(|c| ColumnDef::new(c.name)).collect(),
            primary_key: t.primary_key,
            foreign_keys: t
                .foreign_keys
                .into_iter()
                .map(|f| ForeignKeyDef {
                    source_columns: f.columns,
                    target_table: f.ref_table,
                    target_columns: f.ref_columns,
                })
                .collect(),
        })
        .collect();
    Ok(SchemaDescriptor::new(tables)?)
}

pub fn load_schema(path: &Path) -> Result<SchemaDescriptor, IngestError> {
    let json = fs::read_to_string(path).map_err(io_err(path))?;
    parse_schema(&json, path)
}

/// Pretty JSON in the `schema.json` format, with a trailing newline.
pub fn schema_to_json(schema: &SchemaDescriptor) -> String {
    let file = SchemaFile {
        tables: schema
            .tables()
            .iter()
            .map(|t| TableFile {
                name: t.name.clone(),
                columns: t.columns.iter().map(|c| ColumnFile { name: c.name.clone() }).collect(),
                primary_key: t.primary_key.clone(),
                foreign_keys: t
                    .foreign_keys
                    .iter()
                    .map(|f| ForeignKeyFile {
                        columns: f.source_columns.clone(),
                        ref_table: f.target_table.clone(),
                        ref_columns: f.target_columns.clone(),
                    })
                    .collect(),
            })
            .collect(),
    };
    let mut out = serde_json::to_string_pretty(&file).expect("schema serializes");
    out.push('\n');
    out
}

/// Reads `<table>.csv` from `dir` for every table, in schema order. Headers
/// name columns in any order; an empty field is null.
pub fn load_dataset(schema: SchemaDescriptor, dir: &Path) -> Result<Dataset, IngestError> {
    let mut dataset = Dataset::new(schema.clone());
    for table in schema.tables() {
        let path = dir.join(format!("{}.csv", table.name));
        let file = fs::File::open(&path).map_err(io_err(&path))?;
        let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(file);
        let csv_err = |source| IngestError::Csv { path: path.clone(), source };
        let headers = reader.headers().map_err(csv_err)?.clone();
        let mut positions = Vec::with_capacity(table.columns.len());
        for c in &table.columns {
            let at = headers
                .iter()
                .position(|h| h.eq_ignore_ascii_case(&c.name))
                .ok_or_else(|| IngestError::MissingColumn { path: path.clone(), column: c.name.clone() })?;
            positions.push(at);
        }
        if let Some(extra) = headers.iter().find(|h| table.column_index(h).is_none()) {
            return Err(IngestError::UnexpectedColumn { path: path.clone(), column: extra.to_string() });
        }
        for record in reader.records() {
            let record = record.map_err(|source| IngestError::Csv { path: path.clone(), source })?;
            let values =
                positions.iter().map(|&i| record.get(i).filter(|v| !v.is_empty()).map(str::to_string)).collect();
            dataset.insert(&table.name, values).map_err(|source| IngestError::Row { path: path.clone(), source })?;
        }
    }
    Ok(dataset)
}

/// Writes `schema.json` and one CSV per table.
pub fn write_dataset(dataset: &Dataset, dir: &Path) -> Result<(), IngestError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let schema_path = dir.join("schema.json");
    fs::write(&schema_path, schema_to_json(dataset.schema())).map_err(io_err(&schema_path))?;
    let mut writers = BTreeMap::new();
    for table in dataset.schema().tables() {
        let path = dir.join(format!("{}.csv", table.name));
        let mut w = csv::Writer::from_path(&path).map_err(|source| IngestError::Csv { path: path.clone(), source })?;
        w.write_record(table.columns.iter().map(|c| c.name.as_str()))
            .map_err(|source| IngestError::Csv { path: path.clone(), source })?;
        writers.insert(table.name.clone(), (path, w));
    }
    for (_, row) in dataset.scan() {
        let (path, w) = writers.get_mut(&row.table).expect("row table in schema");
        w.write_record(row.values.iter().map(|v| v.as_deref().unwrap_or("")))
            .map_err(|source| IngestError::Csv { path: path.clone(), source })?;
    }
    for (_, (path, mut w)) in writers {
        w.flush().map_err(io_err(&path))?;
    }
    Ok(())
}

/// DBLP element names that become publication rows.
pub const PUBLICATION_TYPES: &[&str] =
    &["article", "inproceedings", "proceedings", "book", "incollection", "phdthesis", "mastersthesis"];

const PUBLICATION_COLUMNS: &[&str] =
    &["booktitle", "journal", "key", "pages", "publisher", "school", "title", "type", "url", "volume", "year"];

/// The four-table DBLP schema.
pub fn dblp_schema() -> SchemaDescriptor {
    let cols = |names: &[&str]| names.iter().map(|n| ColumnDef::new(*n)).collect::<Vec<_>>();
    SchemaDescriptor::new(vec![
        TableDef {
            name: "publication".into(),
            columns: cols(PUBLICATION_COLUMNS),
            primary_key: vec!["key".into()],
            foreign_keys: vec![],
        },
        TableDef {
            name: "author".into(),
            columns: cols(&["id", "name"]),
            primary_key: vec!["id".into()],
            foreign_keys: vec![],
        },
        TableDef {
            name: "writes".into(),
            columns: cols(&["author", "publication"]),
            primary_key: vec!["author".into(), "publication".into()],
            foreign_keys: vec![
                ForeignKeyDef::single("author", "author", "id"),
                ForeignKeyDef::single("publication", "publication", "key"),
            ],
        },
        TableDef {
            name: "citation".into(),
            columns: cols(&["citing", "cited"]),
            primary_key: vec!["citing".into(), "cited".into()],
            foreign_keys: vec![
                ForeignKeyDef::single("citing", "publication", "key"),
                ForeignKeyDef::single("cited", "publication", "key"),
            ],
        },
    ])
    .expect("static schema is valid")
}

#[derive(Debug, Default)]
struct Entry {
    kind: String,
    key: String,
    fields: BTreeMap<&'static str, String>,
    authors: Vec<String>,
    cites: Vec<String>,
}

/// What a conversion produced besides the dataset.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ConvertReport {
    /// `element key` of every skipped top-level record.
    pub skipped: Vec<String>,
    /// Cite references whose target is not in the dump.
    pub unresolved_cites: usize,
}

/// Parses DBLP XML into the four-table dataset. Records of unknown element
/// types are skipped and listed in the report. Authors get ids in order of
/// first appearance.
pub fn parse_dblp<R: BufRead>(input: R, path: &Path) -> Result<(Dataset, ConvertReport), IngestError> {
    let mut reader = Reader::from_reader(input);
    reader.config_mut().trim_text(false);
    let xml_err = |reader: &Reader<R>, message: String| IngestError::Xml {
        path: path.to_path_buf(),
        position: reader.buffer_position(),
        message,
    };

    let mut entries: Vec<Entry> = Vec::new();
    let mut report = ConvertReport::default();
    let mut buf = Vec::new();
    let mut depth = 0usize;
    let mut current: Option<Entry> = None;
    let mut field: Option<&'static str> = None;
    let mut text = String::new();

    loop {
        let event = reader.read_event_into(&mut buf).map_err(|e| xml_err(&reader, e.to_string()))?;
        match event {
            Event::Start(e) => {
                depth += 1;
                let name = String::from_utf8_lossy(e.name().as_ref()).into_owned();
                if depth == 2 {
                    let mut key = String::new();
                    for attr in e.attributes() {
                        let attr = attr.map_err(|e| xml_err(&reader, e.to_string()))?;
                        if attr.key.as_ref() == b"key" {
                            key = attr
                                .unescape_value_with(resolve_html5_entity)
                                .map_err(|e| xml_err(&reader, e.to_string()))?
                                .into_owned();
                        }
                    }
                    if PUBLICATION_TYPES.contains(&name.as_str()) {
                        current = Some(Entry { kind: name, key, ..Entry::default() });
                    } else {
                        report.skipped.push(format!("{name} {key}"));
                    }
                } else if depth == 3 && current.is_some() {
                    field = field_name(&name);
                    text.clear();
                }
            }
            Event::Empty(e) if depth == 1 => {
                let name = String::from_utf8_lossy(e.name().as_ref()).into_owned();
                report.skipped.push(name);
            }
            Event::Text(t) if field.is_some() => {
                let s = t.unescape_with(resolve_html5_entity).map_err(|e| xml_err(&reader, e.to_string()))?;
                text.push_str(&s);
            }
            Event::CData(t) if field.is_some() => {
                text.push_str(&String::from_utf8_lossy(&t));
            }
            Event::End(_) => {
                if depth == 3 {
                    if let (Some(f), Some(entry)) = (field.take(), current.as_mut()) {
                        let value = text.split_whitespace().collect::<Vec<_>>().join(" ");
                        match f {
                            "author" => entry.authors.push(value),
                            "cite" => entry.cites.push(value),
                            _ => {
                                entry.fields.entry(f).or_insert(value);
                            }
                        }
                    }
                } else if depth == 2 {
                    if let Some(entry) = current.take() {
                        entries.push(entry);
                    }
                }
                depth = depth.saturating_sub(1);
            }
            Event::Eof => break,
            _ => {}
        }
        buf.clear();
    }
    if depth != 0 {
        return Err(xml_err(&reader, "unexpected end of input".into()));
    }

    let mut dataset = Dataset::new(dblp_schema());
    let row_err = |source| IngestError::Row { path: path.to_path_buf(), source };
    let keys: BTreeSet<&str> = entries.iter().map(|e| e.key.as_str()).collect();
    for e in &entries {
        let values = PUBLICATION_COLUMNS
            .iter()
            .map(|&c| match c {
                "key" => Some(e.key.clone()),
                "type" => Some(e.kind.clone()),
                c => e.fields.get(c).filter(|v| !v.is_empty()).cloned(),
            })
            .collect();
        dataset.insert("publication", values).map_err(row_err)?;
    }
    let mut author_ids: BTreeMap<&str, usize> = BTreeMap::new();
    for e in &entries {
        for a in &e.authors {
            if !author_ids.contains_key(a.as_str()) {
                let id = author_ids.len() + 1;
                author_ids.insert(a, id);
                dataset.insert("author", vec![Some(id.to_string()), Some(a.clone())]).map_err(row_err)?;
            }
        }
    }
    for e in &entries {
        let mut seen = BTreeSet::new();
        for a in &e.authors {
            let id = author_ids[a.as_str()];
            if seen.insert(id) {
                dataset.insert("writes", vec![Some(id.to_string()), Some(e.key.clone())]).map_err(row_err)?;
            }
        }
    }
    for e in &entries {
        let mut seen = BTreeSet::new();
        for c in &e.cites {
            if !keys.contains(c.as_str()) {
                report.unresolved_cites += 1;
            } else if seen.insert(c) {
                dataset.insert("citation", vec![Some(e.key.clone()), Some(c.clone())]).map_err(row_err)?;
            }
        }
    }
    Ok((dataset, report))
}

fn field_name(element: &str) -> Option<&'static str> {
    match element {
        "author" => Some("author"),
        "cite" => Some("cite"),
        "url" => Some("url"),
        other => PUBLICATION_COLUMNS.iter().copied().find(|&c| c == other && c != "key" && c != "type"),
    }
}

/// Converts a DBLP XML file into `schema.json` plus CSV files under `out`.
pub fn convert_dblp_xml(xml: &Path, out: &Path) -> Result<(SchemaDescriptor, ConvertReport), IngestError> {
    let file = fs::File::open(xml).map_err(io_err(xml))?;
    let (dataset, report) = parse_dblp(BufReader::new(file), xml)?;
    write_dataset(&dataset, out)?;
    Ok((dataset.schema().clone(), report))
}

/// `schema.json` and the row files in `dir`.
pub fn load_data_dir(dir: &Path) -> Result<Dataset, IngestError> {
    let schema = load_schema(&dir.join("schema.json"))?;
    load_dataset(schema, dir)
}
