//! The on-disk index directory.
//!
//! | file            | contents                                                     |
//! |-----------------|--------------------------------------------------------------|
//! | `registry.tsv`  | `#dbtrail-registry v1`, then `node<TAB>row path` per node     |
//! | `lexicon.tsv`   | `#dbtrail-lexicon v1`, then `term<TAB>offset<TAB>count`       |
//! | `postings.bin`  | `DBTPOST1`, u64 count, then `u32 node, f64 weight` records    |
//! | `pairs.bin`     | `DBTPAIR1`, u32 pair count, then per pair: attribute, term   |
//! |                 | (u32 length + UTF-8 each), u32 count, posting records        |
//! | `norms.bin`     | `DBTNORM1`, u32 document count, u32 n, `u32 node, f64 norm`  |
//! | `graph.bin`     | `DBTGRPH1`, u32 nodes, u64 n, `u32 from, u32 to, u8 fk` per   |
//! |                 | directed entry; `fk = 1` when `from` holds the foreign key   |
//! | `summaries.tsv` | `#dbtrail-summaries v1`, then `node` and `ATTR, text` fields |
//! | `schema.json`   | the schema the index was built from                          |
//! | `stats.json`    | counts and the data directory                                |
//!
//! All integers and floats are little endian. Text fields in TSV files escape
//! backslash, tab, newline and carriage return.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use dbtrail_core::engine::SummaryStore;
use dbtrail_core::{
    Element, Engine, EngineConfig, IndexError, InvertedIndex, LinkGraph, NodeId, NodeRegistry, Posting, RowKey,
    SchemaDescriptor,
};
use serde::{Deserialize, Serialize};

use crate::ingest::{parse_schema, schema_to_json, IngestError};

const REGISTRY_HEADER: &str = "#dbtrail-registry v1";
const LEXICON_HEADER: &str = "#dbtrail-lexicon v1";
const SUMMARIES_HEADER: &str = "#dbtrail-summaries v1";
const POSTINGS_MAGIC: &[u8; 8] = b"DBTPOST1";
const PAIRS_MAGIC: &[u8; 8] = b"DBTPAIR1";
const NORMS_MAGIC: &[u8; 8] = b"DBTNORM1";
const GRAPH_MAGIC: &[u8; 8] = b"DBTGRPH1";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {message}")]
    Corrupt { path: PathBuf, message: String },
    #[error(transparent)]
    Index(#[from] IndexError),
    #[error(transparent)]
    Ingest(#[from] IngestError),
}

fn io(path: &Path) -> impl FnOnce(std::io::Error) -> StoreError + '_ {
    move |source| StoreError::Io { path: path.to_path_buf(), source }
}

fn corrupt(path: &Path, message: impl Into<String>) -> StoreError {
    StoreError::Corrupt { path: path.to_path_buf(), message: message.into() }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndexStats {
    pub format: u32,
    pub nodes: usize,
    pub edges: usize,
    pub terms: usize,
    pub pairs: usize,
    /// Rows per table, in schema order.
    pub tables: Vec<TableCount>,
    /// Where the rows were read from; the service serves rows from here.
    pub data_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TableCount {
    pub name: String,
    pub rows: usize,
}

impl IndexStats {
    pub fn of(engine: &Engine, schema: &SchemaDescriptor, data_dir: Option<PathBuf>) -> Self {
        let mut counts = vec![0usize; schema.tables().len()];
        for (_, key) in engine.registry().iter() {
            if let Some((i, _)) = schema.table(&key.table) {
                counts[i] += 1;
            }
        }
        Self {
            format: FORMAT_VERSION,
            nodes: engine.registry().len(),
            edges: engine.graph().edge_count(),
            terms: engine.index().term_count(),
            pairs: engine.index().pair_count(),
            tables: schema
                .tables()
                .iter()
                .zip(counts)
                .map(|(t, rows)| TableCount { name: t.name.clone(), rows })
                .collect(),
            data_dir,
        }
    }
}

pub struct LoadedIndex {
    pub engine: Engine,
    pub schema: SchemaDescriptor,
    pub stats: IndexStats,
}

/// Writes the index into a fresh sibling directory and swaps it into place,
/// replacing any previous index at `dir`. `extra` files are copied verbatim.
pub fn save_index(
    dir: &Path,
    engine: &Engine,
    schema: &SchemaDescriptor,
    stats: &IndexStats,
    extra: &[(&str, &str)],
) -> Result<(), StoreError> {
    let parent = dir.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(parent).map_err(io(parent))?;
    let name = dir.file_name().ok_or_else(|| corrupt(dir, "index path has no file name"))?.to_string_lossy();
    let staging = parent.join(format!(".{name}.tmp-{}", std::process::id()));
    if staging.exists() {
        fs::remove_dir_all(&staging).map_err(io(&staging))?;
    }
    fs::create_dir(&staging).map_err(io(&staging))?;
    write_files(&staging, engine, schema, stats)?;
    for (file, contents) in extra {
        let p = staging.join(file);
        fs::write(&p, contents).map_err(io(&p))?;
    }
    let old = parent.join(format!(".{name}.old-{}", std::process::id()));
    if dir.exists() {
        fs::rename(dir, &old).map_err(io(dir))?;
    }
    fs::rename(&staging, dir).map_err(io(dir))?;
    if old.exists() {
        fs::remove_dir_all(&old).map_err(io(&old))?;
    }
    Ok(())
}

fn write_files(dir: &Path, engine: &Engine, schema: &SchemaDescriptor, stats: &IndexStats) -> Result<(), StoreError> {
    let write = |file: &str, bytes: &[u8]| {
        let p = dir.join(file);
        fs::write(&p, bytes).map_err(io(&p))
    };

    let mut registry = format!("{REGISTRY_HEADER}\n");
    for (id, key) in engine.registry().iter() {
        registry.push_str(&format!("{}\t{}\n", id.0, key.to_path()));
    }
    write("registry.tsv", registry.as_bytes())?;

    let index = engine.index();
    let mut lexicon = format!("{LEXICON_HEADER}\n");
    let mut postings = POSTINGS_MAGIC.to_vec();
    let total: usize = index.terms().map(|(_, l)| l.len()).sum();
    postings.extend((total as u64).to_le_bytes());
    let mut offset = 0usize;
    for (term, list) in index.terms() {
        lexicon.push_str(&format!("{}\t{offset}\t{}\n", escape(term), list.len()));
        put_postings(&mut postings, list);
        offset += list.len();
    }
    write("lexicon.tsv", lexicon.as_bytes())?;
    write("postings.bin", &postings)?;

    let mut pairs = PAIRS_MAGIC.to_vec();
    pairs.extend((index.pair_count() as u32).to_le_bytes());
    for ((attribute, term), list) in index.pairs() {
        put_str(&mut pairs, attribute);
        put_str(&mut pairs, term);
        pairs.extend((list.len() as u32).to_le_bytes());
        put_postings(&mut pairs, list);
    }
    write("pairs.bin", &pairs)?;

    let mut norms = NORMS_MAGIC.to_vec();
    norms.extend(index.doc_count().to_le_bytes());
    norms.extend((index.doc_norms().len() as u32).to_le_bytes());
    for (node, norm) in index.doc_norms() {
        norms.extend(node.0.to_le_bytes());
        norms.extend(norm.to_le_bytes());
    }
    write("norms.bin", &norms)?;

    let graph = engine.graph();
    let mut g = GRAPH_MAGIC.to_vec();
    g.extend((graph.node_count() as u32).to_le_bytes());
    let refs: Vec<(NodeId, NodeId)> = graph.references().collect();
    g.extend((2 * refs.len() as u64).to_le_bytes());
    for (from, to) in refs {
        for (a, b, flag) in [(from, to, 1u8), (to, from, 0u8)] {
            g.extend(a.0.to_le_bytes());
            g.extend(b.0.to_le_bytes());
            g.push(flag);
        }
    }
    write("graph.bin", &g)?;

    let mut summaries = format!("{SUMMARIES_HEADER}\n");
    for (id, elements) in engine.store().iter() {
        summaries.push_str(&id.0.to_string());
        for e in elements {
            summaries.push('\t');
            summaries.push_str(&escape(&e.attribute));
            summaries.push('\t');
            summaries.push_str(&escape(&e.text));
        }
        summaries.push('\n');
    }
    write("summaries.tsv", summaries.as_bytes())?;

    write("schema.json", schema_to_json(schema).as_bytes())?;
    let mut json = serde_json::to_string_pretty(stats).expect("stats serialize");
    json.push('\n');
    write("stats.json", json.as_bytes())?;
    Ok(())
}

fn put_postings(out: &mut Vec<u8>, list: &[Posting]) {
    for p in list {
        out.extend(p.node.0.to_le_bytes());
        out.extend(p.weight.to_le_bytes());
    }
}

fn put_str(out: &mut Vec<u8>, s: &str) {
    out.extend((s.len() as u32).to_le_bytes());
    out.extend(s.as_bytes());
}

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '\\' => out.push_str("\\\\"),
            '\t' => out.push_str("\\t"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            c => out.push(c),
        }
    }
    out
}

fn unescape(s: &str) -> Option<String> {
    let mut out = String::with_capacity(s.len());
    let mut chars = s.chars();
    while let Some(c) = chars.next() {
        if c != '\\' {
            out.push(c);
            continue;
        }
        out.push(match chars.next()? {
            '\\' => '\\',
            't' => '\t',
            'n' => '\n',
            'r' => '\r',
            _ => return None,
        });
    }
    Some(out)
}

struct Cursor<'a> {
    path: &'a Path,
    bytes: &'a [u8],
    at: usize,
}

impl<'a> Cursor<'a> {
    fn open(path: &'a Path, bytes: &'a [u8], magic: &[u8; 8]) -> Result<Self, StoreError> {
        if bytes.len() < 8 || &bytes[..8] != magic {
            return Err(corrupt(path, "bad magic header"));
        }
        Ok(Self { path, bytes, at: 8 })
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8], StoreError> {
        let end = self.at.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| corrupt(self.path, "truncated file"))?;
        let s = &self.bytes[self.at..end];
        self.at = end;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8, StoreError> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32, StoreError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64, StoreError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn f64(&mut self) -> Result<f64, StoreError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn string(&mut self) -> Result<String, StoreError> {
        let n = self.u32()? as usize;
        let bytes = self.take(n)?;
        String::from_utf8(bytes.to_vec()).map_err(|_| corrupt(self.path, "invalid UTF-8"))
    }

    fn postings(&mut self, n: usize) -> Result<Vec<Posting>, StoreError> {
        (0..n).map(|_| Ok(Posting { node: NodeId(self.u32()?), weight: self.f64()? })).collect()
    }

    fn finish(&self) -> Result<(), StoreError> {
        if self.at == self.bytes.len() {
            Ok(())
        } else {
            Err(corrupt(self.path, "trailing bytes"))
        }
    }
}

fn read(path: &Path) -> Result<Vec<u8>, StoreError> {
    fs::read(path).map_err(io(path))
}

fn read_text(path: &Path) -> Result<String, StoreError> {
    fs::read_to_string(path).map_err(io(path))
}

fn lines_after<'a>(path: &Path, text: &'a str, header: &str) -> Result<impl Iterator<Item = &'a str>, StoreError> {
    let mut lines = text.lines();
    if lines.next() != Some(header) {
        return Err(corrupt(path, format!("expected header `{header}`")));
    }
    Ok(lines.filter(|l| !l.is_empty()))
}

pub fn load_stats(dir: &Path) -> Result<IndexStats, StoreError> {
    let path = dir.join("stats.json");
    let stats: IndexStats = serde_json::from_str(&read_text(&path)?).map_err(|e| corrupt(&path, e.to_string()))?;
    if stats.format != FORMAT_VERSION {
        return Err(corrupt(&path, format!("unsupported format {}", stats.format)));
    }
    Ok(stats)
}

pub fn load_index(dir: &Path, config: EngineConfig) -> Result<LoadedIndex, StoreError> {
    let stats = load_stats(dir)?;
    let schema_path = dir.join("schema.json");
    let schema = parse_schema(&read_text(&schema_path)?, &schema_path)?;

    let path = dir.join("registry.tsv");
    let text = read_text(&path)?;
    let mut registry = NodeRegistry::new();
    for (i, line) in lines_after(&path, &text, REGISTRY_HEADER)?.enumerate() {
        let (id, key) = line.split_once('\t').ok_or_else(|| corrupt(&path, format!("bad line {}", i + 2)))?;
        let key = RowKey::from_path(key).ok_or_else(|| corrupt(&path, format!("bad row path `{key}`")))?;
        let got = registry.register(key)?;
        if id.parse::<u32>().ok() != Some(got.0) {
            return Err(corrupt(&path, format!("node ids not dense at line {}", i + 2)));
        }
    }

    let post_path = dir.join("postings.bin");
    let post_bytes = read(&post_path)?;
    let mut postings = Cursor::open(&post_path, &post_bytes, POSTINGS_MAGIC)?;
    let total = postings.u64()? as usize;
    let path = dir.join("lexicon.tsv");
    let text = read_text(&path)?;
    let mut terms = BTreeMap::new();
    let mut expected_offset = 0usize;
    for line in lines_after(&path, &text, LEXICON_HEADER)? {
        let mut f = line.split('\t');
        let (Some(term), Some(offset), Some(count), None) = (f.next(), f.next(), f.next(), f.next()) else {
            return Err(corrupt(&path, format!("bad line `{line}`")));
        };
        let term = unescape(term).ok_or_else(|| corrupt(&path, "bad escape"))?;
        let offset: usize = offset.parse().map_err(|_| corrupt(&path, "bad offset"))?;
        let count: usize = count.parse().map_err(|_| corrupt(&path, "bad count"))?;
        if offset != expected_offset {
            return Err(corrupt(&path, format!("offset of `{term}` out of sequence")));
        }
        expected_offset += count;
        terms.insert(term, postings.postings(count)?);
    }
    if expected_offset != total {
        return Err(corrupt(&post_path, "posting count disagrees with lexicon"));
    }
    postings.finish()?;

    let path = dir.join("pairs.bin");
    let bytes = read(&path)?;
    let mut c = Cursor::open(&path, &bytes, PAIRS_MAGIC)?;
    let mut pairs = BTreeMap::new();
    for _ in 0..c.u32()? {
        let attribute = c.string()?;
        let term = c.string()?;
        let n = c.u32()? as usize;
        pairs.insert((attribute, term), c.postings(n)?);
    }
    c.finish()?;

    let path = dir.join("norms.bin");
    let bytes = read(&path)?;
    let mut c = Cursor::open(&path, &bytes, NORMS_MAGIC)?;
    let doc_count = c.u32()?;
    let mut norms = BTreeMap::new();
    for _ in 0..c.u32()? {
        norms.insert(NodeId(c.u32()?), c.f64()?);
    }
    c.finish()?;
    let index = InvertedIndex::from_parts(doc_count, terms, pairs, norms)?;

    let path = dir.join("graph.bin");
    let bytes = read(&path)?;
    let mut c = Cursor::open(&path, &bytes, GRAPH_MAGIC)?;
    let node_count = c.u32()? as usize;
    let mut forward = Vec::new();
    let mut backward = Vec::new();
    for _ in 0..c.u64()? {
        let (a, b, flag) = (NodeId(c.u32()?), NodeId(c.u32()?), c.u8()?);
        if a.index() >= node_count || b.index() >= node_count {
            return Err(corrupt(&path, "edge endpoint out of range"));
        }
        match flag {
            1 => forward.push((a, b)),
            0 => backward.push((b, a)),
            _ => return Err(corrupt(&path, "bad direction flag")),
        }
    }
    c.finish()?;
    forward.sort();
    backward.sort();
    if forward != backward {
        return Err(corrupt(&path, "edge list is not symmetric"));
    }
    let graph = LinkGraph::from_references(node_count, forward);

    let path = dir.join("summaries.tsv");
    let text = read_text(&path)?;
    let mut store = SummaryStore::new();
    for (i, line) in lines_after(&path, &text, SUMMARIES_HEADER)?.enumerate() {
        let mut fields = line.split('\t');
        if fields.next().and_then(|f| f.parse::<usize>().ok()) != Some(i) {
            return Err(corrupt(&path, format!("node ids not dense at line {}", i + 2)));
        }
        let mut elements = Vec::new();
        while let Some(attribute) = fields.next() {
            let text = fields.next().ok_or_else(|| corrupt(&path, "odd field count"))?;
            let (Some(attribute), Some(text)) = (unescape(attribute), unescape(text)) else {
                return Err(corrupt(&path, "bad escape"));
            };
            elements.push(Element { attribute, text });
        }
        store.push(elements);
    }

    let engine = Engine::from_parts(registry, index, graph, store, config)?;
    Ok(LoadedIndex { engine, schema, stats })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn escaping_round_trips() {
        for s in ["", "plain", "a\tb\nc\\d\re", "\\t literal"] {
            assert_eq!(unescape(&escape(s)).as_deref(), Some(s));
        }
        assert_eq!(unescape("bad\\x"), None);
    }
}
