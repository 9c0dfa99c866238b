//! Relational model: schema descriptors, rows, row keys and the dataset.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::sync::atomic::{AtomicU64, Ordering};

use percent_encoding::{percent_decode_str, utf8_percent_encode, AsciiSet, NON_ALPHANUMERIC};

/// Characters escaped inside one path component of a row key.
const COMPONENT: &AsciiSet = &NON_ALPHANUMERIC.remove(b'-').remove(b'_').remove(b'.').remove(b'~');

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SchemaError {
    #[error("duplicate table name `{0}`")]
    DuplicateTable(String),
    #[error("table `{table}`: duplicate column `{column}`")]
    DuplicateColumn { table: String, column: String },
    #[error("table `{0}` has an empty primary key")]
    EmptyPrimaryKey(String),
    #[error("table `{table}`: primary key column `{column}` is not a column")]
    UnknownPrimaryKeyColumn { table: String, column: String },
    #[error("table `{table}`: foreign key column `{column}` is not a column")]
    UnknownForeignKeyColumn { table: String, column: String },
    #[error("table `{table}`: foreign key references unknown table `{target}`")]
    UnknownTargetTable { table: String, target: String },
    #[error("table `{table}`: foreign key references unknown column `{target}.{column}`")]
    UnknownTargetColumn { table: String, target: String, column: String },
    #[error(
        "table `{table}`: composite foreign keys are not supported \
         (link destination of a multi-column reference is ambiguous)"
    )]
    CompositeForeignKey { table: String },
    #[error("table `{table}`: foreign key must list the same number of source and target columns")]
    ForeignKeyArity { table: String },
    #[error("table `{table}`: foreign key must reference the primary key of `{target}`")]
    TargetNotPrimaryKey { table: String, target: String },
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum DatasetError {
    #[error("unknown table `{0}`")]
    UnknownTable(String),
    #[error("table `{table}`: expected {expected} values, got {found}")]
    Arity { table: String, expected: usize, found: usize },
    #[error("table `{table}`: primary key column `{column}` is null")]
    NullPrimaryKey { table: String, column: String },
    #[error("table `{table}`: duplicate primary key {key}")]
    DuplicateKey { table: String, key: RowKey },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ColumnDef {
    pub name: String,
}

impl ColumnDef {
    pub fn new(name: impl Into<String>) -> Self {
        Self { name: name.into() }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ForeignKeyDef {
    pub source_columns: Vec<String>,
    pub target_table: String,
    pub target_columns: Vec<String>,
}

impl ForeignKeyDef {
    pub fn single(column: &str, target_table: &str, target_column: &str) -> Self {
        Self {
            source_columns: alloc::vec![column.to_string()],
            target_table: target_table.to_string(),
            target_columns: alloc::vec![target_column.to_string()],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TableDef {
    pub name: String,
    pub columns: Vec<ColumnDef>,
    pub primary_key: Vec<String>,
    pub foreign_keys: Vec<ForeignKeyDef>,
}

impl TableDef {
    /// Position of a column, matched case-insensitively.
    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name.eq_ignore_ascii_case(name))
    }

    /// Column positions of the primary key, in declared key order.
    pub fn primary_key_indices(&self) -> Vec<usize> {
        self.primary_key.iter().filter_map(|c| self.column_index(c)).collect()
    }
}

/// A single-column foreign key with every name resolved to a position.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ResolvedForeignKey {
    pub column: usize,
    pub target_table: usize,
}

/// A validated schema. Construct through [`SchemaDescriptor::new`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SchemaDescriptor {
    tables: Vec<TableDef>,
    resolved: Vec<Vec<ResolvedForeignKey>>,
}

impl SchemaDescriptor {
    pub fn new(tables: Vec<TableDef>) -> Result<Self, SchemaError> {
        for (i, t) in tables.iter().enumerate() {
            if tables[..i].iter().any(|o| o.name.eq_ignore_ascii_case(&t.name)) {
                return Err(SchemaError::DuplicateTable(t.name.clone()));
            }
            for (j, c) in t.columns.iter().enumerate() {
                if t.columns[..j].iter().any(|o| o.name.eq_ignore_ascii_case(&c.name)) {
                    return Err(SchemaError::DuplicateColumn { table: t.name.clone(), column: c.name.clone() });
                }
            }
            if t.primary_key.is_empty() {
                return Err(SchemaError::EmptyPrimaryKey(t.name.clone()));
            }
            for pk in &t.primary_key {
                if t.column_index(pk).is_none() {
                    return Err(SchemaError::UnknownPrimaryKeyColumn { table: t.name.clone(), column: pk.clone() });
                }
            }
        }

        let mut resolved = Vec::with_capacity(tables.len());
        for t in &tables {
            let mut fks = Vec::with_capacity(t.foreign_keys.len());
            for fk in &t.foreign_keys {
                fks.push(resolve_foreign_key(&tables, t, fk)?);
            }
            resolved.push(fks);
        }
        Ok(Self { tables, resolved })
    }

    pub fn empty() -> Self {
        Self { tables: Vec::new(), resolved: Vec::new() }
    }

    pub fn tables(&self) -> &[TableDef] {
        &self.tables
    }

    /// Table lookup, case-insensitive.
    pub fn table(&self, name: &str) -> Option<(usize, &TableDef)> {
        self.tables.iter().enumerate().find(|(_, t)| t.name.eq_ignore_ascii_case(name))
    }

    pub fn foreign_keys(&self, table: usize) -> &[ResolvedForeignKey] {
        &self.resolved[table]
    }
}

fn resolve_foreign_key(
    tables: &[TableDef],
    table: &TableDef,
    fk: &ForeignKeyDef,
) -> Result<ResolvedForeignKey, SchemaError> {
    if fk.source_columns.len() != fk.target_columns.len() || fk.source_columns.is_empty() {
        return Err(SchemaError::ForeignKeyArity { table: table.name.clone() });
    }
    if fk.source_columns.len() > 1 {
        return Err(SchemaError::CompositeForeignKey { table: table.name.clone() });
    }
    let column = table.column_index(&fk.source_columns[0]).ok_or_else(|| SchemaError::UnknownForeignKeyColumn {
        table: table.name.clone(),
        column: fk.source_columns[0].clone(),
    })?;
    let (target_table, target) =
        tables.iter().enumerate().find(|(_, t)| t.name.eq_ignore_ascii_case(&fk.target_table)).ok_or_else(|| {
            SchemaError::UnknownTargetTable { table: table.name.clone(), target: fk.target_table.clone() }
        })?;
    let target_column = &fk.target_columns[0];
    if target.column_index(target_column).is_none() {
        return Err(SchemaError::UnknownTargetColumn {
            table: table.name.clone(),
            target: target.name.clone(),
            column: target_column.clone(),
        });
    }
    if target.primary_key.len() != 1 || !target.primary_key[0].eq_ignore_ascii_case(target_column) {
        return Err(SchemaError::TargetNotPrimaryKey { table: table.name.clone(), target: target.name.clone() });
    }
    Ok(ResolvedForeignKey { column, target_table })
}

/// Identifies one row: canonical table name plus primary-key values in
/// declared key order.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct RowKey {
    pub table: String,
    pub pk_values: Vec<String>,
}

impl RowKey {
    pub fn new(table: impl Into<String>, pk_values: Vec<String>) -> Self {
        Self { table: table.into(), pk_values }
    }

    /// `table/pk1/pk2`, each component percent-encoded.
    pub fn to_path(&self) -> String {
        let mut out = String::new();
        out.extend(utf8_percent_encode(&self.table, COMPONENT));
        for v in &self.pk_values {
            out.push('/');
            out.extend(utf8_percent_encode(v, COMPONENT));
        }
        out
    }

    /// Inverse of [`RowKey::to_path`]. The table name is returned as written;
    /// callers canonicalize it against a schema.
    pub fn from_path(path: &str) -> Option<Self> {
        let mut parts = path.trim_matches('/').split('/');
        let table = decode_component(parts.next()?)?;
        if table.is_empty() {
            return None;
        }
        let pk_values = parts.map(decode_component).collect::<Option<Vec<_>>>()?;
        if pk_values.is_empty() {
            return None;
        }
        Some(Self { table, pk_values })
    }
}

fn decode_component(s: &str) -> Option<String> {
    percent_decode_str(s).decode_utf8().ok().map(|c| c.into_owned())
}

impl fmt::Display for RowKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.table)?;
        f.write_str("(")?;
        for (i, v) in self.pk_values.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            f.write_str(v)?;
        }
        f.write_str(")")
    }
}

/// One row. `values` follow the table's column order; `None` is SQL null.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Row {
    pub table: String,
    pub values: Vec<Option<String>>,
}

/// All rows of a schema, addressable by primary key.
///
/// Keyed lookups and full scans are counted so callers can check which code
/// paths touch row data.
#[derive(Debug)]
pub struct Dataset {
    schema: SchemaDescriptor,
    rows: Vec<Row>,
    keys: Vec<RowKey>,
    by_key: BTreeMap<RowKey, usize>,
    per_table: Vec<usize>,
    lookups: AtomicU64,
    scans: AtomicU64,
}

impl Dataset {
    pub fn new(schema: SchemaDescriptor) -> Self {
        let per_table = alloc::vec![0; schema.tables().len()];
        Self {
            schema,
            rows: Vec::new(),
            keys: Vec::new(),
            by_key: BTreeMap::new(),
            per_table,
            lookups: AtomicU64::new(0),
            scans: AtomicU64::new(0),
        }
    }

    pub fn schema(&self) -> &SchemaDescriptor {
        &self.schema
    }

    /// Validates and stores a row, returning its key.
    pub fn insert(&mut self, table: &str, values: Vec<Option<String>>) -> Result<RowKey, DatasetError> {
        let (ti, def) = self.schema.table(table).ok_or_else(|| DatasetError::UnknownTable(table.to_string()))?;
        if values.len() != def.columns.len() {
            return Err(DatasetError::Arity {
                table: def.name.clone(),
                expected: def.columns.len(),
                found: values.len(),
            });
        }
        let mut pk_values = Vec::with_capacity(def.primary_key.len());
        for ci in def.primary_key_indices() {
            match &values[ci] {
                Some(v) => pk_values.push(v.clone()),
                None => {
                    return Err(DatasetError::NullPrimaryKey {
                        table: def.name.clone(),
                        column: def.columns[ci].name.clone(),
                    })
                }
            }
        }
        let key = RowKey::new(def.name.clone(), pk_values);
        if self.by_key.contains_key(&key) {
            return Err(DatasetError::DuplicateKey { table: def.name.clone(), key });
        }
        let row = Row { table: def.name.clone(), values };
        self.by_key.insert(key.clone(), self.rows.len());
        self.rows.push(row);
        self.keys.push(key.clone());
        self.per_table[ti] += 1;
        Ok(key)
    }

    /// Keyed lookup. Counted.
    pub fn get(&self, key: &RowKey) -> Option<&Row> {
        self.lookups.fetch_add(1, Ordering::Relaxed);
        let canonical;
        let key = match self.schema.table(&key.table) {
            Some((_, t)) if t.name != key.table => {
                canonical = RowKey::new(t.name.clone(), key.pk_values.clone());
                &canonical
            }
            _ => key,
        };
        self.by_key.get(key).map(|&i| &self.rows[i])
    }

    /// All rows with their keys, in insertion order. Counted as one scan.
    pub fn scan(&self) -> impl Iterator<Item = (&RowKey, &Row)> {
        self.scans.fetch_add(1, Ordering::Relaxed);
        self.keys.iter().zip(self.rows.iter())
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Row count of the table at schema position `table`.
    pub fn table_len(&self, table: usize) -> usize {
        self.per_table[table]
    }

    pub fn lookup_count(&self) -> u64 {
        self.lookups.load(Ordering::Relaxed)
    }

    pub fn scan_count(&self) -> u64 {
        self.scans.load(Ordering::Relaxed)
    }

    /// Rows touched through any access path so far.
    pub fn row_reads(&self) -> u64 {
        self.lookup_count() + self.scan_count()
    }
}

impl PartialEq for Dataset {
    fn eq(&self, other: &Self) -> bool {
        self.schema == other.schema && self.rows == other.rows
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::dblp_tables;
    use alloc::vec;

    #[test]
    fn empty_schema_is_valid() {
        let s = SchemaDescriptor::new(vec![]).unwrap();
        assert!(s.tables().is_empty());
    }

    #[test]
    fn resolves_foreign_keys() {
        let s = SchemaDescriptor::new(dblp_tables()).unwrap();
        let (wi, _) = s.table("WRITES").unwrap();
        let fks = s.foreign_keys(wi);
        assert_eq!(fks[0], ResolvedForeignKey { column: 0, target_table: 1 });
        assert_eq!(fks[1], ResolvedForeignKey { column: 1, target_table: 0 });
    }

    #[test]
    fn rejects_bad_schemas() {
        let mut t = dblp_tables();
        t[1].name = "Publication".into();
        assert!(matches!(SchemaDescriptor::new(t), Err(SchemaError::DuplicateTable(_))));

        let mut t = dblp_tables();
        t[2].foreign_keys[0].target_table = "nobody".into();
        assert!(matches!(SchemaDescriptor::new(t), Err(SchemaError::UnknownTargetTable { .. })));

        let mut t = dblp_tables();
        t[2].foreign_keys[0].target_columns = vec!["nope".into()];
        assert!(matches!(SchemaDescriptor::new(t), Err(SchemaError::UnknownTargetColumn { .. })));

        let mut t = dblp_tables();
        t[2].foreign_keys[0] = ForeignKeyDef {
            source_columns: vec!["author".into(), "publication".into()],
            target_table: "author".into(),
            target_columns: vec!["id".into(), "name".into()],
        };
        let err = SchemaDescriptor::new(t).unwrap_err();
        assert!(matches!(err, SchemaError::CompositeForeignKey { .. }));
        assert!(err.to_string().contains("composite"));

        let mut t = dblp_tables();
        t[0].primary_key.clear();
        assert!(matches!(SchemaDescriptor::new(t), Err(SchemaError::EmptyPrimaryKey(_))));

        let mut t = dblp_tables();
        t[1].columns.push(ColumnDef::new("ID"));
        assert!(matches!(SchemaDescriptor::new(t), Err(SchemaError::DuplicateColumn { .. })));
    }

    #[test]
    fn duplicate_primary_key_names_table_and_key() {
        let mut d = Dataset::new(SchemaDescriptor::new(dblp_tables()).unwrap());
        d.insert("author", vec![Some("1".into()), Some("Sergey Brin".into())]).unwrap();
        let err = d.insert("author", vec![Some("1".into()), Some("Someone".into())]).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("author") && msg.contains("(1)"), "{msg}");
    }

    #[test]
    fn null_primary_key_rejected() {
        let mut d = Dataset::new(SchemaDescriptor::new(dblp_tables()).unwrap());
        let err = d.insert("author", vec![None, Some("x".into())]).unwrap_err();
        assert!(matches!(err, DatasetError::NullPrimaryKey { .. }));
    }

    #[test]
    fn lookups_are_counted() {
        let mut d = Dataset::new(SchemaDescriptor::new(dblp_tables()).unwrap());
        let k = d.insert("author", vec![Some("7".into()), None]).unwrap();
        assert_eq!(d.row_reads(), 0);
        assert!(d.get(&RowKey::new("AUTHOR", vec!["7".into()])).is_some());
        assert!(d.get(&k).is_some());
        assert_eq!(d.lookup_count(), 2);
        assert_eq!(d.scan().count(), 1);
        assert_eq!(d.scan_count(), 1);
    }

    #[test]
    fn row_key_paths() {
        let k = RowKey::new("publication", vec!["journals/ac/Dam66".into()]);
        assert_eq!(k.to_path(), "publication/journals%2Fac%2FDam66");
        assert_eq!(RowKey::from_path(&k.to_path()).unwrap(), k);
        let w = RowKey::new("writes", vec!["3".into(), "a b/c".into()]);
        assert_eq!(w.to_path(), "writes/3/a%20b%2Fc");
        assert_eq!(RowKey::from_path(&w.to_path()).unwrap(), w);
        assert!(RowKey::from_path("author").is_none());
    }
}
