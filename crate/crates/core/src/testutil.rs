//! Shared fixtures for unit tests.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::relational::{ColumnDef, ForeignKeyDef, TableDef};

fn cols(names: &[&str]) -> Vec<ColumnDef> {
    names.iter().map(|n| ColumnDef::new(*n)).collect()
}

/// A trimmed three-table bibliography schema.
pub fn dblp_tables() -> Vec<TableDef> {
    vec![
        TableDef {
            name: "publication".into(),
            columns: cols(&["journal", "key", "title", "type", "year"]),
            primary_key: vec![String::from("key")],
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
    ]
}
