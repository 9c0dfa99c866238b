//! Keyword search and navigation over relational data.
//!
//! Rows become nodes. Their text goes into an inverted file with normalized
//! tf.idf postings, and foreign-key matches between rows become edges of an
//! undirected link graph. A query is answered by growing navigation trees
//! from well-placed starting nodes and returning ranked *trails*: sequences of
//! joined rows that together cover the query keywords.
//!
//! This crate holds the algorithmic core only. It is `no_std` (with `alloc`)
//! and performs no IO; file formats, the HTTP service and the command line
//! live in the `dbtrail` crate.
//!
//! The main entry points:
//!
//! - [`relational`]: schema descriptors, rows, keys and the in-memory dataset.
//! - [`vdoc`]: virtual documents and the tokenizer.
//! - [`index`]: the node registry and the inverted file.
//! - [`linkgraph`]: the foreign-key link graph and potential gain.
//! - [`query`]: query syntax and per-node match predicates.
//! - [`trail`]: node scoring, the Best Trail search, ranking, filtering and
//!   summaries.
//! - [`engine`]: the full query pipeline over a built index.

#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod engine;
pub mod index;
pub mod linkgraph;
pub mod query;
pub mod relational;
pub mod sumtree;
pub mod trail;
pub mod vdoc;

#[cfg(test)]
mod testutil;

pub use engine::{
    Clock, Engine, EngineConfig, NoClock, ResultNode, ResultTrail, SearchOptions, SearchOutcome, StageTimings,
    SummaryStore,
};
pub use index::{IndexBuilder, IndexError, InvertedIndex, NodeId, NodeRegistry, Posting};
pub use linkgraph::{LinkGraph, PotentialGainParams};
pub use query::{parse_query, MatchInfo, Modifier, NodeRef, Query, QueryError, QueryTerm, TermKind};
pub use relational::{
    ColumnDef, Dataset, DatasetError, ForeignKeyDef, Row, RowKey, SchemaDescriptor, SchemaError, TableDef,
};
pub use trail::{BestTrailParams, ScoreTable, Trail, TrailScoreParams};
pub use vdoc::{build_virtual_document, tokenize, Element, Token, VirtualDocument};
