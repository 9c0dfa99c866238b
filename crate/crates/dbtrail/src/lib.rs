//! File formats, persistence, the HTTP service and command implementations
//! around `dbtrail-core`.

pub mod cli;
pub mod config;
pub mod eval;
pub mod ingest;
pub mod service;
pub mod store;
pub mod xml;
