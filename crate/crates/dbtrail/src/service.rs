//! HTTP API.
//!
//! - `GET /search?q=..&k=..&seed=..&limit=..`: ranked trails as JSON. `k` is
//!   the number of starting points, `limit` the number of trails returned.
//! - `GET /row/{table}/{pk..}`: one row, JSON or (with `Accept:
//!   application/xml`) its virtual-document XML.
//! - `GET /backlinks/{table}/{pk..}`: rows whose foreign keys point here.
//! - `GET /stats`: node, edge and term counts.
//!
//! Searches run on the in-memory index and graph only. Row views perform a
//! single keyed lookup; foreign-key outlinks are built from the row's own
//! values.

use std::sync::Arc;
use std::time::Instant;

use axum::extract::{Query as UrlQuery, State};
use axum::http::{header, HeaderMap, StatusCode, Uri};
use axum::response::{IntoResponse, Response};
use axum::routing::get;
use axum::{Json, Router};
use dbtrail_core::engine::{Clock, ResultNode, ResultTrail, SearchOptions, SearchOutcome};
use dbtrail_core::{build_virtual_document, Dataset, Engine, NodeId, RowKey, SchemaDescriptor};
use serde::{Deserialize, Serialize};

use crate::store::{IndexStats, TableCount};

pub struct AppState {
    pub engine: Engine,
    pub dataset: Dataset,
    pub schema: SchemaDescriptor,
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/search", get(search))
        .route("/row/{*rest}", get(row))
        .route("/backlinks/{*rest}", get(backlinks))
        .route("/stats", get(stats))
        .with_state(state)
}

/// Serves until Ctrl-C, letting in-flight requests finish.
pub async fn serve(state: Arc<AppState>, port: u16) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(("0.0.0.0", port)).await?;
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}

pub struct StdClock(Instant);

impl StdClock {
    pub fn new() -> Self {
        Self(Instant::now())
    }
}

impl Default for StdClock {
    fn default() -> Self {
        Self::new()
    }
}

impl Clock for StdClock {
    fn now_ms(&self) -> f64 {
        self.0.elapsed().as_secs_f64() * 1000.0
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SearchResponse {
    pub query: String,
    /// Normalized form of the parsed query.
    pub normalized: String,
    pub total_trails: usize,
    pub trails: Vec<TrailView>,
    pub timings: Timings,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct TrailView {
    pub nodes: Vec<NodeView>,
    pub trail_score: f64,
    pub terms_matched: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct NodeView {
    pub node_id: u32,
    pub table: String,
    pub key: Vec<String>,
    pub title: String,
    pub snippet: String,
    pub matched_terms: Vec<String>,
    pub score: f64,
    pub link: String,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct Timings {
    pub score: f64,
    pub trail: f64,
    pub filter: f64,
    pub summarize: f64,
    pub total: f64,
}

pub fn row_link(key: &RowKey) -> String {
    format!("/row/{}", key.to_path())
}

impl From<&ResultNode> for NodeView {
    fn from(n: &ResultNode) -> Self {
        Self {
            node_id: n.node.0,
            table: n.key.table.clone(),
            key: n.key.pk_values.clone(),
            title: n.title.clone(),
            snippet: n.snippet.clone(),
            matched_terms: n.matched_terms.clone(),
            score: n.score,
            link: row_link(&n.key),
        }
    }
}

impl From<&ResultTrail> for TrailView {
    fn from(t: &ResultTrail) -> Self {
        Self {
            nodes: t.nodes.iter().map(NodeView::from).collect(),
            trail_score: t.score,
            terms_matched: t.terms_matched.clone(),
        }
    }
}

impl SearchResponse {
    pub fn new(raw: &str, outcome: &SearchOutcome) -> Self {
        let t = outcome.timings;
        Self {
            query: raw.to_string(),
            normalized: outcome.query.to_string(),
            total_trails: outcome.total_trails,
            trails: outcome.trails.iter().map(TrailView::from).collect(),
            timings: Timings {
                score: t.score,
                trail: t.trail,
                filter: t.filter,
                summarize: t.summarize,
                total: t.total,
            },
        }
    }
}

#[derive(Debug, Deserialize)]
struct SearchParams {
    q: Option<String>,
    k: Option<usize>,
    seed: Option<u64>,
    limit: Option<usize>,
}

fn error(status: StatusCode, message: impl Into<String>) -> Response {
    (status, Json(serde_json::json!({ "error": message.into() }))).into_response()
}

async fn search(State(state): State<Arc<AppState>>, UrlQuery(p): UrlQuery<SearchParams>) -> Response {
    let Some(q) = p.q else {
        return error(StatusCode::BAD_REQUEST, "missing parameter `q`");
    };
    if p.k == Some(0) {
        return error(StatusCode::BAD_REQUEST, "`k` must be at least 1");
    }
    let options = SearchOptions { starting_points: p.k, seed: p.seed, limit: p.limit };
    match state.engine.search(&q, options, &StdClock::new()) {
        Ok(outcome) => Json(SearchResponse::new(&q, &outcome)).into_response(),
        Err(e) => error(StatusCode::BAD_REQUEST, e.to_string()),
    }
}

/// The row key in a request path, taken from the raw URI so that encoded
/// slashes inside key values survive.
fn key_from_uri(uri: &Uri, prefix: &str, schema: &SchemaDescriptor) -> Option<RowKey> {
    let rest = uri.path().strip_prefix(prefix)?;
    let mut key = RowKey::from_path(rest)?;
    let (_, table) = schema.table(&key.table)?;
    if key.pk_values.len() != table.primary_key.len() {
        return None;
    }
    key.table = table.name.clone();
    Some(key)
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct RowView {
    pub table: String,
    pub key: Vec<String>,
    pub link: String,
    pub backlinks: String,
    pub columns: Vec<ColumnView>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ColumnView {
    pub name: String,
    pub value: Option<String>,
    /// Outlink for foreign-key columns with a value.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub link: Option<String>,
}

async fn row(State(state): State<Arc<AppState>>, uri: Uri, headers: HeaderMap) -> Response {
    let Some(key) = key_from_uri(&uri, "/row/", &state.schema) else {
        return error(StatusCode::NOT_FOUND, "no such row");
    };
    let Some(row) = state.dataset.get(&key) else {
        return error(StatusCode::NOT_FOUND, format!("no row {key}"));
    };
    let wants_xml = headers
        .get(header::ACCEPT)
        .and_then(|v| v.to_str().ok())
        .is_some_and(|v| v.contains("application/xml") || v.contains("text/xml"));
    if wants_xml {
        let xml = build_virtual_document(&state.schema, row).to_xml();
        return ([(header::CONTENT_TYPE, "application/xml; charset=utf-8")], xml).into_response();
    }
    let (ti, table) = state.schema.table(&key.table).expect("key table canonicalized");
    let fks = state.schema.foreign_keys(ti);
    let columns = table
        .columns
        .iter()
        .enumerate()
        .map(|(i, c)| {
            let value = row.values[i].clone();
            let link = fks.iter().find(|fk| fk.column == i).and_then(|fk| {
                let target = &state.schema.tables()[fk.target_table].name;
                value.as_ref().map(|v| row_link(&RowKey::new(target.clone(), vec![v.clone()])))
            });
            ColumnView { name: c.name.clone(), value, link }
        })
        .collect();
    Json(RowView {
        table: key.table.clone(),
        key: key.pk_values.clone(),
        link: row_link(&key),
        backlinks: format!("/backlinks/{}", key.to_path()),
        columns,
    })
    .into_response()
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct RowRef {
    pub node_id: u32,
    pub table: String,
    pub key: Vec<String>,
    pub link: String,
}

async fn backlinks(State(state): State<Arc<AppState>>, uri: Uri) -> Response {
    let node = key_from_uri(&uri, "/backlinks/", &state.schema).and_then(|k| state.engine.registry().lookup(&k));
    let Some(node) = node else {
        return error(StatusCode::NOT_FOUND, "no such row");
    };
    let refs: Vec<RowRef> = state
        .engine
        .graph()
        .backlinks(node)
        .unwrap_or(&[])
        .iter()
        .filter_map(|&n: &NodeId| {
            let key = state.engine.registry().resolve(n).ok()?;
            Some(RowRef { node_id: n.0, table: key.table.clone(), key: key.pk_values.clone(), link: row_link(key) })
        })
        .collect();
    Json(refs).into_response()
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct StatsView {
    pub nodes: usize,
    pub edges: usize,
    pub terms: usize,
    pub pairs: usize,
    pub tables: Vec<TableCount>,
}

async fn stats(State(state): State<Arc<AppState>>) -> Response {
    let s = IndexStats::of(&state.engine, &state.schema, None);
    Json(StatsView { nodes: s.nodes, edges: s.edges, terms: s.terms, pairs: s.pairs, tables: s.tables }).into_response()
}
