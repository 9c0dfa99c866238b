//! Known-item evaluation: reciprocal rank of the first trail containing the
//! target row, over the first result page.
//!
//! The report holds only what the seed determines (ranks and reciprocal
//! ranks), so two runs with the same seed write identical bytes. Stage
//! timings are kept apart in [`EvalTimings`].

use std::fmt::Write as _;
use std::path::Path;

use dbtrail_core::engine::{Clock, SearchOptions, StageTimings};
use dbtrail_core::{Engine, QueryError, RowKey};
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("{0}: {1}")]
    Io(String, std::io::Error),
    #[error("line {line}: expected `query<TAB>table<TAB>pk..`")]
    Format { line: usize },
    #[error("line {line}: unknown target row {key}")]
    UnknownTarget { line: usize, key: RowKey },
    #[error("line {line}: {source}")]
    Query { line: usize, source: QueryError },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KnownItem {
    pub line: usize,
    pub query: String,
    pub target: RowKey,
}

pub fn parse_queries(text: &str) -> Result<Vec<KnownItem>, EvalError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let mut fields = line.split('\t');
        let (Some(query), Some(table)) = (fields.next(), fields.next()) else {
            return Err(EvalError::Format { line: line_no });
        };
        let pk: Vec<String> = fields.map(str::to_string).collect();
        if query.trim().is_empty() || table.is_empty() || pk.is_empty() {
            return Err(EvalError::Format { line: line_no });
        }
        out.push(KnownItem { line: line_no, query: query.to_string(), target: RowKey::new(table, pk) });
    }
    Ok(out)
}

pub fn load_queries(path: &Path) -> Result<Vec<KnownItem>, EvalError> {
    let text = std::fs::read_to_string(path).map_err(|e| EvalError::Io(path.display().to_string(), e))?;
    parse_queries(&text)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub seed: u64,
    pub page_size: usize,
    pub queries: Vec<QueryResult>,
    pub mean_reciprocal_rank: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryResult {
    pub query: String,
    pub target: String,
    /// 1-based rank of the first trail containing the target, if on the page.
    pub rank: Option<usize>,
    pub reciprocal_rank: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalTimings {
    pub queries: Vec<QueryTiming>,
    pub mean_total_ms: f64,
    /// Percentage of summed total time per stage.
    pub shares: StageShares,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryTiming {
    pub query: String,
    pub total_ms: f64,
    pub score_ms: f64,
    pub trail_ms: f64,
    pub filter_ms: f64,
    pub summarize_ms: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StageShares {
    pub score: f64,
    pub trail: f64,
    pub filter: f64,
    pub summarize: f64,
}

/// Runs every query in order, one at a time.
pub fn run_eval(
    engine: &Engine,
    items: &[KnownItem],
    seed: u64,
    clock: &dyn Clock,
) -> Result<(EvalReport, EvalTimings), EvalError> {
    let page_size = engine.config().page_size;
    let mut results = Vec::new();
    let mut timings = Vec::new();
    for item in items {
        let target = canonical(engine, &item.target)
            .ok_or_else(|| EvalError::UnknownTarget { line: item.line, key: item.target.clone() })?;
        let options = SearchOptions { seed: Some(seed), limit: Some(page_size), ..SearchOptions::default() };
        let out = engine
            .search(&item.query, options, clock)
            .map_err(|source| EvalError::Query { line: item.line, source })?;
        let rank = out.trails.iter().position(|t| t.nodes.iter().any(|n| n.node == target)).map(|i| i + 1);
        results.push(QueryResult {
            query: item.query.clone(),
            target: item.target.to_path(),
            rank,
            reciprocal_rank: rank.map_or(0.0, |r| 1.0 / r as f64),
        });
        timings.push(timing(&item.query, out.timings));
    }
    let mean = |xs: &mut dyn Iterator<Item = f64>, n: usize| if n == 0 { 0.0 } else { xs.sum::<f64>() / n as f64 };
    let mrr = mean(&mut results.iter().map(|r| r.reciprocal_rank), results.len());
    let total: f64 = timings.iter().map(|t| t.total_ms).sum();
    let share = |f: fn(&QueryTiming) -> f64| {
        if total > 0.0 {
            100.0 * timings.iter().map(f).sum::<f64>() / total
        } else {
            0.0
        }
    };
    let shares = StageShares {
        score: share(|t| t.score_ms),
        trail: share(|t| t.trail_ms),
        filter: share(|t| t.filter_ms),
        summarize: share(|t| t.summarize_ms),
    };
    let report = EvalReport { seed, page_size, queries: results, mean_reciprocal_rank: mrr };
    let timings = EvalTimings {
        mean_total_ms: mean(&mut timings.iter().map(|t| t.total_ms), timings.len()),
        queries: timings,
        shares,
    };
    Ok((report, timings))
}

fn canonical(engine: &Engine, key: &RowKey) -> Option<dbtrail_core::NodeId> {
    engine.registry().lookup(key).or_else(|| {
        engine
            .registry()
            .iter()
            .find(|(_, k)| k.table.eq_ignore_ascii_case(&key.table) && k.pk_values == key.pk_values)
            .map(|(id, _)| id)
    })
}

fn timing(query: &str, t: StageTimings) -> QueryTiming {
    QueryTiming {
        query: query.to_string(),
        total_ms: t.total,
        score_ms: t.score,
        trail_ms: t.trail,
        filter_ms: t.filter,
        summarize_ms: t.summarize,
    }
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report serializes");
    s.push('\n');
    s
}

/// Plain-text table of ranks and times.
pub fn render_table(report: &EvalReport, timings: &EvalTimings) -> String {
    let width = report.queries.iter().map(|q| q.query.chars().count()).max().unwrap_or(5).max(5);
    let mut out = String::new();
    let _ = writeln!(out, "{:<width$}  {:>4}  {:>6}  {:>9}", "query", "rank", "1/rank", "time (ms)");
    for (q, t) in report.queries.iter().zip(&timings.queries) {
        let rank = q.rank.map_or("-".to_string(), |r| r.to_string());
        let _ = writeln!(out, "{:<width$}  {rank:>4}  {:>6.3}  {:>9.2}", q.query, q.reciprocal_rank, t.total_ms);
    }
    let _ = writeln!(
        out,
        "{:<width$}  {:>4}  {:>6.3}  {:>9.2}",
        "mean", "", report.mean_reciprocal_rank, timings.mean_total_ms
    );
    let s = timings.shares;
    let _ = writeln!(
        out,
        "stage shares: score {:.1}%, trail {:.1}%, filter {:.1}%, summarize {:.1}%",
        s.score, s.trail, s.filter, s.summarize
    );
    out
}
