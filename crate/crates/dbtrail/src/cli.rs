//! Command implementations shared by the binary and the tests.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use dbtrail_core::engine::{SearchOptions, SearchOutcome};
use dbtrail_core::{Engine, EngineConfig};

use crate::config::{load_config, parse_config};
use crate::eval::{load_queries, run_eval, EvalReport, EvalTimings};
use crate::ingest::load_data_dir;
use crate::service::{AppState, StdClock};
use crate::store::{load_index, save_index, IndexStats, LoadedIndex};

/// Builds an index from `data` (schema.json plus CSVs) into `out`, replacing
/// any index already there. A config file, when given, is stored with the
/// index and used by later commands.
pub fn cmd_index(data: &Path, out: &Path, config: Option<&Path>) -> Result<IndexStats> {
    let (engine_config, config_text) = match config {
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            (parse_config(&text, &p.display().to_string())?, Some(text))
        }
        None => (EngineConfig::default(), None),
    };
    let dataset = load_data_dir(data)?;
    let engine = Engine::build(&dataset, engine_config)?;
    let data_dir = std::fs::canonicalize(data).unwrap_or_else(|_| data.to_path_buf());
    let stats = IndexStats::of(&engine, dataset.schema(), Some(data_dir));
    let extra: Vec<(&str, &str)> = config_text.iter().map(|t| ("engine.toml", t.as_str())).collect();
    save_index(out, &engine, dataset.schema(), &stats, &extra)?;
    Ok(stats)
}

/// Loads an index with `config`, or the index's own `engine.toml`, or the
/// defaults.
pub fn open_index(dir: &Path, config: Option<&Path>) -> Result<LoadedIndex> {
    let stored = dir.join("engine.toml");
    let engine_config = match config {
        Some(p) => load_config(p)?,
        None if stored.exists() => load_config(&stored)?,
        None => EngineConfig::default(),
    };
    load_index(dir, engine_config).with_context(|| format!("loading index {}", dir.display()))
}

/// Loads the index and the rows it was built from, for serving.
pub fn open_service(dir: &Path, config: Option<&Path>, data: Option<&Path>) -> Result<AppState> {
    let loaded = open_index(dir, config)?;
    let data_dir: PathBuf = match data {
        Some(d) => d.to_path_buf(),
        None => loaded.stats.data_dir.clone().context("index records no data directory; pass --data")?,
    };
    let dataset = load_data_dir(&data_dir)?;
    if dataset.len() != loaded.engine.registry().len() {
        anyhow::bail!(
            "data directory {} holds {} rows but the index has {} nodes",
            data_dir.display(),
            dataset.len(),
            loaded.engine.registry().len()
        );
    }
    Ok(AppState { engine: loaded.engine, dataset, schema: loaded.schema })
}

pub fn run_query(engine: &Engine, query: &str, options: SearchOptions) -> Result<SearchOutcome> {
    Ok(engine.search(query, options, &StdClock::new())?)
}

/// One line per trail: rank, matched terms, score and the node titles.
pub fn render_trails(outcome: &SearchOutcome) -> String {
    let mut out = String::new();
    if outcome.trails.is_empty() {
        out.push_str("0 trails\n");
        return out;
    }
    for (i, t) in outcome.trails.iter().enumerate() {
        let nodes: Vec<&str> = t.nodes.iter().map(|n| n.title.as_str()).collect();
        let _ = writeln!(out, "{}. [{}] {:.4}  {}", i + 1, t.terms_matched.join(", "), t.score, nodes.join(" → "));
    }
    let _ = writeln!(out, "{} of {} trails", outcome.trails.len(), outcome.total_trails);
    out
}

pub fn cmd_eval(
    dir: &Path,
    queries: &Path,
    seed: Option<u64>,
    config: Option<&Path>,
) -> Result<(EvalReport, EvalTimings)> {
    let loaded = open_index(dir, config)?;
    let items = load_queries(queries)?;
    let seed = seed.unwrap_or(loaded.engine.config().best.seed);
    Ok(run_eval(&loaded.engine, &items, seed, &StdClock::new())?)
}
