use std::path::PathBuf;
use std::sync::Arc;

use anyhow::Result;
use clap::{Parser, Subcommand};
use dbtrail::cli::{cmd_eval, cmd_index, open_index, open_service, render_trails, run_query};
use dbtrail::eval::{render_table, to_json};
use dbtrail::ingest::convert_dblp_xml;
use dbtrail::service::{serve, SearchResponse};
use dbtrail_core::engine::SearchOptions;

#[derive(Parser)]
#[command(name = "dbtrail", version, about = "Keyword search over relational data along foreign-key trails")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build an index from schema.json and per-table CSV files.
    Index {
        /// Directory holding schema.json and <table>.csv files.
        #[arg(long)]
        data: PathBuf,
        /// Index directory to create or replace.
        #[arg(long)]
        out: PathBuf,
        /// engine.toml stored alongside the index.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Run one query and print the ranked trails.
    Query {
        #[arg(long, env = "DBTRAIL_INDEX_DIR")]
        index: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Number of starting points.
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// Trails to show.
        #[arg(long)]
        limit: Option<usize>,
        /// Print the JSON search response instead of text.
        #[arg(long)]
        json: bool,
        query: String,
    },
    /// Serve the HTTP API.
    Serve {
        #[arg(long, env = "DBTRAIL_INDEX_DIR")]
        index: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Row files to serve; defaults to the directory the index was built from.
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long, default_value_t = 8080)]
        port: u16,
    },
    /// Reciprocal-rank evaluation over a known-item query file.
    Eval {
        #[arg(long, env = "DBTRAIL_INDEX_DIR")]
        index: PathBuf,
        /// TSV lines: query, table, primary key values.
        #[arg(long)]
        queries: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// Where to write the JSON report.
        #[arg(long)]
        report: Option<PathBuf>,
        /// Where to write per-query stage timings.
        #[arg(long)]
        timings: Option<PathBuf>,
    },
    /// Convert a DBLP XML file into schema.json and CSV files.
    ConvertDblp {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Index { data, out, config } => {
            let s = cmd_index(&data, &out, config.as_deref())?;
            println!("indexed {} nodes, {} edges, {} terms into {}", s.nodes, s.edges, s.terms, out.display());
        }
        Command::Query { index, config, k, seed, limit, json, query } => {
            let loaded = open_index(&index, config.as_deref())?;
            let outcome = run_query(&loaded.engine, &query, SearchOptions { starting_points: k, seed, limit })?;
            if json {
                println!("{}", serde_json::to_string_pretty(&SearchResponse::new(&query, &outcome))?);
            } else {
                print!("{}", render_trails(&outcome));
            }
        }
        Command::Serve { index, config, data, port } => {
            let state = Arc::new(open_service(&index, config.as_deref(), data.as_deref())?);
            eprintln!("serving {} on port {port}", index.display());
            tokio::runtime::Runtime::new()?.block_on(serve(state, port))?;
        }
        Command::Eval { index, queries, config, seed, report, timings } => {
            let (r, t) = cmd_eval(&index, &queries, seed, config.as_deref())?;
            print!("{}", render_table(&r, &t));
            if let Some(p) = report {
                std::fs::write(&p, to_json(&r))?;
            }
            if let Some(p) = timings {
                std::fs::write(&p, to_json(&t))?;
            }
        }
        Command::ConvertDblp { input, out } => {
            let (_, report) = convert_dblp_xml(&input, &out)?;
            for s in &report.skipped {
                eprintln!("warning: skipped {s}");
            }
            if report.unresolved_cites > 0 {
                eprintln!("warning: {} cite references point outside the file", report.unresolved_cites);
            }
        }
    }
    Ok(())
}
