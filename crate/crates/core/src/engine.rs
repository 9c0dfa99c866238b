//! The query pipeline: parse, score, pick starting points, grow trails,
//! filter and rank, summarize.
//!
//! Everything a search needs lives in memory: the registry, the inverted
//! file, the link graph and a per-node store of element lists for summaries.
//! A search never touches the dataset.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use crate::index::{IndexBuilder, IndexError, InvertedIndex, NodeId, NodeRegistry};
use crate::linkgraph::{LinkGraph, PotentialGainParams};
use crate::query::{parse_query, Query, QueryContext, QueryError};
use crate::relational::{Dataset, RowKey};
use crate::trail::{
    filter_trails, run_best_trail, select_starting_points, summarize_node, BestTrailParams, NodeContent, ScoreTable,
    TrailScoreParams,
};
use crate::vdoc::{build_virtual_document, content_of, Element};

#[derive(Debug, Clone, PartialEq)]
pub struct EngineConfig {
    pub best: BestTrailParams,
    pub scoring: TrailScoreParams,
    pub gain: PotentialGainParams,
    /// Trails summarized and returned per search.
    pub page_size: usize,
    /// Title column per table, both lowercased.
    pub titles: BTreeMap<String, String>,
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self {
            best: BestTrailParams::default(),
            scoring: TrailScoreParams::default(),
            gain: PotentialGainParams::default(),
            page_size: 10,
            titles: BTreeMap::new(),
        }
    }
}

/// Element lists per node, kept so summaries and duplicate checks need no
/// row access.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SummaryStore {
    elements: Vec<Vec<Element>>,
    contents: Vec<String>,
}

impl SummaryStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends the elements of the next node; nodes must arrive in id order.
    pub fn push(&mut self, elements: Vec<Element>) {
        self.contents.push(content_of(&elements));
        self.elements.push(elements);
    }

    pub fn elements(&self, node: NodeId) -> Option<&[Element]> {
        self.elements.get(node.index()).map(Vec::as_slice)
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (NodeId, &[Element])> {
        self.elements.iter().enumerate().map(|(i, e)| (NodeId(i as u32), e.as_slice()))
    }
}

impl NodeContent for SummaryStore {
    fn content(&self, node: NodeId) -> Option<&str> {
        self.contents.get(node.index()).map(String::as_str)
    }
}

/// Millisecond clock for stage timings.
pub trait Clock {
    fn now_ms(&self) -> f64;
}

/// A clock that never advances; every timing reads zero.
#[derive(Debug, Clone, Copy, Default)]
pub struct NoClock;

impl Clock for NoClock {
    fn now_ms(&self) -> f64 {
        0.0
    }
}

/// Milliseconds spent per stage.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct StageTimings {
    /// Parsing, node scoring and starting-point selection.
    pub score: f64,
    pub trail: f64,
    /// Filtering and ranking.
    pub filter: f64,
    pub summarize: f64,
    pub total: f64,
}

/// Per-search overrides of the configured parameters.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SearchOptions {
    pub starting_points: Option<usize>,
    pub seed: Option<u64>,
    pub limit: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResultNode {
    pub node: NodeId,
    pub key: RowKey,
    pub title: String,
    pub snippet: String,
    /// Labels of the positive terms this node matches.
    pub matched_terms: Vec<String>,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResultTrail {
    pub nodes: Vec<ResultNode>,
    /// `mu1` score.
    pub score: f64,
    pub terms_matched: Vec<String>,
    /// Most terms matched by one node.
    pub max_node_terms: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchOutcome {
    pub query: Query,
    pub starting_points: Vec<NodeId>,
    /// Trails surviving filtering, before paging.
    pub total_trails: usize,
    pub trails: Vec<ResultTrail>,
    pub timings: StageTimings,
}

#[derive(Debug, Clone)]
pub struct Engine {
    registry: NodeRegistry,
    index: InvertedIndex,
    graph: LinkGraph,
    store: SummaryStore,
    gains: Vec<f64>,
    config: EngineConfig,
}

impl Engine {
    /// Registers and indexes every row in scan order, then links them.
    pub fn build(dataset: &Dataset, config: EngineConfig) -> Result<Self, IndexError> {
        let mut registry = NodeRegistry::new();
        let mut builder = IndexBuilder::new();
        let mut store = SummaryStore::new();
        for (key, row) in dataset.scan() {
            let node = registry.register(key.clone())?;
            let doc = build_virtual_document(dataset.schema(), row);
            builder.add_document(node, &doc)?;
            store.push(doc.elements);
        }
        let graph = LinkGraph::build(dataset, &registry);
        Self::from_parts(registry, builder.finalize(), graph, store, config)
    }

    /// Assembles an engine from loaded parts. Sizes must agree.
    pub fn from_parts(
        registry: NodeRegistry,
        index: InvertedIndex,
        graph: LinkGraph,
        store: SummaryStore,
        config: EngineConfig,
    ) -> Result<Self, IndexError> {
        let n = registry.len();
        if graph.node_count() != n || store.len() != n || index.doc_count() as usize != n {
            return Err(IndexError::Corrupt(alloc::format!(
                "size mismatch: {n} nodes, graph {}, store {}, index {}",
                graph.node_count(),
                store.len(),
                index.doc_count()
            )));
        }
        let gains = graph.potential_gains(config.gain);
        Ok(Self { registry, index, graph, store, gains, config })
    }

    pub fn registry(&self) -> &NodeRegistry {
        &self.registry
    }

    pub fn index(&self) -> &InvertedIndex {
        &self.index
    }

    pub fn graph(&self) -> &LinkGraph {
        &self.graph
    }

    pub fn store(&self) -> &SummaryStore {
        &self.store
    }

    pub fn config(&self) -> &EngineConfig {
        &self.config
    }

    pub fn gains(&self) -> &[f64] {
        &self.gains
    }

    pub fn context(&self) -> QueryContext<'_> {
        QueryContext { index: &self.index, registry: &self.registry, graph: &self.graph }
    }

    pub fn search(&self, raw: &str, options: SearchOptions, clock: &dyn Clock) -> Result<SearchOutcome, QueryError> {
        let t0 = clock.now_ms();
        let query = parse_query(raw)?;
        let mut params = self.config.best;
        if let Some(k) = options.starting_points {
            params.starting_points = k;
        }
        if let Some(seed) = options.seed {
            params.seed = seed;
        }
        let table = ScoreTable::compute(&query, &self.context());
        let starts = select_starting_points(&table, &self.gains, params.starting_points);
        let t1 = clock.now_ms();

        let candidates = run_best_trail(&starts, &table, &self.graph, &params, &self.config.scoring);
        let t2 = clock.now_ms();

        let ranked = filter_trails(candidates, &table, &self.graph, &self.store, &self.config.scoring);
        let t3 = clock.now_ms();

        let limit = options.limit.unwrap_or(self.config.page_size);
        let total_trails = ranked.len();
        let trails = ranked
            .iter()
            .take(limit)
            .map(|t| ResultTrail {
                nodes: t.nodes.iter().map(|&n| self.result_node(n, &query, &table)).collect(),
                score: t.score,
                terms_matched: query.labels(t.terms),
                max_node_terms: t.max_node_terms,
            })
            .collect();
        let t4 = clock.now_ms();

        Ok(SearchOutcome {
            query,
            starting_points: starts,
            total_trails,
            trails,
            timings: StageTimings {
                score: t1 - t0,
                trail: t2 - t1,
                filter: t3 - t2,
                summarize: t4 - t3,
                total: t4 - t0,
            },
        })
    }

    fn result_node(&self, node: NodeId, query: &Query, table: &ScoreTable) -> ResultNode {
        let key = self.registry.resolve(node).cloned().unwrap_or_else(|_| RowKey::new("", Vec::new()));
        let title_column = self.config.titles.get(&key.table.to_lowercase()).map(String::as_str);
        let elements = self.store.elements(node).unwrap_or(&[]);
        let summary = summarize_node(&key, elements, title_column, query);
        ResultNode {
            node,
            key,
            title: summary.title,
            snippet: summary.snippet,
            matched_terms: query.labels(table.matched(node)),
            score: table.score(node),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::relational::SchemaDescriptor;
    use crate::testutil::dblp_tables;
    use alloc::vec;

    fn s(v: &str) -> Option<String> {
        Some(v.into())
    }

    fn dataset() -> Dataset {
        let mut d = Dataset::new(SchemaDescriptor::new(dblp_tables()).unwrap());
        d.insert(
            "publication",
            vec![None, s("conf/www/BrinP98"), s("The Anatomy of a Search Engine"), s("inproceedings"), s("1998")],
        )
        .unwrap();
        d.insert(
            "publication",
            vec![s("Atlantic Monthly"), s("journals/am/Bush45"), s("As We May Think"), s("article"), s("1945")],
        )
        .unwrap();
        d.insert("author", vec![s("1"), s("Sergey Brin")]).unwrap();
        d.insert("author", vec![s("2"), s("Vannevar Bush")]).unwrap();
        d.insert("writes", vec![s("1"), s("conf/www/BrinP98")]).unwrap();
        d.insert("writes", vec![s("2"), s("journals/am/Bush45")]).unwrap();
        d
    }

    fn engine() -> Engine {
        let mut config = EngineConfig::default();
        config.titles.insert("publication".into(), "title".into());
        config.titles.insert("author".into(), "name".into());
        Engine::build(&dataset(), config).unwrap()
    }

    #[test]
    fn search_joins_author_and_title() {
        let e = engine();
        let out = e.search("sergey anatomy", SearchOptions::default(), &NoClock).unwrap();
        let top = &out.trails[0];
        let tables: Vec<&str> = top.nodes.iter().map(|n| n.key.table.as_str()).collect();
        assert_eq!(tables, vec!["author", "writes", "publication"]);
        assert_eq!(top.terms_matched, vec!["sergey", "anatomy"]);
        assert_eq!(top.nodes[0].title, "Sergey Brin");
        assert!(top.nodes[2].snippet.contains("<b>Anatomy</b>"));
    }

    #[test]
    fn no_match_is_empty_not_error() {
        let out = engine().search("zzzz", SearchOptions::default(), &NoClock).unwrap();
        assert!(out.trails.is_empty());
        assert!(engine().search("  ", SearchOptions::default(), &NoClock).is_err());
    }

    #[test]
    fn search_reads_no_rows() {
        let d = dataset();
        let e = Engine::build(&d, EngineConfig::default()).unwrap();
        let before = d.row_reads();
        e.search("bush think", SearchOptions::default(), &NoClock).unwrap();
        assert_eq!(d.row_reads(), before);
    }

    #[test]
    fn parts_must_agree() {
        let e = engine();
        let r = Engine::from_parts(
            e.registry().clone(),
            e.index().clone(),
            LinkGraph::empty(1),
            e.store().clone(),
            EngineConfig::default(),
        );
        assert!(matches!(r, Err(IndexError::Corrupt(_))));
    }
}
