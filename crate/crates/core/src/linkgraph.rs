//! The link graph: one undirected edge per foreign-key value that matches an
//! existing row, with the reference direction kept for backlinks.

use alloc::vec;
use alloc::vec::Vec;

use crate::index::{IndexError, NodeId, NodeRegistry};
use crate::relational::{Dataset, RowKey};

/// Parameters of the potential-gain metric
/// `PG(u) = Σ_{i=1..depth} discount^i · walks_i(u)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PotentialGainParams {
    /// Per-step discount, in (0, 1).
    pub discount: f64,
    /// Longest walk counted.
    pub depth: u32,
}

impl Default for PotentialGainParams {
    fn default() -> Self {
        Self { discount: 0.5, depth: 3 }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LinkGraph {
    adjacency: Vec<Vec<NodeId>>,
    referrers: Vec<Vec<NodeId>>,
}

impl LinkGraph {
    /// A graph over `node_count` nodes with no edges.
    pub fn empty(node_count: usize) -> Self {
        Self { adjacency: vec![Vec::new(); node_count], referrers: vec![Vec::new(); node_count] }
    }

    /// Builds the graph from directed references `(referrer, referenced)`.
    /// Self references are dropped; repeated references collapse.
    pub fn from_references(node_count: usize, refs: impl IntoIterator<Item = (NodeId, NodeId)>) -> Self {
        let mut g = Self::empty(node_count);
        for (from, to) in refs {
            if from == to {
                continue;
            }
            g.adjacency[from.index()].push(to);
            g.adjacency[to.index()].push(from);
            g.referrers[to.index()].push(from);
        }
        for list in g.adjacency.iter_mut().chain(g.referrers.iter_mut()) {
            list.sort_unstable();
            list.dedup();
        }
        g
    }

    /// Scans every row and links it to the rows its foreign-key values name.
    /// Null and dangling values produce no edge.
    pub fn build(dataset: &Dataset, registry: &NodeRegistry) -> Self {
        let schema = dataset.schema();
        let mut refs = Vec::new();
        for (key, row) in dataset.scan() {
            let Some(from) = registry.lookup(key) else { continue };
            let Some((ti, _)) = schema.table(&row.table) else { continue };
            for fk in schema.foreign_keys(ti) {
                let Some(value) = &row.values[fk.column] else { continue };
                let target_name = &schema.tables()[fk.target_table].name;
                let target = RowKey::new(target_name.clone(), vec![value.clone()]);
                if let Some(to) = registry.lookup(&target) {
                    refs.push((from, to));
                }
            }
        }
        Self::from_references(registry.len(), refs)
    }

    pub fn node_count(&self) -> usize {
        self.adjacency.len()
    }

    /// Directed adjacency entries; twice the number of undirected edges.
    pub fn adjacency_entries(&self) -> usize {
        self.adjacency.iter().map(Vec::len).sum()
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency_entries() / 2
    }

    pub fn contains(&self, node: NodeId) -> bool {
        node.index() < self.adjacency.len()
    }

    /// Sorted, deduplicated neighbours.
    pub fn neighbors(&self, node: NodeId) -> Result<&[NodeId], IndexError> {
        self.adjacency.get(node.index()).map(Vec::as_slice).ok_or(IndexError::UnknownNode(node))
    }

    /// Nodes whose rows hold a foreign-key value pointing at `node`.
    pub fn backlinks(&self, node: NodeId) -> Result<&[NodeId], IndexError> {
        self.referrers.get(node.index()).map(Vec::as_slice).ok_or(IndexError::UnknownNode(node))
    }

    pub fn are_adjacent(&self, a: NodeId, b: NodeId) -> bool {
        self.adjacency.get(a.index()).is_some_and(|l| l.binary_search(&b).is_ok())
    }

    /// Directed references `(referrer, referenced)`, ordered by referrer.
    pub fn references(&self) -> impl Iterator<Item = (NodeId, NodeId)> + '_ {
        self.referrers.iter().enumerate().flat_map(|(to, froms)| froms.iter().map(move |&f| (f, NodeId(to as u32))))
    }

    /// Potential gain of one node, by expanding walk counts outward from it.
    pub fn potential_gain(&self, node: NodeId, params: PotentialGainParams) -> Result<f64, IndexError> {
        self.neighbors(node)?;
        let mut counts = alloc::collections::BTreeMap::new();
        counts.insert(node, 1.0f64);
        let mut gain = 0.0;
        let mut factor = 1.0;
        for _ in 0..params.depth {
            let mut next = alloc::collections::BTreeMap::new();
            for (&v, &c) in &counts {
                for &w in &self.adjacency[v.index()] {
                    *next.entry(w).or_insert(0.0) += c;
                }
            }
            factor *= params.discount;
            gain += factor * next.values().sum::<f64>();
            counts = next;
        }
        Ok(gain)
    }

    /// Potential gain of every node in one pass per walk length.
    ///
    /// `walks_i(u) = Σ_{v ∈ adj(u)} walks_{i-1}(v)` with `walks_0 = 1`.
    pub fn potential_gains(&self, params: PotentialGainParams) -> Vec<f64> {
        let n = self.adjacency.len();
        let mut walks = vec![1.0f64; n];
        let mut gains = vec![0.0f64; n];
        let mut factor = 1.0;
        for _ in 0..params.depth {
            let next: Vec<f64> = self.adjacency.iter().map(|adj| adj.iter().map(|v| walks[v.index()]).sum()).collect();
            factor *= params.discount;
            for (g, w) in gains.iter_mut().zip(&next) {
                *g += factor * w;
            }
            walks = next;
        }
        gains
    }
}
