//! Node registry and inverted file.
//!
//! Every row gets a dense 32-bit [`NodeId`]; the registry maps it back to the
//! row's primary key, so postings and graph edges never carry raw keys.
//!
//! The inverted file is built in two phases. [`IndexBuilder`] collects raw
//! term frequencies per document; [`IndexBuilder::finalize`] then applies
//!
//! ```text
//! w(t, d) = (1 + ln tf(t, d)) * ln(1 + N / n_t)
//! ```
//!
//! and divides by the Euclidean norm of the document's keyword vector, so
//! every document has unit length. Attribute names count as keywords (one
//! occurrence per element). `(attribute, token)` pairs are posted with the
//! same normalized weight as the token itself.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::relational::RowKey;
use crate::vdoc::{token_strs, VirtualDocument};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(pub u32);

impl NodeId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum IndexError {
    #[error("row {0} is already registered")]
    DuplicateRegistration(RowKey),
    #[error("unknown node {0}")]
    UnknownNode(NodeId),
    #[error("node {0} is already indexed")]
    AlreadyIndexed(NodeId),
    #[error("node id space exhausted")]
    Exhausted,
    #[error("corrupt index: {0}")]
    Corrupt(String),
}

/// Two-way mapping between node ids and row keys.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct NodeRegistry {
    forward: Vec<RowKey>,
    backward: BTreeMap<RowKey, NodeId>,
}

impl NodeRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register(&mut self, key: RowKey) -> Result<NodeId, IndexError> {
        if self.backward.contains_key(&key) {
            return Err(IndexError::DuplicateRegistration(key));
        }
        let id = u32::try_from(self.forward.len()).map_err(|_| IndexError::Exhausted)?;
        let id = NodeId(id);
        self.backward.insert(key.clone(), id);
        self.forward.push(key);
        Ok(id)
    }

    pub fn resolve(&self, id: NodeId) -> Result<&RowKey, IndexError> {
        self.forward.get(id.index()).ok_or(IndexError::UnknownNode(id))
    }

    pub fn lookup(&self, key: &RowKey) -> Option<NodeId> {
        self.backward.get(key).copied()
    }

    pub fn contains(&self, id: NodeId) -> bool {
        id.index() < self.forward.len()
    }

    pub fn len(&self) -> usize {
        self.forward.len()
    }

    pub fn is_empty(&self) -> bool {
        self.forward.is_empty()
    }

    /// Keys in node order.
    pub fn iter(&self) -> impl Iterator<Item = (NodeId, &RowKey)> {
        self.forward.iter().enumerate().map(|(i, k)| (NodeId(i as u32), k))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Posting {
    pub node: NodeId,
    pub weight: f64,
}

#[derive(Debug)]
struct PendingDoc {
    node: NodeId,
    tf: BTreeMap<String, u32>,
    pairs: BTreeSet<(String, String)>,
}

/// First build phase: raw term statistics.
#[derive(Debug, Default)]
pub struct IndexBuilder {
    docs: Vec<PendingDoc>,
    seen: BTreeSet<NodeId>,
}

impl IndexBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_document(&mut self, node: NodeId, doc: &VirtualDocument) -> Result<(), IndexError> {
        if !self.seen.insert(node) {
            return Err(IndexError::AlreadyIndexed(node));
        }
        let mut tf = BTreeMap::new();
        let mut pairs = BTreeSet::new();
        for e in &doc.elements {
            for t in token_strs(&e.attribute) {
                *tf.entry(t).or_insert(0) += 1;
            }
            let attribute = e.attribute.to_lowercase();
            for t in token_strs(&e.text) {
                pairs.insert((attribute.clone(), t.clone()));
                *tf.entry(t).or_insert(0) += 1;
            }
        }
        self.docs.push(PendingDoc { node, tf, pairs });
        Ok(())
    }

    /// Second phase: corpus-wide idf and per-document normalization.
    pub fn finalize(self) -> InvertedIndex {
        let doc_count = self.docs.len() as u32;
        let n = f64::from(doc_count);
        let mut df: BTreeMap<&str, u32> = BTreeMap::new();
        for d in &self.docs {
            for t in d.tf.keys() {
                *df.entry(t.as_str()).or_insert(0) += 1;
            }
        }
        let idf: BTreeMap<&str, f64> = df.iter().map(|(t, &nt)| (*t, libm::log(1.0 + n / f64::from(nt)))).collect();

        let mut terms: BTreeMap<String, Vec<Posting>> = BTreeMap::new();
        let mut pairs: BTreeMap<(String, String), Vec<Posting>> = BTreeMap::new();
        let mut doc_norms = BTreeMap::new();
        for d in &self.docs {
            if d.tf.is_empty() {
                continue;
            }
            let raw: Vec<(&String, f64)> =
                d.tf.iter().map(|(t, &tf)| (t, (1.0 + libm::log(f64::from(tf))) * idf[t.as_str()])).collect();
            let norm = libm::sqrt(raw.iter().map(|(_, w)| w * w).sum::<f64>());
            doc_norms.insert(d.node, norm);
            let mut normalized = BTreeMap::new();
            for (t, w) in raw {
                let weight = w / norm;
                normalized.insert(t.as_str(), weight);
                terms.entry(t.clone()).or_default().push(Posting { node: d.node, weight });
            }
            for (a, t) in &d.pairs {
                let weight = normalized[t.as_str()];
                pairs.entry((a.clone(), t.clone())).or_default().push(Posting { node: d.node, weight });
            }
        }
        for list in terms.values_mut().chain(pairs.values_mut()) {
            list.sort_by_key(|p| p.node);
        }
        InvertedIndex { terms, pairs, doc_count, doc_norms }
    }
}

/// The finalized, immutable inverted file.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct InvertedIndex {
    terms: BTreeMap<String, Vec<Posting>>,
    pairs: BTreeMap<(String, String), Vec<Posting>>,
    doc_count: u32,
    doc_norms: BTreeMap<NodeId, f64>,
}

impl InvertedIndex {
    /// Reassembles a persisted index, checking posting-list invariants.
    pub fn from_parts(
        doc_count: u32,
        terms: BTreeMap<String, Vec<Posting>>,
        pairs: BTreeMap<(String, String), Vec<Posting>>,
        doc_norms: BTreeMap<NodeId, f64>,
    ) -> Result<Self, IndexError> {
        for (name, list) in
            terms.iter().map(|(t, l)| (t.as_str(), l)).chain(pairs.iter().map(|((_, t), l)| (t.as_str(), l)))
        {
            if list.windows(2).any(|w| w[0].node >= w[1].node) {
                return Err(IndexError::Corrupt(alloc::format!("postings for `{name}` not strictly sorted")));
            }
            if list.iter().any(|p| !(p.weight > 0.0 && p.weight.is_finite())) {
                return Err(IndexError::Corrupt(alloc::format!("non-positive weight for `{name}`")));
            }
        }
        if doc_norms.values().any(|n| !(*n > 0.0 && n.is_finite())) {
            return Err(IndexError::Corrupt("non-positive document norm".into()));
        }
        Ok(Self { terms, pairs, doc_count, doc_norms })
    }

    pub fn postings_for_term(&self, term: &str) -> &[Posting] {
        self.terms.get(term).map_or(&[], Vec::as_slice)
    }

    /// Postings of `term` inside elements named `attribute` (any case).
    pub fn postings_for_pair(&self, attribute: &str, term: &str) -> &[Posting] {
        let key = (attribute.to_lowercase(), String::from(term));
        self.pairs.get(&key).map_or(&[], Vec::as_slice)
    }

    /// Weight of `term` in `node`'s document, if the term occurs there.
    pub fn term_weight(&self, term: &str, node: NodeId) -> Option<f64> {
        find(self.postings_for_term(term), node)
    }

    pub fn pair_weight(&self, attribute: &str, term: &str, node: NodeId) -> Option<f64> {
        find(self.postings_for_pair(attribute, term), node)
    }

    /// Number of documents seen at build time, including empty ones.
    pub fn doc_count(&self) -> u32 {
        self.doc_count
    }

    /// Pre-normalization length of a document's keyword vector.
    pub fn doc_norm(&self, node: NodeId) -> Option<f64> {
        self.doc_norms.get(&node).copied()
    }

    pub fn doc_norms(&self) -> &BTreeMap<NodeId, f64> {
        &self.doc_norms
    }

    pub fn terms(&self) -> impl Iterator<Item = (&str, &[Posting])> {
        self.terms.iter().map(|(t, l)| (t.as_str(), l.as_slice()))
    }

    pub fn pairs(&self) -> impl Iterator<Item = ((&str, &str), &[Posting])> {
        self.pairs.iter().map(|((a, t), l)| ((a.as_str(), t.as_str()), l.as_slice()))
    }

    pub fn term_count(&self) -> usize {
        self.terms.len()
    }

    pub fn pair_count(&self) -> usize {
        self.pairs.len()
    }

    /// Σ weight² per document over keyword postings.
    pub fn squared_norms(&self) -> BTreeMap<NodeId, f64> {
        let mut out = BTreeMap::new();
        for list in self.terms.values() {
            for p in list {
                *out.entry(p.node).or_insert(0.0) += p.weight * p.weight;
            }
        }
        out
    }
}

fn find(list: &[Posting], node: NodeId) -> Option<f64> {
    list.binary_search_by_key(&node, |p| p.node).ok().map(|i| list[i].weight)
}
