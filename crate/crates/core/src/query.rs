//! Query syntax and per-node match predicates.
//!
//! ```text
//! query  := clause+
//! clause := ["+" | "-"] (pair | link | word)
//! pair   := word "=" word
//! link   := "link:" noderef
//! ```
//!
//! Clauses are whitespace separated. Plain clauses are disjunctive; `+` makes
//! a term required for every returned trail and `-` bars every node that
//! matches it. Words are run through the document tokenizer, so a clause such
//! as `b-tree` contributes the keywords `b` and `tree` with the clause's
//! modifier.

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use crate::index::{IndexError, InvertedIndex, NodeId, NodeRegistry};
use crate::linkgraph::LinkGraph;
use crate::relational::RowKey;
use crate::vdoc::token_strs;

/// Queries are limited to this many non-excluded terms.
pub const MAX_TERMS: usize = 64;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum QueryError {
    #[error("empty query")]
    Empty,
    #[error("malformed attribute clause `{0}`")]
    MalformedPair(String),
    #[error("malformed link clause `{0}`")]
    MalformedLink(String),
    #[error("link terms cannot be excluded: `{0}`")]
    ExcludedLink(String),
    #[error("query has no positive terms")]
    NoPositiveTerms,
    #[error("query has more than {MAX_TERMS} terms")]
    TooManyTerms,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Modifier {
    Default,
    Required,
    Excluded,
}

/// A row reference inside `link:`. Either a bare node number or a row path
/// `table/pk...` (optionally prefixed with `/row/`).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeRef(pub String);

impl NodeRef {
    pub fn resolve(&self, registry: &NodeRegistry) -> Option<NodeId> {
        let s = self.0.strip_prefix('#').unwrap_or(&self.0);
        if !s.is_empty() && s.bytes().all(|b| b.is_ascii_digit()) {
            let id = NodeId(s.parse().ok()?);
            return registry.contains(id).then_some(id);
        }
        let path = self.0.strip_prefix("/row/").unwrap_or(&self.0);
        let key = RowKey::from_path(path)?;
        registry.lookup(&key).or_else(|| {
            // Table names are case-insensitive.
            registry
                .iter()
                .find(|(_, k)| k.table.eq_ignore_ascii_case(&key.table) && k.pk_values == key.pk_values)
                .map(|(id, _)| id)
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum TermKind {
    Keyword(String),
    Pair { attribute: String, value: String },
    Link(NodeRef),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct QueryTerm {
    pub kind: TermKind,
    pub modifier: Modifier,
}

impl fmt::Display for QueryTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.modifier {
            Modifier::Default => {}
            Modifier::Required => f.write_str("+")?,
            Modifier::Excluded => f.write_str("-")?,
        }
        match &self.kind {
            TermKind::Keyword(w) => f.write_str(w),
            TermKind::Pair { attribute, value } => write!(f, "{attribute}={value}"),
            TermKind::Link(r) => write!(f, "link:{}", r.0),
        }
    }
}

impl QueryTerm {
    /// The term without its modifier, as shown next to matched nodes.
    pub fn label(&self) -> String {
        QueryTerm { kind: self.kind.clone(), modifier: Modifier::Default }.to_string()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Query {
    pub terms: Vec<QueryTerm>,
    pub raw: String,
}

impl Query {
    /// Terms that contribute to scores (everything not excluded), in order.
    /// Their positions are the bit positions used in [`TermSet`].
    pub fn positive_terms(&self) -> impl Iterator<Item = &QueryTerm> {
        self.terms.iter().filter(|t| t.modifier != Modifier::Excluded)
    }

    pub fn excluded_terms(&self) -> impl Iterator<Item = &QueryTerm> {
        self.terms.iter().filter(|t| t.modifier == Modifier::Excluded)
    }

    /// Bit set of the required terms, in positive-term numbering.
    pub fn required_set(&self) -> TermSet {
        let mut set = TermSet::EMPTY;
        for (i, t) in self.positive_terms().enumerate() {
            if t.modifier == Modifier::Required {
                set.insert(i);
            }
        }
        set
    }

    pub fn positive_len(&self) -> usize {
        self.positive_terms().count()
    }

    /// Labels of the positive terms in `set`.
    pub fn labels(&self, set: TermSet) -> Vec<String> {
        self.positive_terms().enumerate().filter(|(i, _)| set.contains(*i)).map(|(_, t)| t.label()).collect()
    }
}

impl fmt::Display for Query {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, t) in self.terms.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            write!(f, "{t}")?;
        }
        Ok(())
    }
}

pub fn parse_query(s: &str) -> Result<Query, QueryError> {
    let mut terms: Vec<QueryTerm> = Vec::new();
    let mut push = |t: QueryTerm| {
        if !terms.contains(&t) {
            terms.push(t);
        }
    };
    let mut saw_clause = false;
    for clause in s.split_whitespace() {
        saw_clause = true;
        let (modifier, body) = match clause.as_bytes()[0] {
            b'+' => (Modifier::Required, &clause[1..]),
            b'-' => (Modifier::Excluded, &clause[1..]),
            _ => (Modifier::Default, clause),
        };
        if let Some(target) = strip_prefix_ignore_case(body, "link:") {
            if target.is_empty() {
                return Err(QueryError::MalformedLink(clause.to_string()));
            }
            if modifier == Modifier::Excluded {
                return Err(QueryError::ExcludedLink(clause.to_string()));
            }
            push(QueryTerm { kind: TermKind::Link(NodeRef(target.to_string())), modifier });
        } else if let Some((attribute, value)) = body.split_once('=') {
            let attribute = attribute.to_lowercase();
            let values: Vec<String> = token_strs(value).collect();
            if attribute.is_empty() || values.is_empty() {
                return Err(QueryError::MalformedPair(clause.to_string()));
            }
            for value in values {
                push(QueryTerm { kind: TermKind::Pair { attribute: attribute.clone(), value }, modifier });
            }
        } else {
            for w in token_strs(body) {
                push(QueryTerm { kind: TermKind::Keyword(w), modifier });
            }
        }
    }
    if terms.is_empty() {
        return Err(if saw_clause { QueryError::NoPositiveTerms } else { QueryError::Empty });
    }
    let positive = terms.iter().filter(|t| t.modifier != Modifier::Excluded).count();
    if positive == 0 {
        return Err(QueryError::NoPositiveTerms);
    }
    if positive > MAX_TERMS {
        return Err(QueryError::TooManyTerms);
    }
    Ok(Query { terms, raw: s.to_string() })
}

fn strip_prefix_ignore_case<'a>(s: &'a str, prefix: &str) -> Option<&'a str> {
    let head = s.get(..prefix.len())?;
    head.eq_ignore_ascii_case(prefix).then(|| &s[prefix.len()..])
}

/// A set of positive-term positions.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TermSet(pub u64);

impl TermSet {
    pub const EMPTY: TermSet = TermSet(0);

    pub fn insert(&mut self, i: usize) {
        self.0 |= 1 << i;
    }

    pub fn contains(self, i: usize) -> bool {
        self.0 & (1 << i) != 0
    }

    pub fn union(self, other: TermSet) -> TermSet {
        TermSet(self.0 | other.0)
    }

    pub fn is_superset(self, other: TermSet) -> bool {
        self.0 & other.0 == other.0
    }

    pub fn len(self) -> u32 {
        self.0.count_ones()
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MatchInfo {
    pub matched_terms: TermSet,
    pub admissible: bool,
}

/// Read-only state a query is evaluated against.
#[derive(Debug, Clone, Copy)]
pub struct QueryContext<'a> {
    pub index: &'a InvertedIndex,
    pub registry: &'a NodeRegistry,
    pub graph: &'a LinkGraph,
}

impl QueryContext<'_> {
    /// Nodes matched by one term, with the weight each contributes.
    pub fn term_matches(&self, term: &QueryTerm) -> Vec<(NodeId, f64)> {
        match &term.kind {
            TermKind::Keyword(w) => self.index.postings_for_term(w).iter().map(|p| (p.node, p.weight)).collect(),
            TermKind::Pair { attribute, value } => {
                self.index.postings_for_pair(attribute, value).iter().map(|p| (p.node, p.weight)).collect()
            }
            TermKind::Link(target) => match target.resolve(self.registry) {
                Some(t) => self.graph.backlinks(t).map(|b| b.iter().map(|&n| (n, 1.0)).collect()).unwrap_or_default(),
                None => Vec::new(),
            },
        }
    }

    fn term_weight(&self, term: &QueryTerm, node: NodeId) -> Option<f64> {
        match &term.kind {
            TermKind::Keyword(w) => self.index.term_weight(w, node),
            TermKind::Pair { attribute, value } => self.index.pair_weight(attribute, value, node),
            TermKind::Link(target) => {
                let t = target.resolve(self.registry)?;
                self.graph.backlinks(t).ok()?.binary_search(&node).ok().map(|_| 1.0)
            }
        }
    }

    /// Which positive terms `node` matches, and whether any excluded term
    /// bars it.
    pub fn node_matches(&self, query: &Query, node: NodeId) -> Result<MatchInfo, IndexError> {
        if !self.registry.contains(node) {
            return Err(IndexError::UnknownNode(node));
        }
        let mut matched = TermSet::EMPTY;
        for (i, t) in query.positive_terms().enumerate() {
            if self.term_weight(t, node).is_some() {
                matched.insert(i);
            }
        }
        let admissible = query.excluded_terms().all(|t| self.term_weight(t, node).is_none());
        Ok(MatchInfo { matched_terms: matched, admissible })
    }
}
