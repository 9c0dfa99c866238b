//! Trails: node scoring, trail metrics and ranking.
//!
//! A trail is a sequence of graph-adjacent nodes (revisits allowed). Two
//! metrics score a trail:
//!
//! - `mu1`: the sum of the scores of its *distinct* nodes divided by
//!   `len + c`;
//! - `mu2`: `Σ_i pos^i · rep^k_i · s_i`, where `k_i` counts earlier
//!   occurrences of the node at position `i`.
//!
//! Ranking compares, in order: distinct query terms covered by the trail, the
//! most terms covered by any single node, and the `mu1` score.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec::Vec;
use core::cmp::Ordering;

use crate::index::NodeId;
use crate::query::{Query, QueryContext, TermSet};

mod best;
mod filter;
mod summary;
mod tree;

pub use best::{run_best_trail, select_starting_points, BestTrailParams};
pub use filter::{filter_trails, NodeContent};
pub use summary::{summarize_node, Summary, SNIPPET_TOKENS};
pub use tree::{NavigationTree, Phase, Rho, SelectError, TipId};

/// Floor added to tip scores so zero-score regions can still be explored.
pub const EPSILON: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrailScoreParams {
    /// `c` in `mu1`; > 0.
    pub length_damping: f64,
    /// Per-position weight in `mu2`; in (0, 1].
    pub position_discount: f64,
    /// Per-repetition weight in `mu2`; in (0, 1).
    pub repetition_discount: f64,
}

impl Default for TrailScoreParams {
    fn default() -> Self {
        Self { length_damping: 1.0, position_discount: 0.75, repetition_discount: 0.25 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NodeScore {
    pub score: f64,
    pub matched: TermSet,
}

/// Query-dependent node scores. Only matching, admissible nodes are stored;
/// every other node scores zero.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ScoreTable {
    scores: BTreeMap<NodeId, NodeScore>,
    excluded: BTreeSet<NodeId>,
    required: TermSet,
}

impl ScoreTable {
    /// Sums, per node, the posting weights of the positive terms it matches.
    /// Nodes matching any excluded term are barred and score zero.
    pub fn compute(query: &Query, ctx: &QueryContext<'_>) -> Self {
        let mut excluded = BTreeSet::new();
        for t in query.excluded_terms() {
            excluded.extend(ctx.term_matches(t).into_iter().map(|(n, _)| n));
        }
        let mut scores: BTreeMap<NodeId, NodeScore> = BTreeMap::new();
        for (i, t) in query.positive_terms().enumerate() {
            for (node, w) in ctx.term_matches(t) {
                if excluded.contains(&node) {
                    continue;
                }
                let e = scores.entry(node).or_insert(NodeScore { score: 0.0, matched: TermSet::EMPTY });
                e.score += w;
                e.matched.insert(i);
            }
        }
        Self { scores, excluded, required: query.required_set() }
    }

    /// A table from explicit values, for synthetic graphs.
    pub fn from_parts(
        scores: impl IntoIterator<Item = (NodeId, NodeScore)>,
        excluded: impl IntoIterator<Item = NodeId>,
        required: TermSet,
    ) -> Self {
        let excluded: BTreeSet<NodeId> = excluded.into_iter().collect();
        let scores = scores.into_iter().filter(|(n, _)| !excluded.contains(n)).collect();
        Self { scores, excluded, required }
    }

    pub fn score(&self, node: NodeId) -> f64 {
        self.scores.get(&node).map_or(0.0, |s| s.score)
    }

    pub fn matched(&self, node: NodeId) -> TermSet {
        self.scores.get(&node).map_or(TermSet::EMPTY, |s| s.matched)
    }

    pub fn admissible(&self, node: NodeId) -> bool {
        !self.excluded.contains(&node)
    }

    pub fn required(&self) -> TermSet {
        self.required
    }

    /// Scored nodes in ascending id order.
    pub fn scored(&self) -> impl Iterator<Item = (NodeId, NodeScore)> + '_ {
        self.scores.iter().map(|(n, s)| (*n, *s))
    }

    pub fn excluded(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.excluded.iter().copied()
    }
}

/// Score of a single node for a query; zero when it matches nothing or is
/// barred by an excluded term.
pub fn node_score(query: &Query, ctx: &QueryContext<'_>, node: NodeId) -> f64 {
    match ctx.node_matches(query, node) {
        Ok(m) if m.admissible => {
            let mut total = 0.0;
            for (i, t) in query.positive_terms().enumerate() {
                if m.matched_terms.contains(i) {
                    total += ctx.term_matches(t).into_iter().find(|(n, _)| *n == node).map_or(0.0, |(_, w)| w);
                }
            }
            total
        }
        _ => 0.0,
    }
}

pub fn score_trail_mu1(nodes: &[NodeId], table: &ScoreTable, params: &TrailScoreParams) -> f64 {
    let mut seen = BTreeSet::new();
    let mut sum = 0.0;
    for &n in nodes {
        if seen.insert(n) {
            sum += table.score(n);
        }
    }
    sum / (nodes.len() as f64 + params.length_damping)
}

pub fn score_trail_mu2(nodes: &[NodeId], table: &ScoreTable, params: &TrailScoreParams) -> f64 {
    let mut seen: BTreeMap<NodeId, i32> = BTreeMap::new();
    let mut total = 0.0;
    for (i, &n) in nodes.iter().enumerate() {
        let reps = seen.entry(n).or_insert(0);
        let position_weight = libm::pow(params.position_discount, i as f64);
        total += position_weight * libm::pow(params.repetition_discount, f64::from(*reps)) * table.score(n);
        *reps += 1;
    }
    total
}

/// A candidate or result trail with its ranking key.
#[derive(Debug, Clone, PartialEq)]
pub struct Trail {
    pub nodes: Vec<NodeId>,
    /// Positive query terms matched by any node.
    pub terms: TermSet,
    /// Most positive terms matched by one node.
    pub max_node_terms: u32,
    /// `mu1` score.
    pub score: f64,
}

impl Trail {
    pub fn evaluate(nodes: Vec<NodeId>, table: &ScoreTable, params: &TrailScoreParams) -> Self {
        let mut terms = TermSet::EMPTY;
        let mut max_node_terms = 0;
        for &n in &nodes {
            let m = table.matched(n);
            terms = terms.union(m);
            max_node_terms = max_node_terms.max(m.len());
        }
        let score = score_trail_mu1(&nodes, table, params);
        Self { nodes, terms, max_node_terms, score }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

/// Ranking order: `Less` means `a` ranks ahead of `b`.
pub fn compare_trails(a: &Trail, b: &Trail) -> Ordering {
    compare_keys((a.terms.len(), a.max_node_terms, a.score), (b.terms.len(), b.max_node_terms, b.score))
}

pub(crate) fn compare_keys(a: (u32, u32, f64), b: (u32, u32, f64)) -> Ordering {
    b.0.cmp(&a.0).then(b.1.cmp(&a.1)).then(b.2.total_cmp(&a.2))
}

/// Stable sort into ranking order.
pub fn rank_trails(mut trails: Vec<Trail>) -> Vec<Trail> {
    trails.sort_by(compare_trails);
    trails
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use proptest::prelude::*;

    fn n(i: u32) -> NodeId {
        NodeId(i)
    }

    fn table(scores: &[(u32, f64, u64)]) -> ScoreTable {
        ScoreTable::from_parts(
            scores.iter().map(|&(id, s, m)| (n(id), NodeScore { score: s, matched: TermSet(m) })),
            [],
            TermSet::EMPTY,
        )
    }

    #[test]
    fn mu1_examples() {
        let p = TrailScoreParams::default();
        let t = table(&[(0, 0.6, 1), (1, 0.4, 2), (5, 0.8, 1)]);
        assert_eq!(score_trail_mu1(&[n(5)], &t, &p), 0.4);
        let ab = score_trail_mu1(&[n(0), n(1)], &t, &p);
        assert!((ab - 1.0 / 3.0).abs() < 1e-12);
        let aba = score_trail_mu1(&[n(0), n(1), n(0)], &t, &p);
        assert!((aba - 0.25).abs() < 1e-12);
        assert!(aba < ab);
    }

    #[test]
    fn mu2_examples() {
        let p = TrailScoreParams { length_damping: 1.0, position_discount: 0.75, repetition_discount: 0.25 };
        let t = table(&[(0, 0.6, 1), (1, 0.4, 2), (2, 0.5, 1)]);
        assert_eq!(score_trail_mu2(&[n(2)], &t, &p), 0.5);
        assert!((score_trail_mu2(&[n(0), n(1)], &t, &p) - 0.9).abs() < 1e-12);
        assert!((score_trail_mu2(&[n(2), n(2)], &t, &p) - 0.59375).abs() < 1e-12);
    }

    #[test]
    fn coverage_dominates_score() {
        let p = TrailScoreParams::default();
        let t = table(&[(0, 0.1, 0b01), (1, 0.1, 0b10), (2, 5.0, 0b01), (3, 0.2, 0b11)]);
        let two = Trail::evaluate(vec![n(0), n(1)], &t, &p);
        let one = Trail::evaluate(vec![n(2)], &t, &p);
        let both = Trail::evaluate(vec![n(3)], &t, &p);
        let ranked = rank_trails(vec![one.clone(), two.clone(), both.clone()]);
        assert_eq!(ranked, vec![both, two, one]);
    }

    #[test]
    fn excluded_nodes_score_zero() {
        let t = ScoreTable::from_parts([(n(1), NodeScore { score: 0.7, matched: TermSet(1) })], [n(1)], TermSet::EMPTY);
        assert_eq!(t.score(n(1)), 0.0);
        assert!(!t.admissible(n(1)));
        assert!(t.admissible(n(2)));
    }

    fn arb_trail() -> impl Strategy<Value = Trail> {
        (0u32..4, 0u32..4, 0u32..3).prop_map(|(terms, max, s)| Trail {
            nodes: vec![],
            terms: TermSet((1u64 << terms) - 1),
            max_node_terms: max,
            score: f64::from(s) * 0.25,
        })
    }

    proptest! {
        #[test]
        fn comparator_is_a_total_preorder(a in arb_trail(), b in arb_trail(), c in arb_trail()) {
            let ab = compare_trails(&a, &b);
            prop_assert_eq!(ab, compare_trails(&b, &a).reverse());
            if ab != Ordering::Greater && compare_trails(&b, &c) != Ordering::Greater {
                prop_assert!(compare_trails(&a, &c) != Ordering::Greater);
            }
        }

        #[test]
        fn ranking_is_stable(trails in prop::collection::vec(arb_trail(), 0..12)) {
            let tagged: Vec<Trail> = trails
                .into_iter()
                .enumerate()
                .map(|(i, mut t)| { t.nodes = vec![n(i as u32)]; t })
                .collect();
            let ranked = rank_trails(tagged);
            for w in ranked.windows(2) {
                let ord = compare_trails(&w[0], &w[1]);
                prop_assert!(ord != Ordering::Greater);
                if ord == Ordering::Equal {
                    prop_assert!(w[0].nodes[0] < w[1].nodes[0]);
                }
            }
        }
    }
}
