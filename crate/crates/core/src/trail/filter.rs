//! Redundancy filtering of candidate trails.

use alloc::vec::Vec;

use super::{rank_trails, ScoreTable, Trail, TrailScoreParams};
use crate::index::NodeId;
use crate::linkgraph::LinkGraph;

/// Source of the text a node's duplicate check compares.
pub trait NodeContent {
    fn content(&self, node: NodeId) -> Option<&str>;
}

/// Cleans each trail, drops those missing a required term, ranks the rest and
/// removes trails contained in a better one.
///
/// Per trail:
/// 1. zero-score nodes are trimmed from both ends;
/// 2. a node whose content repeats an earlier node's is spliced out when its
///    neighbours are adjacent; a revisit of the same node drops the loop in
///    between; otherwise the trail is cut before or at it. Each step applies
///    only if term coverage survives;
/// 3. ends are trimmed again.
///
/// Across trails, a trail whose node sequence, read either way, occurs
/// contiguously inside a higher ranked trail is dropped.
pub fn filter_trails(
    trails: Vec<Trail>,
    table: &ScoreTable,
    graph: &LinkGraph,
    content: &dyn NodeContent,
    scoring: &TrailScoreParams,
) -> Vec<Trail> {
    let cleaned: Vec<Trail> = trails
        .into_iter()
        .filter_map(|t| {
            let mut nodes = trim(t.nodes, table);
            nodes = remove_duplicates(nodes, table, graph, content);
            nodes = trim(nodes, table);
            if nodes.is_empty() {
                return None;
            }
            let t = Trail::evaluate(nodes, table, scoring);
            t.terms.is_superset(table.required()).then_some(t)
        })
        .collect();
    let mut kept: Vec<Trail> = Vec::new();
    for t in rank_trails(cleaned) {
        let reversed: Vec<NodeId> = t.nodes.iter().rev().copied().collect();
        if !kept.iter().any(|k| contains_run(&k.nodes, &t.nodes) || contains_run(&k.nodes, &reversed)) {
            kept.push(t);
        }
    }
    kept
}

fn trim(mut nodes: Vec<NodeId>, table: &ScoreTable) -> Vec<NodeId> {
    let Some(last) = nodes.iter().rposition(|&n| table.score(n) > 0.0) else {
        return Vec::new();
    };
    nodes.truncate(last + 1);
    let first = nodes.iter().position(|&n| table.score(n) > 0.0).unwrap_or(0);
    nodes.drain(..first);
    nodes
}

fn coverage(nodes: &[NodeId], table: &ScoreTable) -> (u32, u32) {
    let mut terms = crate::query::TermSet::EMPTY;
    let mut max = 0;
    for &n in nodes {
        let m = table.matched(n);
        terms = terms.union(m);
        max = max.max(m.len());
    }
    (terms.len(), max)
}

fn remove_duplicates(
    mut nodes: Vec<NodeId>,
    table: &ScoreTable,
    graph: &LinkGraph,
    content: &dyn NodeContent,
) -> Vec<NodeId> {
    let target = coverage(&nodes, table);
    let mut i = 1;
    while i < nodes.len() {
        let text = content.content(nodes[i]);
        let repeated = nodes[..i].iter().any(|&p| p == nodes[i] || (text.is_some() && content.content(p) == text));
        if !repeated {
            i += 1;
            continue;
        }
        let splice_ok = i + 1 == nodes.len() || graph.are_adjacent(nodes[i - 1], nodes[i + 1]);
        if splice_ok {
            let mut spliced = nodes.clone();
            spliced.remove(i);
            if coverage(&spliced, table) == target {
                nodes = spliced;
                continue;
            }
        }
        if let Some(j) = nodes[..i].iter().position(|&p| p == nodes[i]) {
            let mut looped: Vec<NodeId> = nodes[..j].to_vec();
            looped.extend_from_slice(&nodes[i..]);
            if coverage(&looped, table) == target {
                nodes = looped;
                i = j + 1;
                continue;
            }
        }
        if coverage(&nodes[..i], table) == target {
            nodes.truncate(i);
            break;
        }
        if coverage(&nodes[i..], table) == target {
            nodes.drain(..i);
            i = 1;
            continue;
        }
        i += 1;
    }
    nodes
}

fn contains_run(haystack: &[NodeId], needle: &[NodeId]) -> bool {
    needle.len() <= haystack.len() && haystack.windows(needle.len()).any(|w| w == needle)
}
