//! Starting points and the Best Trail search.

use alloc::collections::BTreeSet;
use alloc::vec::Vec;

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use super::tree::{NavigationTree, Phase, Rho};
use super::{ScoreTable, Trail, TrailScoreParams};
use crate::index::NodeId;
use crate::linkgraph::LinkGraph;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BestTrailParams {
    /// Trees grown per starting point and metric (`M`).
    pub repetitions: u32,
    pub explore_iterations: u32,
    pub converge_iterations: u32,
    /// Discrimination factor `df`; 0 makes convergence greedy.
    pub discrimination: f64,
    /// Number of starting points (`K`).
    pub starting_points: usize,
    /// Largest navigation tree, in node occurrences.
    pub max_tree: usize,
    pub seed: u64,
}

impl Default for BestTrailParams {
    fn default() -> Self {
        Self {
            repetitions: 3,
            explore_iterations: 40,
            converge_iterations: 40,
            discrimination: 0.5,
            starting_points: 10,
            max_tree: 2000,
            seed: 0,
        }
    }
}

/// The `k` admissible nodes with the highest `score · (1 + gain)`, where
/// `gains` is indexed by node. Nodes with zero score never start a trail.
pub fn select_starting_points(table: &ScoreTable, gains: &[f64], k: usize) -> Vec<NodeId> {
    let mut ranked: Vec<(f64, NodeId)> = table
        .scored()
        .filter(|(n, s)| s.score > 0.0 && table.admissible(*n))
        .map(|(n, s)| (s.score * (1.0 + gains.get(n.index()).copied().unwrap_or(0.0)), n))
        .collect();
    ranked.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    ranked.into_iter().take(k).map(|(_, n)| n).collect()
}

fn uniform(rng: &mut ChaCha8Rng) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Grows one tree per starting point, metric and repetition and collects the
/// best trail of each, dropping repeats. Every tree draws from its own random
/// stream, so results depend only on the parameters.
pub fn run_best_trail(
    starts: &[NodeId],
    table: &ScoreTable,
    graph: &LinkGraph,
    params: &BestTrailParams,
    scoring: &TrailScoreParams,
) -> Vec<Trail> {
    let mut seen: BTreeSet<Vec<NodeId>> = BTreeSet::new();
    let mut out = Vec::new();
    for (si, &start) in starts.iter().enumerate() {
        for (ri, rho) in [Rho::Mu1, Rho::Mu2].into_iter().enumerate() {
            for rep in 0..params.repetitions {
                let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
                rng.set_stream(((si as u64) << 32) | ((ri as u64) << 16) | u64::from(rep));
                let nodes = grow(start, rho, table, graph, params, scoring, &mut rng);
                if seen.insert(nodes.clone()) {
                    out.push(Trail::evaluate(nodes, table, scoring));
                }
            }
        }
    }
    out
}

fn grow(
    start: NodeId,
    rho: Rho,
    table: &ScoreTable,
    graph: &LinkGraph,
    params: &BestTrailParams,
    scoring: &TrailScoreParams,
    rng: &mut ChaCha8Rng,
) -> Vec<NodeId> {
    let mut tree = NavigationTree::new(start, rho, table, *scoring, params.max_tree);
    let explore = (0..params.explore_iterations).map(|_| Phase::Explore);
    let converge = (0..params.converge_iterations).map(|j| Phase::Converge {
        df: params.discrimination,
        iteration: j,
        iterations: params.converge_iterations,
    });
    for phase in explore.chain(converge) {
        let u = uniform(rng);
        let Ok(tip) = tree.select(phase, u) else { break };
        tree.expand(tip, graph);
    }
    tree.best()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::query::TermSet;
    use crate::trail::NodeScore;
    use alloc::vec;

    fn n(i: u32) -> NodeId {
        NodeId(i)
    }

    fn table(pairs: &[(u32, f64, u64)]) -> ScoreTable {
        ScoreTable::from_parts(
            pairs.iter().map(|&(i, s, m)| (n(i), NodeScore { score: s, matched: TermSet(m) })),
            [],
            TermSet::EMPTY,
        )
    }

    #[test]
    fn connected_node_starts_first_on_equal_scores() {
        let g = LinkGraph::from_references(3, [(n(1), n(2))]);
        let t = table(&[(0, 0.5, 1), (1, 0.5, 1)]);
        let gains = g.potential_gains(Default::default());
        assert_eq!(select_starting_points(&t, &gains, 10), vec![n(1), n(0)]);
        assert_eq!(select_starting_points(&t, &gains, 1), vec![n(1)]);
        assert!(select_starting_points(&table(&[]), &gains, 10).is_empty());
    }

    #[test]
    fn isolated_start_gives_singleton() {
        let g = LinkGraph::empty(2);
        let t = table(&[(0, 0.7, 1)]);
        let out = run_best_trail(&[n(0)], &t, &g, &BestTrailParams::default(), &TrailScoreParams::default());
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].nodes, vec![n(0)]);
    }

    #[test]
    fn joins_two_terms_through_a_connector() {
        // 0 (term a) - 1 (no match) - 2 (term b)
        let g = LinkGraph::from_references(3, [(n(1), n(0)), (n(1), n(2))]);
        let t = table(&[(0, 0.8, 0b01), (2, 0.6, 0b10)]);
        let out = run_best_trail(&[n(0)], &t, &g, &BestTrailParams::default(), &TrailScoreParams::default());
        assert!(out.iter().any(|tr| tr.nodes == vec![n(0), n(1), n(2)]));
    }

    #[test]
    fn same_seed_same_trails() {
        let g = LinkGraph::from_references(5, [(n(0), n(1)), (n(1), n(2)), (n(2), n(3)), (n(3), n(4)), (n(4), n(0))]);
        let t = table(&[(0, 0.3, 1), (2, 0.9, 2), (4, 0.1, 1)]);
        let p = BestTrailParams { seed: 42, ..Default::default() };
        let s = TrailScoreParams::default();
        let a = run_best_trail(&[n(0), n(2)], &t, &g, &p, &s);
        let b = run_best_trail(&[n(0), n(2)], &t, &g, &p, &s);
        assert_eq!(a, b);
    }
}
