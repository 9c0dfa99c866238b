//! Navigation trees.
//!
//! A tree holds node *occurrences*: the same graph node may appear in many
//! places, and every root-to-slot path is a trail. Leaves that can still grow
//! are open tips. Each open tip carries a sampling weight in a [`SumTree`], so
//! probabilistic selection costs `O(log |D|)`; an ordered set of tip keys
//! gives the greedy choice in `O(log |D|)` as well.

use alloc::collections::BTreeSet;
use alloc::vec::Vec;
use core::cmp::Ordering;

use super::{compare_keys, ScoreTable, TrailScoreParams, EPSILON};
use crate::index::NodeId;
use crate::linkgraph::LinkGraph;
use crate::query::TermSet;
use crate::sumtree::SumTree;

/// Which trail metric steers tip selection.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Rho {
    Mu1,
    Mu2,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Phase {
    /// Probability proportional to `rho + eps`.
    Explore,
    /// Probability proportional to `(rho + eps)^(1 + j / (df * iterations + eps))`;
    /// `df == 0` selects the best tip outright.
    Converge { df: f64, iteration: u32, iterations: u32 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum SelectError {
    #[error("no expandable tips")]
    NoTips,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct TipId(pub u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum State {
    Open,
    Closed,
    Interior,
}

#[derive(Debug, Clone)]
struct Slot {
    node: NodeId,
    parent: Option<u32>,
    len: u32,
    distinct_sum: f64,
    mu2: f64,
    terms: TermSet,
    max_terms: u32,
    state: State,
}

/// Greedy order over open tips: higher rho, then smaller node id, then
/// older slot.
#[derive(Debug, Clone, Copy)]
struct TipKey {
    rho: f64,
    node: NodeId,
    slot: u32,
}

impl PartialEq for TipKey {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for TipKey {}
impl PartialOrd for TipKey {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for TipKey {
    fn cmp(&self, other: &Self) -> Ordering {
        other.rho.total_cmp(&self.rho).then(self.node.cmp(&other.node)).then(self.slot.cmp(&other.slot))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Expansion {
    /// Children were added (possibly none, when no admissible neighbour exists).
    Grown(usize),
    /// The tree was too full; the tip is closed instead.
    Blocked,
}

pub struct NavigationTree<'a> {
    slots: Vec<Slot>,
    max_size: usize,
    sampler: SumTree,
    open: BTreeSet<TipKey>,
    sharpened: bool,
    rho: Rho,
    table: &'a ScoreTable,
    params: TrailScoreParams,
}

impl<'a> NavigationTree<'a> {
    pub fn new(root: NodeId, rho: Rho, table: &'a ScoreTable, params: TrailScoreParams, max_size: usize) -> Self {
        let max_size = max_size.max(1);
        let mut tree = Self {
            slots: Vec::new(),
            max_size,
            sampler: SumTree::with_capacity(max_size),
            open: BTreeSet::new(),
            sharpened: false,
            rho,
            table,
            params,
        };
        let s = table.score(root);
        let m = table.matched(root);
        tree.push(Slot {
            node: root,
            parent: None,
            len: 1,
            distinct_sum: s,
            mu2: s,
            terms: m,
            max_terms: m.len(),
            state: State::Open,
        });
        tree
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    pub fn open_tips(&self) -> usize {
        self.open.len()
    }

    fn mu1(&self, s: &Slot) -> f64 {
        s.distinct_sum / (f64::from(s.len) + self.params.length_damping)
    }

    fn rho_of(&self, s: &Slot) -> f64 {
        match self.rho {
            Rho::Mu1 => self.mu1(s),
            Rho::Mu2 => s.mu2,
        }
    }

    /// Score of the trail ending at `tip` under this tree's metric.
    pub fn tip_score(&self, tip: TipId) -> f64 {
        self.rho_of(&self.slots[tip.0 as usize])
    }

    pub fn tip_node(&self, tip: TipId) -> NodeId {
        self.slots[tip.0 as usize].node
    }

    fn push(&mut self, slot: Slot) {
        let id = self.slots.len() as u32;
        let rho = self.rho_of(&slot);
        let node = slot.node;
        self.slots.push(slot);
        self.sampler.set(id as usize, rho + EPSILON);
        self.open.insert(TipKey { rho, node, slot: id });
    }

    fn close(&mut self, id: u32, state: State) {
        let s = &self.slots[id as usize];
        let key = TipKey { rho: self.rho_of(s), node: s.node, slot: id };
        self.open.remove(&key);
        self.sampler.set(id as usize, 0.0);
        self.slots[id as usize].state = state;
    }

    /// Picks an open tip. `u` is a uniform draw in `[0, 1)`.
    pub fn select(&mut self, phase: Phase, u: f64) -> Result<TipId, SelectError> {
        let best = self.open.first().ok_or(SelectError::NoTips)?;
        match phase {
            Phase::Explore if self.sharpened => self.reset_weights(),
            Phase::Explore => {}
            Phase::Converge { df, .. } if df <= 0.0 => return Ok(TipId(best.slot)),
            Phase::Converge { df, iteration, iterations } => {
                let exponent = 1.0 + f64::from(iteration) / (df * f64::from(iterations) + EPSILON);
                let top = best.rho + EPSILON;
                let weights: Vec<(usize, f64)> =
                    self.open.iter().map(|k| (k.slot as usize, libm::pow((k.rho + EPSILON) / top, exponent))).collect();
                self.sampler.rebuild(weights);
                self.sharpened = true;
            }
        }
        let slot = self.sampler.sample(u).ok_or(SelectError::NoTips)?;
        Ok(TipId(slot as u32))
    }

    fn reset_weights(&mut self) {
        let weights: Vec<(usize, f64)> = self.open.iter().map(|k| (k.slot as usize, k.rho + EPSILON)).collect();
        self.sampler.rebuild(weights);
        self.sharpened = false;
    }

    /// Appends one child per admissible neighbour of the tip's node.
    pub fn expand(&mut self, tip: TipId, graph: &LinkGraph) -> Expansion {
        let id = tip.0;
        let parent = self.slots[id as usize].clone();
        debug_assert_eq!(parent.state, State::Open);
        let children: Vec<NodeId> =
            graph.neighbors(parent.node).unwrap_or(&[]).iter().copied().filter(|&n| self.table.admissible(n)).collect();
        if self.slots.len() + children.len() > self.max_size {
            self.close(id, State::Closed);
            return Expansion::Blocked;
        }
        self.close(id, if children.is_empty() { State::Closed } else { State::Interior });
        for &child in &children {
            let reps = self.occurrences(id, child);
            let s = self.table.score(child);
            let m = self.table.matched(child);
            let position_weight = libm::pow(self.params.position_discount, f64::from(parent.len));
            let repetition_weight = libm::pow(self.params.repetition_discount, f64::from(reps));
            self.push(Slot {
                node: child,
                parent: Some(id),
                len: parent.len + 1,
                distinct_sum: if reps == 0 { parent.distinct_sum + s } else { parent.distinct_sum },
                mu2: parent.mu2 + position_weight * repetition_weight * s,
                terms: parent.terms.union(m),
                max_terms: parent.max_terms.max(m.len()),
                state: State::Open,
            });
        }
        Expansion::Grown(children.len())
    }

    /// Occurrences of `node` on the path from the root to `slot`.
    fn occurrences(&self, slot: u32, node: NodeId) -> u32 {
        let mut count = 0;
        let mut at = Some(slot);
        while let Some(i) = at {
            let s = &self.slots[i as usize];
            if s.node == node {
                count += 1;
            }
            at = s.parent;
        }
        count
    }

    pub fn trail_to(&self, slot: TipId) -> Vec<NodeId> {
        let mut nodes = Vec::with_capacity(self.slots[slot.0 as usize].len as usize);
        let mut at = Some(slot.0);
        while let Some(i) = at {
            let s = &self.slots[i as usize];
            nodes.push(s.node);
            at = s.parent;
        }
        nodes.reverse();
        nodes
    }

    /// The highest ranked root-to-slot trail in the tree under the global
    /// ranking order; ties go to the older slot.
    pub fn best(&self) -> Vec<NodeId> {
        let mut best = 0usize;
        for (i, s) in self.slots.iter().enumerate().skip(1) {
            let b = &self.slots[best];
            let key = (s.terms.len(), s.max_terms, self.mu1(s));
            let best_key = (b.terms.len(), b.max_terms, self.mu1(b));
            if compare_keys(key, best_key) == Ordering::Less {
                best = i;
            }
        }
        self.trail_to(TipId(best as u32))
    }

    /// Slot ids of open tips in greedy order.
    pub fn open_in_order(&self) -> Vec<TipId> {
        self.open.iter().map(|k| TipId(k.slot)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trail::NodeScore;
    use alloc::vec;
    use rand_chacha::ChaCha8Rng;
    use rand_core::{RngCore, SeedableRng};

    fn n(i: u32) -> NodeId {
        NodeId(i)
    }

    fn uniform(rng: &mut ChaCha8Rng) -> f64 {
        (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    fn scores(pairs: &[(u32, f64)]) -> ScoreTable {
        ScoreTable::from_parts(
            pairs.iter().map(|&(i, s)| (n(i), NodeScore { score: s, matched: TermSet(1) })),
            [],
            TermSet::EMPTY,
        )
    }

    #[test]
    fn single_tip_is_always_selected() {
        let t = scores(&[(0, 0.3)]);
        let mut tree = NavigationTree::new(n(0), Rho::Mu1, &t, TrailScoreParams::default(), 10);
        for phase in [
            Phase::Explore,
            Phase::Converge { df: 0.0, iteration: 3, iterations: 5 },
            Phase::Converge { df: 0.5, iteration: 3, iterations: 5 },
        ] {
            assert_eq!(tree.select(phase, 0.77).unwrap(), TipId(0));
        }
    }

    #[test]
    fn expansion_adds_admissible_children() {
        // 0 - 1, 0 - 2, 0 - 3 (3 excluded)
        let g = LinkGraph::from_references(4, [(n(0), n(1)), (n(0), n(2)), (n(0), n(3))]);
        let t = ScoreTable::from_parts([(n(0), NodeScore { score: 0.5, matched: TermSet(1) })], [n(3)], TermSet::EMPTY);
        let mut tree = NavigationTree::new(n(0), Rho::Mu1, &t, TrailScoreParams::default(), 10);
        assert_eq!(tree.expand(TipId(0), &g), Expansion::Grown(2));
        assert_eq!(tree.len(), 3);
        assert_eq!(tree.open_tips(), 2);
        assert_eq!(tree.trail_to(TipId(2)), vec![n(0), n(2)]);
    }

    #[test]
    fn full_tree_blocks_expansion() {
        let g = LinkGraph::from_references(3, [(n(0), n(1)), (n(0), n(2))]);
        let t = scores(&[(0, 0.5)]);
        let mut tree = NavigationTree::new(n(0), Rho::Mu1, &t, TrailScoreParams::default(), 2);
        assert_eq!(tree.expand(TipId(0), &g), Expansion::Blocked);
        assert_eq!(tree.len(), 1);
        assert_eq!(tree.open_tips(), 0);
        assert_eq!(tree.select(Phase::Explore, 0.1), Err(SelectError::NoTips));
    }

    #[test]
    fn greedy_selection_takes_the_best_tip() {
        let g = LinkGraph::from_references(4, [(n(0), n(1)), (n(0), n(2)), (n(0), n(3))]);
        let t = scores(&[(0, 0.1), (1, 0.2), (2, 0.9), (3, 0.9)]);
        let mut tree = NavigationTree::new(n(0), Rho::Mu1, &t, TrailScoreParams::default(), 10);
        tree.expand(TipId(0), &g);
        for u in [0.0, 0.5, 0.99] {
            let tip = tree.select(Phase::Converge { df: 0.0, iteration: 0, iterations: 1 }, u).unwrap();
            // ties on score broken by smaller node id
            assert_eq!(tree.tip_node(tip), n(2));
        }
    }

    #[test]
    fn exploration_frequencies_follow_scores() {
        // Two tips whose trail scores are exactly 0.9 and 0.1 under mu2.
        let g = LinkGraph::from_references(3, [(n(0), n(1)), (n(0), n(2))]);
        let p = TrailScoreParams { length_damping: 1.0, position_discount: 1.0, repetition_discount: 0.5 };
        let t = scores(&[(1, 0.9), (2, 0.1)]);
        let mut tree = NavigationTree::new(n(0), Rho::Mu2, &t, p, 10);
        tree.expand(TipId(0), &g);
        assert!((tree.tip_score(TipId(1)) - 0.9).abs() < 1e-15);
        assert!((tree.tip_score(TipId(2)) - 0.1).abs() < 1e-15);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let draws = 100_000;
        let mut first = 0;
        for _ in 0..draws {
            if tree.select(Phase::Explore, uniform(&mut rng)).unwrap() == TipId(1) {
                first += 1;
            }
        }
        let freq = f64::from(first) / f64::from(draws);
        assert!((freq - 0.9).abs() < 0.02, "{freq}");
    }

    #[test]
    fn sharpening_concentrates_on_the_best_tip() {
        let g = LinkGraph::from_references(3, [(n(0), n(1)), (n(0), n(2))]);
        let p = TrailScoreParams { length_damping: 1.0, position_discount: 1.0, repetition_discount: 0.5 };
        let t = scores(&[(1, 0.6), (2, 0.4)]);
        let mut tree = NavigationTree::new(n(0), Rho::Mu2, &t, p, 10);
        tree.expand(TipId(0), &g);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut freq = |iteration| {
            let phase = Phase::Converge { df: 0.1, iteration, iterations: 10 };
            (0..20_000).filter(|_| tree.select(phase, uniform(&mut rng)).unwrap() == TipId(1)).count()
        };
        let early = freq(0);
        let late = freq(9);
        assert!(late > early, "{early} {late}");
        assert!(late > 19_400, "{late}");
    }
}
