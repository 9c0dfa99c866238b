//! Weighted sampling over a fixed number of slots in `O(log n)`.
//!
//! A complete binary tree stores, at every internal node, the exact sum of
//! its two children. Updating a slot recomputes the sums on its path to the
//! root, so totals never drift the way incremental add/subtract would.

use alloc::vec;
use alloc::vec::Vec;

#[derive(Debug, Clone)]
pub struct SumTree {
    leaves: usize,
    nodes: Vec<f64>,
}

impl SumTree {
    pub fn with_capacity(slots: usize) -> Self {
        let leaves = slots.max(1).next_power_of_two();
        Self { leaves, nodes: vec![0.0; 2 * leaves] }
    }

    pub fn capacity(&self) -> usize {
        self.leaves
    }

    pub fn total(&self) -> f64 {
        self.nodes[1]
    }

    pub fn get(&self, slot: usize) -> f64 {
        self.nodes[self.leaves + slot]
    }

    pub fn set(&mut self, slot: usize, weight: f64) {
        debug_assert!(weight >= 0.0 && weight.is_finite());
        let mut i = self.leaves + slot;
        self.nodes[i] = weight;
        while i > 1 {
            i /= 2;
            self.nodes[i] = self.nodes[2 * i] + self.nodes[2 * i + 1];
        }
    }

    /// Replaces every weight at once in `O(n)`.
    pub fn rebuild(&mut self, weights: impl IntoIterator<Item = (usize, f64)>) {
        self.nodes.iter_mut().for_each(|w| *w = 0.0);
        for (slot, w) in weights {
            self.nodes[self.leaves + slot] = w;
        }
        for i in (1..self.leaves).rev() {
            self.nodes[i] = self.nodes[2 * i] + self.nodes[2 * i + 1];
        }
    }

    /// The slot whose cumulative weight interval contains `u * total`, for
    /// `u` in `[0, 1)`. Never returns a zero-weight slot while the total is
    /// positive. `None` when every weight is zero.
    pub fn sample(&self, u: f64) -> Option<usize> {
        if self.total() <= 0.0 {
            return None;
        }
        let mut target = u * self.total();
        let mut i = 1;
        while i < self.leaves {
            let left = self.nodes[2 * i];
            let right = self.nodes[2 * i + 1];
            if (target < left && left > 0.0) || right <= 0.0 {
                i *= 2;
            } else {
                target -= left;
                i = 2 * i + 1;
            }
        }
        Some(i - self.leaves)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn picks_by_cumulative_weight() {
        let mut t = SumTree::with_capacity(5);
        assert_eq!(t.capacity(), 8);
        assert_eq!(t.sample(0.3), None);
        t.set(1, 1.0);
        t.set(3, 3.0);
        assert_eq!(t.total(), 4.0);
        assert_eq!(t.sample(0.0), Some(1));
        assert_eq!(t.sample(0.24), Some(1));
        assert_eq!(t.sample(0.26), Some(3));
        assert_eq!(t.sample(0.999_999), Some(3));
        t.set(3, 0.0);
        assert_eq!(t.sample(0.99), Some(1));
    }

    #[test]
    fn rebuild_matches_incremental() {
        let mut a = SumTree::with_capacity(6);
        let mut b = SumTree::with_capacity(6);
        for (i, w) in [0.5, 0.0, 2.0, 0.25, 1.0, 0.125].into_iter().enumerate() {
            a.set(i, w);
        }
        b.rebuild([0.5, 0.0, 2.0, 0.25, 1.0, 0.125].into_iter().enumerate());
        assert_eq!(a.nodes, b.nodes);
    }
}
