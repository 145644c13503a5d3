//! Walker splitting with a descending weight ledger.
//!
//! Every walker absorbed at a Dirichlet wall is replaced by splitting the
//! current maximum-weight walker into two half-weight copies at the same
//! position. The walker count stays fixed and weights stay powers of two.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Vec2;

pub const DEFAULT_REORDER_INTERVAL: usize = 10;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LedgerScope {
    /// One ledger for the whole swarm; splits run in a serialized phase.
    Global,
    /// One ledger per shard.
    #[default]
    Shard,
}

/// Descending weight order over a contiguous block of walkers.
///
/// `order` is exact right after a reorder and may be stale in between; the
/// maximum is then taken as the first entry that is alive and has not split
/// since the last reorder.
#[derive(Clone, Debug)]
pub struct WeightLedger {
    order: Vec<usize>,
    split_since_reorder: Vec<bool>,
    cursor: usize,
    interval: usize,
    pub split_count: u64,
    pub absorbed_weight: f64,
}

impl WeightLedger {
    /// Ledger over `n` walkers launched with weight 1.
    pub fn new(n: usize, interval: usize) -> Self {
        Self {
            order: (0..n).collect(),
            split_since_reorder: vec![false; n],
            cursor: 0,
            interval: interval.max(1),
            split_count: 0,
            absorbed_weight: 0.0,
        }
    }

    pub fn interval(&self) -> usize {
        self.interval
    }

    pub fn order(&self) -> &[usize] {
        &self.order
    }

    /// Sorts descending by weight (ties: lower index first).
    pub fn reorder(&mut self, weights: &[f64]) {
        self.order.sort_by(|&a, &b| {
            weights[b]
                .partial_cmp(&weights[a])
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(a.cmp(&b))
        });
        self.split_since_reorder.iter_mut().for_each(|s| *s = false);
        self.cursor = 0;
    }

    /// Reorders when `step_index` is a multiple of the interval. Returns whether it did.
    pub fn maybe_reorder(&mut self, weights: &[f64], step_index: usize) -> bool {
        if step_index.is_multiple_of(self.interval) {
            self.reorder(weights);
            true
        } else {
            false
        }
    }

    fn select_parent(&mut self, weights: &[f64], alive: &[bool]) -> Option<usize> {
        while self.cursor < self.order.len() {
            let i = self.order[self.cursor];
            if alive[i] && !self.split_since_reorder[i] {
                return Some(i);
            }
            self.cursor += 1;
        }
        // Every entry has split since the last reorder: exact scan.
        let mut best: Option<usize> = None;
        for i in 0..weights.len() {
            if alive[i] && best.is_none_or(|b| weights[i] > weights[b]) {
                best = Some(i);
            }
        }
        best
    }

    /// Removes `absorbed` (indices local to the block, each alive) and refills
    /// every freed slot by splitting the current maximum-weight walker.
    ///
    /// All absorbed walkers are removed first; refills then proceed in
    /// ascending index order, re-selecting the maximum after each split.
    pub fn absorb_and_split(
        &mut self,
        positions: &mut [Vec2],
        weights: &mut [f64],
        alive: &mut [bool],
        absorbed: &[usize],
        step: usize,
    ) -> Result<()> {
        if absorbed.is_empty() {
            return Ok(());
        }
        let mut ids = absorbed.to_vec();
        ids.sort_unstable();
        ids.dedup();
        for &i in &ids {
            if !alive[i] {
                return Err(Error::Precondition(format!("walker {i} is not alive")));
            }
        }
        let survivors = alive.iter().filter(|a| **a).count() - ids.len();
        if survivors == 0 || ids.len() > survivors {
            return Err(Error::SwarmExtinction {
                step,
                absorbed: ids.len(),
                survivors,
            });
        }
        for &i in &ids {
            alive[i] = false;
            self.absorbed_weight += weights[i];
        }
        for &slot in &ids {
            let parent = self
                .select_parent(weights, alive)
                .expect("survivors exist");
            let w = weights[parent] * 0.5;
            weights[parent] = w;
            weights[slot] = w;
            positions[slot] = positions[parent];
            alive[slot] = true;
            self.split_since_reorder[parent] = true;
            self.split_since_reorder[slot] = true;
            self.split_count += 1;
        }
        Ok(())
    }
}

/// Positions, weights and alive flags of a swarm with its ledger.
#[derive(Clone, Debug)]
pub struct WalkerSwarm {
    pub positions: Vec<Vec2>,
    pub weights: Vec<f64>,
    pub alive: Vec<bool>,
    pub ledger: WeightLedger,
}

impl WalkerSwarm {
    pub fn launch(at: Vec2, n: usize, interval: usize) -> Self {
        Self {
            positions: vec![at; n],
            weights: vec![1.0; n],
            alive: vec![true; n],
            ledger: WeightLedger::new(n, interval),
        }
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn alive_count(&self) -> usize {
        self.alive.iter().filter(|a| **a).count()
    }

    pub fn total_weight(&self) -> f64 {
        self.weights
            .iter()
            .zip(&self.alive)
            .filter(|(_, a)| **a)
            .map(|(w, _)| *w)
            .sum()
    }

    pub fn absorb_and_split(&mut self, absorbed: &[usize], step: usize) -> Result<()> {
        self.ledger.absorb_and_split(
            &mut self.positions,
            &mut self.weights,
            &mut self.alive,
            absorbed,
            step,
        )
    }

    pub fn maybe_reorder(&mut self, step_index: usize) -> bool {
        self.ledger.maybe_reorder(&self.weights, step_index)
    }
}

/// True when `w` is `2^-k` for an integer `k >= 0`.
pub fn is_binary_fraction(w: f64) -> bool {
    w > 0.0 && w <= 1.0 && w.is_normal() && (w.to_bits() & ((1u64 << 52) - 1)) == 0
}

#[cfg(test)]
mod tests {
    use super::*;

    fn swarm3() -> WalkerSwarm {
        let mut s = WalkerSwarm::launch([0.5, 0.5], 3, 10);
        s.positions = vec![[0.1, 0.1], [0.2, 0.2], [0.3, 0.3]];
        s
    }

    #[test]
    fn empty_absorption_is_noop() {
        let mut s = swarm3();
        s.absorb_and_split(&[], 1).unwrap();
        assert_eq!(s.weights, vec![1.0, 1.0, 1.0]);
        assert_eq!(s.ledger.split_count, 0);
    }

    #[test]
    fn split_into_absorbed_slot() {
        let mut s = swarm3();
        s.absorb_and_split(&[0], 1).unwrap();
        assert_eq!(s.weights, vec![0.5, 0.5, 1.0]);
        assert_eq!(s.positions[0], [0.2, 0.2]);
        assert_eq!(s.alive_count(), 3);
        assert_eq!(s.total_weight(), 2.0);
        assert_eq!(s.ledger.absorbed_weight, 1.0);
    }

    #[test]
    fn stale_order_skips_split_walkers() {
        let mut s = swarm3();
        s.absorb_and_split(&[0], 1).unwrap();
        s.absorb_and_split(&[1], 2).unwrap();
        // walker 2 is the first unsplit entry
        assert_eq!(s.weights, vec![0.5, 0.5, 0.5]);
        assert_eq!(s.positions[1], [0.3, 0.3]);
    }

    #[test]
    fn reorder_descending_with_index_ties() {
        let mut l = WeightLedger::new(3, 10);
        assert!(l.maybe_reorder(&[0.5, 1.0, 0.25], 20));
        assert_eq!(l.order(), &[1, 0, 2]);
        assert!(!l.maybe_reorder(&[1.0, 0.5, 0.25], 21));
        assert_eq!(l.order(), &[1, 0, 2]);
        l.reorder(&[0.5, 0.5, 1.0]);
        assert_eq!(l.order(), &[2, 0, 1]);
    }

    #[test]
    fn extinction() {
        let mut s = swarm3();
        let e = s.absorb_and_split(&[0, 1, 2], 7).unwrap_err();
        assert!(matches!(e, Error::SwarmExtinction { step: 7, absorbed: 3, survivors: 0 }));
        let mut s = swarm3();
        assert!(s.absorb_and_split(&[0, 1], 7).is_err());
    }

    #[test]
    fn dead_walker_rejected() {
        let mut s = swarm3();
        s.alive[0] = false;
        assert!(matches!(s.absorb_and_split(&[0], 1), Err(Error::Precondition(_))));
    }

    #[test]
    fn binary_fraction_check() {
        assert!(is_binary_fraction(1.0));
        assert!(is_binary_fraction(0.125));
        assert!(!is_binary_fraction(0.75));
        assert!(!is_binary_fraction(0.0));
        assert!(!is_binary_fraction(2.0));
    }
}
