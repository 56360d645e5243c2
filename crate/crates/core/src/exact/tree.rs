//! Per-round game tree.
//!
//! A policy node is identified by the selected set and the set of global
//! states still consistent with the observations; together they determine the
//! observation. Nature's moves partition the consistent set by the local state
//! of the newly selected item.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use crate::env::tabular::TabularRound;
use crate::env::{Item, LocalState, PartialState};
use crate::error::{Error, Result};

use super::Action;

/// Stopping rule inside a round.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Mode {
    /// STOP allowed anywhere; reward is `E[f | obs] + cont[b - k]`.
    Free,
    /// STOP only after exactly `min(b, n)` selections; no continuation.
    Exactly,
}

pub(crate) struct RoundSolution {
    pub value: f64,
    /// Actions at every node reachable under the optimal policy.
    pub actions: BTreeMap<PartialState, Action>,
    /// Remaining budgets at reachable STOP leaves.
    pub exits: BTreeSet<usize>,
}

type Node = (u64, u64);

pub(crate) struct RoundTree<'a> {
    round: &'a TabularRound,
    /// Positive-probability state indices; bit `i` of a node set refers to `support[i]`.
    support: Vec<usize>,
    n: usize,
    b: usize,
    cont: &'a [f64],
    mode: Mode,
    memo: HashMap<Node, (f64, Action)>,
}

impl<'a> RoundTree<'a> {
    pub(crate) fn new(round: &'a TabularRound, b: usize, cont: &'a [f64], mode: Mode) -> Result<Self> {
        let support: Vec<usize> = round.support().collect();
        if support.len() > 64 {
            return Err(Error::guard(format!("{} positive-probability states (limit 64)", support.len())));
        }
        if mode == Mode::Free && cont.len() < b + 1 {
            return Err(Error::arg(format!("continuation has {} entries, need {}", cont.len(), b + 1)));
        }
        Ok(RoundTree { round, n: round.items(), support, b, cont, mode, memo: HashMap::new() })
    }

    fn full(&self) -> u64 {
        if self.support.len() == 64 {
            u64::MAX
        } else {
            (1u64 << self.support.len()) - 1
        }
    }

    fn mass(&self, set: u64) -> f64 {
        bits(set).map(|i| self.round.prob(self.support[i])).sum()
    }

    fn expected_value(&self, mask: u64, set: u64) -> f64 {
        let mass = self.mass(set);
        bits(set).map(|i| self.round.prob(self.support[i]) * self.round.value(mask, self.support[i])).sum::<f64>()
            / mass
    }

    /// Partition of `set` by the local state of `v`, ordered by local state.
    pub(crate) fn split(&self, set: u64, v: Item) -> Vec<(LocalState, u64)> {
        let mut groups: Vec<(LocalState, u64)> = Vec::new();
        for i in bits(set) {
            let local = self.round.local(self.support[i], v);
            match groups.iter_mut().find(|g| g.0 == local) {
                Some(g) => g.1 |= 1 << i,
                None => groups.push((local, 1 << i)),
            }
        }
        groups.sort_by_key(|g| g.0);
        groups
    }

    fn limit(&self) -> usize {
        self.b.min(self.n)
    }

    fn value(&mut self, mask: u64, set: u64) -> f64 {
        if let Some(&(v, _)) = self.memo.get(&(mask, set)) {
            return v;
        }
        let k = mask.count_ones() as usize;
        let mut best = f64::NEG_INFINITY;
        let mut action = Action::Stop;
        let may_stop = match self.mode {
            Mode::Free => true,
            Mode::Exactly => k == self.limit(),
        };
        if may_stop {
            let cont = match self.mode {
                Mode::Free => self.cont[self.b - k],
                Mode::Exactly => 0.0,
            };
            best = self.expected_value(mask, set) + cont;
        }
        if k < self.limit() {
            let mass = self.mass(set);
            for v in (0..self.n).filter(|v| mask >> v & 1 == 0) {
                let mut total = 0.0;
                for (_, group) in self.split(set, v) {
                    let w = self.mass(group) / mass;
                    total += w * self.value(mask | 1 << v, group);
                }
                if total > best {
                    best = total;
                    action = Action::Select(v);
                }
            }
        }
        self.memo.insert((mask, set), (best, action));
        best
    }

    pub(crate) fn solve(mut self) -> RoundSolution {
        let root = (0u64, self.full());
        let value = self.value(root.0, root.1);
        let mut actions = BTreeMap::new();
        let mut exits = BTreeSet::new();
        let mut stack = vec![(root, PartialState::new())];
        while let Some(((mask, set), obs)) = stack.pop() {
            let (_, action) = self.memo[&(mask, set)];
            match action {
                Action::Stop => {
                    exits.insert(self.b - mask.count_ones() as usize);
                }
                Action::Select(v) => {
                    for (local, group) in self.split(set, v) {
                        stack.push(((mask | 1 << v, group), obs.with(v, local)));
                    }
                }
            }
            actions.insert(obs, action);
        }
        RoundSolution { value, actions, exits }
    }
}

pub(crate) fn bits(set: u64) -> impl Iterator<Item = usize> {
    let mut rest = set;
    std::iter::from_fn(move || {
        if rest == 0 {
            return None;
        }
        let i = rest.trailing_zeros() as usize;
        rest &= rest - 1;
        Some(i)
    })
}

/// Node counts of the raw sequence-indexed tree.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, serde::Serialize)]
pub struct TreeStats {
    pub policy_nodes: u128,
    pub chance_nodes: u128,
    pub leaves: u128,
}

impl TreeStats {
    /// Policy nodes plus leaves.
    pub fn total(&self) -> u128 {
        self.policy_nodes + self.leaves
    }

    fn add(&mut self, other: TreeStats) {
        self.policy_nodes += other.policy_nodes;
        self.chance_nodes += other.chance_nodes;
        self.leaves += other.leaves;
    }
}

/// Every policy node has one STOP leaf and, while fewer than `min(b, n)` items
/// are selected, one chance node per unselected item. Subtree sizes depend on
/// the node only through (selected set, consistent states), so counts are
/// cached on that key while still counting each sequence separately.
pub(crate) fn count_raw(round: &TabularRound, b: usize) -> Result<TreeStats> {
    let tree = RoundTree::new(round, b, &[], Mode::Exactly)?;
    let mut cache: HashMap<Node, TreeStats> = HashMap::new();
    fn go(tree: &RoundTree<'_>, mask: u64, set: u64, cache: &mut HashMap<Node, TreeStats>) -> TreeStats {
        if let Some(s) = cache.get(&(mask, set)) {
            return *s;
        }
        let mut stats = TreeStats { policy_nodes: 1, chance_nodes: 0, leaves: 1 };
        if (mask.count_ones() as usize) < tree.limit() {
            for v in (0..tree.n).filter(|v| mask >> v & 1 == 0) {
                stats.chance_nodes += 1;
                for (_, group) in tree.split(set, v) {
                    stats.add(go(tree, mask | 1 << v, group, cache));
                }
            }
        }
        cache.insert((mask, set), stats);
        stats
    }
    Ok(go(&tree, 0, tree.full(), &mut cache))
}
