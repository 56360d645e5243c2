//! Fully enumerated round model: explicit global states with probabilities and
//! an objective defined on (subset, state) pairs.

use rand::Rng;

use super::{Item, LocalState, PartialState};
use crate::error::{Error, Result};
use crate::probing::{mask_items, SubmodularSpec};

/// Largest `2^n * |H|` a dense objective table may have.
pub const MAX_TABLE_ENTRIES: usize = 1 << 24;
pub const PROB_TOLERANCE: f64 = 1e-9;

/// Objective representation of a tabular round.
#[derive(Debug, Clone, PartialEq)]
pub enum TabularObjective {
    /// Dense table indexed by `mask * |H| + state`.
    Table(Vec<f64>),
    /// `g(S ∩ active(eta))` where local state 1 means active.
    Probing(SubmodularSpec),
    /// Local states are reachability bitmasks; value is the node weight of
    /// the union of the masks of selected items.
    ReachUnion(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TabularRound {
    n: usize,
    probs: Vec<f64>,
    locals: Vec<LocalState>,
    objective: TabularObjective,
}

impl TabularRound {
    /// Assemble a round. Shape is checked here; probability mass, normalization
    /// and monotonicity are checked by [`TabularRound::validate`].
    pub fn from_parts(n: usize, probs: Vec<f64>, locals: Vec<LocalState>, objective: TabularObjective) -> Result<Self> {
        let h = probs.len();
        if h == 0 {
            return Err(Error::invalid("a tabular round needs at least one state"));
        }
        if locals.len() != h * n {
            return Err(Error::invalid(format!("{} local states for {h} states of {n} items", locals.len())));
        }
        if n > 63 {
            return Err(Error::guard("tabular rounds support at most 63 items"));
        }
        if let TabularObjective::Table(t) = &objective {
            let expected = (1usize << n).checked_mul(h).filter(|&e| e <= MAX_TABLE_ENTRIES);
            match expected {
                Some(e) if e == t.len() => {}
                Some(e) => {
                    return Err(Error::invalid(format!("objective table has {} entries, expected {e}", t.len())))
                }
                None => return Err(Error::guard(format!("objective table 2^{n} x {h} is too large"))),
            }
        }
        Ok(TabularRound { n, probs, locals, objective })
    }

    pub fn items(&self) -> usize {
        self.n
    }

    pub fn num_states(&self) -> usize {
        self.probs.len()
    }

    /// States with strictly positive probability.
    pub fn support(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.probs.len()).filter(|&s| self.probs[s] > 0.0)
    }

    pub fn support_size(&self) -> usize {
        self.support().count()
    }

    pub fn prob(&self, s: usize) -> f64 {
        self.probs[s]
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn local(&self, s: usize, v: Item) -> LocalState {
        self.locals[s * self.n + v]
    }

    pub fn local_vector(&self, s: usize) -> &[LocalState] {
        &self.locals[s * self.n..(s + 1) * self.n]
    }

    pub fn objective(&self) -> &TabularObjective {
        &self.objective
    }

    /// `f_t(mask, s)`.
    pub fn value(&self, mask: u64, s: usize) -> f64 {
        match &self.objective {
            TabularObjective::Table(t) => t[mask as usize * self.probs.len() + s],
            TabularObjective::Probing(g) => {
                let active = (0..self.n).filter(|&v| self.local(s, v) == 1).fold(0u64, |m, v| m | 1 << v);
                g.eval_mask(mask & active)
            }
            TabularObjective::ReachUnion(w) => {
                let reach = mask_items(mask).fold(0u64, |m, v| m | self.local(s, v) as u64);
                mask_items(reach).map(|u| w[u]).sum()
            }
        }
    }

    pub fn is_consistent(&self, s: usize, obs: &PartialState) -> bool {
        obs.iter().all(|(v, local)| self.local(s, v) == local)
    }

    /// Positive-probability states consistent with `obs`, with conditional
    /// probabilities. `None` if the observation has probability zero.
    pub fn conditional(&self, obs: &PartialState) -> Option<Vec<(usize, f64)>> {
        let states: Vec<(usize, f64)> =
            self.support().filter(|&s| self.is_consistent(s, obs)).map(|s| (s, self.probs[s])).collect();
        let mass: f64 = states.iter().map(|x| x.1).sum();
        if states.is_empty() || mass <= 0.0 {
            return None;
        }
        Some(states.into_iter().map(|(s, p)| (s, p / mass)).collect())
    }

    pub fn sample_state<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        sample_weighted(self.probs.iter().copied().enumerate(), rng)
    }

    /// Largest single-item increment over all subsets and states.
    pub fn max_increment(&self) -> f64 {
        match &self.objective {
            TabularObjective::Probing(g) => g.max_increment(),
            TabularObjective::ReachUnion(_) => self
                .support()
                .flat_map(|s| (0..self.n).map(move |v| (s, v)))
                .map(|(s, v)| self.value(1 << v, s))
                .fold(0.0, f64::max),
            TabularObjective::Table(_) => {
                let mut best = 0.0f64;
                for s in 0..self.num_states() {
                    for mask in 0..(1u64 << self.n) {
                        for v in (0..self.n).filter(|v| mask >> v & 1 == 0) {
                            best = best.max(self.value(mask | 1 << v, s) - self.value(mask, s));
                        }
                    }
                }
                best
            }
        }
    }

    /// Probability mass, normalization and monotonicity. `round` is 0-based
    /// and reported 1-based.
    pub fn validate(&self, round: usize) -> Result<()> {
        let r = round + 1;
        if let Some((s, p)) = self.probs.iter().enumerate().find(|(_, p)| !(p.is_finite() && **p >= 0.0)) {
            return Err(Error::invalid(format!("round {r}: state {s} has invalid probability {p}")));
        }
        let mass: f64 = self.probs.iter().sum();
        if (mass - 1.0).abs() > PROB_TOLERANCE {
            return Err(Error::invalid(format!("round {r}: state probabilities sum to {mass}, expected 1")));
        }
        if let TabularObjective::Table(table) = &self.objective {
            if let Some(x) = table.iter().find(|x| !(x.is_finite() && **x >= 0.0)) {
                return Err(Error::invalid(format!("round {r}: objective value {x} must be finite and >= 0")));
            }
            for s in 0..self.num_states() {
                let empty = self.value(0, s);
                if empty != 0.0 {
                    return Err(Error::invalid(format!("round {r}: f(∅, state {s}) = {empty}, expected 0")));
                }
            }
            for s in 0..self.num_states() {
                for mask in 0..(1u64 << self.n) {
                    for v in (0..self.n).filter(|v| mask >> v & 1 == 0) {
                        let (a, b) = (self.value(mask, s), self.value(mask | 1 << v, s));
                        if b < a {
                            return Err(Error::invalid(format!(
                                "round {r}: objective not monotone: f({}, state {s}) = {a} > f({}, state {s}) = {b}",
                                mask,
                                mask | 1 << v
                            )));
                        }
                    }
                }
            }
        }
        Ok(())
    }
}

/// Sample an index from (index, weight) pairs; weights need not be normalized.
pub(crate) fn sample_weighted<R: Rng + ?Sized, I>(weights: I, rng: &mut R) -> usize
where
    I: Iterator<Item = (usize, f64)> + Clone,
{
    let total: f64 = weights.clone().map(|w| w.1).sum();
    let mut u = rng.random::<f64>() * total;
    let mut last = 0;
    for (i, w) in weights {
        if w <= 0.0 {
            continue;
        }
        last = i;
        if u < w {
            return i;
        }
        u -= w;
    }
    last
}

/// Precomputed conditional distribution for repeated sampling.
#[derive(Debug, Clone)]
pub(crate) struct ConditionalSampler {
    states: Vec<usize>,
    cumulative: Vec<f64>,
}

impl ConditionalSampler {
    pub(crate) fn new(dist: &[(usize, f64)]) -> Self {
        let mut acc = 0.0;
        let cumulative = dist
            .iter()
            .map(|(_, p)| {
                acc += p;
                acc
            })
            .collect();
        ConditionalSampler { states: dist.iter().map(|x| x.0).collect(), cumulative }
    }

    pub(crate) fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let total = *self.cumulative.last().expect("non-empty conditional");
        let u = rng.random::<f64>() * total;
        let idx = self.cumulative.partition_point(|&c| c <= u).min(self.states.len() - 1);
        self.states[idx]
    }
}
