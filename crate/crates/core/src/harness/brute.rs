//! Brute-force optimum over full multi-round histories.
//!
//! The recursion walks every selection sequence of every round, carrying the
//! joint (unnormalized) probability of the history so far, and takes the best
//! action at every history. Nothing is merged or memoized and no value table
//! across rounds is kept, so it shares no structure with the exact solver.

use crate::env::{Instance, Item, LocalState, Model};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BruteGuards {
    pub max_items: usize,
    pub max_rounds: usize,
    pub max_states: usize,
    pub max_budget: usize,
}

impl Default for BruteGuards {
    fn default() -> Self {
        BruteGuards { max_items: 3, max_rounds: 3, max_states: 4, max_budget: 3 }
    }
}

struct Brute<'a> {
    inst: &'a Instance,
}

impl Brute<'_> {
    fn round(&self, t: usize) -> &crate::env::tabular::TabularRound {
        self.inst.tabular_round(t).expect("tabular")
    }

    /// Probability-weighted value of the best continuation. `weighted` holds
    /// (state, joint probability of the history and the state).
    fn best(&self, t: usize, budget: usize, seq: &mut Vec<(Item, LocalState)>, weighted: &[(usize, f64)]) -> f64 {
        let round = self.round(t);
        let mask = seq.iter().fold(0u64, |m, e| m | 1 << e.0);
        let here: f64 = weighted.iter().map(|&(s, w)| w * round.value(mask, s)).sum();
        let mass: f64 = weighted.iter().map(|e| e.1).sum();
        let later = if t + 1 < self.inst.horizon() {
            let next = self.round(t + 1);
            let fresh: Vec<(usize, f64)> = next.support().map(|s| (s, mass * next.prob(s))).collect();
            self.best(t + 1, budget, &mut Vec::new(), &fresh)
        } else {
            0.0
        };
        let mut best = here + later;
        if budget == 0 {
            return best;
        }
        for v in 0..self.inst.n() {
            if seq.iter().any(|e| e.0 == v) {
                continue;
            }
            let mut outcomes: Vec<LocalState> = weighted.iter().map(|&(s, _)| round.local(s, v)).collect();
            outcomes.sort_unstable();
            outcomes.dedup();
            let mut total = 0.0;
            for local in outcomes {
                let branch: Vec<(usize, f64)> =
                    weighted.iter().copied().filter(|&(s, _)| round.local(s, v) == local).collect();
                seq.push((v, local));
                total += self.best(t, budget - 1, seq, &branch);
                seq.pop();
            }
            best = best.max(total);
        }
        best
    }
}

/// Optimal expected value by exhaustive search over adaptive policies.
pub fn brute_force_opt(inst: &Instance, guards: &BruteGuards) -> Result<f64> {
    if matches!(inst.model(), Model::Influence(_)) {
        return Err(Error::Unsupported("brute force on influence instances; convert to tabular first".into()));
    }
    let tab = inst.to_tabular()?;
    let too_big = tab.n() > guards.max_items
        || tab.horizon() > guards.max_rounds
        || tab.budget() > guards.max_budget
        || (0..tab.horizon()).any(|t| tab.tabular_round(t).expect("tabular").support_size() > guards.max_states);
    if too_big {
        return Err(Error::guard(format!(
            "brute force is limited to n <= {}, T <= {}, |H| <= {}, B <= {}",
            guards.max_items, guards.max_rounds, guards.max_states, guards.max_budget
        )));
    }
    let brute = Brute { inst: &tab };
    let first = brute.round(0);
    let start: Vec<(usize, f64)> = first.support().map(|s| (s, first.prob(s))).collect();
    Ok(brute.best(0, tab.budget(), &mut Vec::new(), &start))
}
