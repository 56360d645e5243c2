//! Exhaustive property checks on small instances.

use std::collections::BTreeSet;

use serde::Serialize;

use crate::env::{Instance, Item, Model, PartialState};
use crate::error::{Error, Result};
use crate::exact::{per_round_opt_table, solve_dp, SolveGuards};
use crate::greedy::{allocate, exact_increments, greedy_expected_value, BudgetVector};
use crate::harness::brute::{brute_force_opt, BruteGuards};

pub const TOLERANCE: f64 = 1e-9;

/// A pair of nested observations where the smaller one has the smaller
/// expected increment of `item`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SubmodularityWitness {
    /// 1-based round.
    pub t: usize,
    pub item: Item,
    pub smaller: String,
    pub larger: String,
    pub delta_smaller: f64,
    pub delta_larger: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SubmodularityReport {
    pub pass: bool,
    pub comparisons: u64,
    pub witness: Option<SubmodularityWitness>,
}

/// Positive-probability observations of round `t` for every subset of items.
fn observations(inst: &Instance, t: usize) -> Vec<PartialState> {
    let r = inst.tabular_round(t).expect("tabular");
    let n = inst.n();
    let mut all = BTreeSet::new();
    for mask in 0..(1u64 << n) {
        for s in r.support() {
            let obs = PartialState::from_pairs((0..n).filter(|v| mask >> v & 1 == 1).map(|v| (v, r.local(s, v))));
            all.insert(obs.expect("distinct items"));
        }
    }
    all.into_iter().collect()
}

/// Checks `Δ_t(v | ⟨S⟩) >= Δ_t(v | ⟨S'⟩) - 1e-9` for every positive-probability
/// `⟨S⟩ ⪯ ⟨S'⟩`, every item and every round. Limited to `n <= 4` and at most
/// 32 positive-probability states per round.
pub fn check_adaptive_submodularity(inst: &Instance) -> Result<SubmodularityReport> {
    let tab = inst.to_tabular()?;
    let n = tab.n();
    if n > 4 {
        return Err(Error::guard("adaptive submodularity check is limited to 4 items"));
    }
    for t in 0..tab.horizon() {
        let h = tab.tabular_round(t).expect("tabular").support_size();
        if h > 32 {
            return Err(Error::guard(format!("round {} has {h} positive-probability states (limit 32)", t + 1)));
        }
    }
    let mut comparisons = 0u64;
    for t in 0..tab.horizon() {
        for larger in observations(&tab, t) {
            let full = larger.mask();
            // Every sub-observation of `larger` is its restriction to a submask.
            let mut sub = full;
            loop {
                let smaller = larger.restrict(sub);
                for v in 0..n {
                    let a = tab.exact_marginal(t, v, &smaller)?;
                    let b = tab.exact_marginal(t, v, &larger)?;
                    comparisons += 1;
                    if a < b - TOLERANCE {
                        let witness = SubmodularityWitness {
                            t: t + 1,
                            item: v,
                            smaller: smaller.canonical(),
                            larger: larger.canonical(),
                            delta_smaller: a,
                            delta_larger: b,
                        };
                        return Ok(SubmodularityReport { pass: false, comparisons, witness: Some(witness) });
                    }
                }
                if sub == 0 {
                    break;
                }
                sub = (sub - 1) & full;
            }
        }
    }
    Ok(SubmodularityReport { pass: true, comparisons, witness: None })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EquivalenceReport {
    pub pass: bool,
    pub exact: f64,
    pub brute_force: f64,
    pub difference: f64,
}

/// Exact solver against brute force.
pub fn check_oracle_equivalence(inst: &Instance) -> Result<EquivalenceReport> {
    let brute_force = brute_force_opt(inst, &BruteGuards::default())?;
    let exact = solve_dp(inst, &SolveGuards::default())?.optimum();
    let difference = (exact - brute_force).abs();
    Ok(EquivalenceReport { pass: difference <= TOLERANCE, exact, brute_force, difference })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SandwichReport {
    pub pass: bool,
    pub optimum: f64,
    pub best_partial: f64,
    pub best_vector: Vec<usize>,
    pub ratio: f64,
}

/// `OPT_t(b)` tables for every round up to `min(B, n)`.
pub fn opt_tables(inst: &Instance, guards: &SolveGuards) -> Result<Vec<Vec<f64>>> {
    let b_max = inst.budget().min(inst.n());
    (0..inst.horizon()).map(|t| per_round_opt_table(inst, t, b_max, guards)).collect()
}

/// `R(1,B) <= 2 · max_b Σ_t OPT_t(b_t)` over all feasible integer vectors.
pub fn check_partial_sandwich(inst: &Instance, guards: &SolveGuards) -> Result<SandwichReport> {
    let optimum = solve_dp(inst, guards)?.optimum();
    let tables = opt_tables(inst, guards)?;
    let mut best_partial = f64::NEG_INFINITY;
    let mut best_vector = Vec::new();
    for b in BudgetVector::enumerate(inst.horizon(), inst.n(), inst.budget()) {
        let value: f64 = b.0.iter().zip(&tables).map(|(&x, o)| o[x]).sum();
        if value > best_partial {
            best_partial = value;
            best_vector = b.0;
        }
    }
    Ok(SandwichReport {
        pass: optimum <= 2.0 * best_partial + TOLERANCE,
        optimum,
        best_partial,
        best_vector,
        ratio: if best_partial > 0.0 { optimum / best_partial } else { f64::NAN },
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AllocationReport {
    pub pass: bool,
    /// `Δ_{t,i}` per round.
    pub increments: Vec<Vec<f64>>,
    /// First (1-based round, 1-based step) where `Δ_{t,i+1} > Δ_{t,i}`.
    pub increase_at: Option<(usize, usize)>,
    pub allocation: Vec<usize>,
    pub allocation_score: f64,
    pub best_score: f64,
    pub best_vector: Vec<usize>,
    /// Largest exact greedy value over all feasible vectors, and the value
    /// under the allocation.
    pub allocation_value: f64,
    pub best_value: f64,
}

/// Exact increments are non-increasing, the greedy allocation maximizes the
/// summed increments, and its greedy value is the best over all vectors.
pub fn check_increment_allocation(inst: &Instance) -> Result<AllocationReport> {
    let increments = (0..inst.horizon()).map(|t| exact_increments(inst, t)).collect::<Result<Vec<_>>>()?;
    let increase_at = increments
        .iter()
        .enumerate()
        .find_map(|(t, d)| d.windows(2).position(|w| w[1] > w[0] + TOLERANCE).map(|i| (t + 1, i + 1)));
    let score = |b: &[usize]| -> f64 { b.iter().zip(&increments).map(|(&x, d)| d[..x].iter().sum::<f64>()).sum() };
    let allocation = allocate(&increments, inst.budget());
    let allocation_score = score(&allocation.0);
    let allocation_value = greedy_expected_value(inst, &allocation)?;
    let (mut best_score, mut best_vector, mut best_value) = (f64::NEG_INFINITY, Vec::new(), f64::NEG_INFINITY);
    for b in BudgetVector::enumerate(inst.horizon(), inst.n(), inst.budget()) {
        let s = score(&b.0);
        if s > best_score {
            best_score = s;
            best_vector = b.0.clone();
        }
        best_value = best_value.max(greedy_expected_value(inst, &b)?);
    }
    let pass = increase_at.is_none()
        && allocation_score >= best_score - TOLERANCE
        && allocation_value >= best_value - TOLERANCE;
    Ok(AllocationReport {
        pass,
        increments,
        increase_at,
        allocation: allocation.0,
        allocation_score,
        best_score,
        best_vector,
        allocation_value,
        best_value,
    })
}

/// `1/2 (1 - 1/e)`.
pub fn greedy_ratio_bound() -> f64 {
    0.5 * (1.0 - (-1.0f64).exp())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RatioReport {
    pub pass: bool,
    pub optimum: f64,
    pub greedy_value: f64,
    pub allocation: Vec<usize>,
    pub ratio: f64,
    pub bound: f64,
}

/// Exact-oracle greedy value under its own allocation against the optimum.
pub fn check_greedy_ratio(inst: &Instance, guards: &SolveGuards) -> Result<RatioReport> {
    if matches!(inst.model(), Model::Influence(_)) {
        return Err(Error::Unsupported("exact greedy values on influence instances".into()));
    }
    let optimum = solve_dp(inst, guards)?.optimum();
    let increments = (0..inst.horizon()).map(|t| exact_increments(inst, t)).collect::<Result<Vec<_>>>()?;
    let allocation = allocate(&increments, inst.budget());
    let greedy_value = greedy_expected_value(inst, &allocation)?;
    let bound = greedy_ratio_bound();
    Ok(RatioReport {
        pass: greedy_value >= bound * optimum - TOLERANCE,
        optimum,
        greedy_value,
        allocation: allocation.0,
        ratio: if optimum > 0.0 { greedy_value / optimum } else { 1.0 },
        bound,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::tabular::{TabularObjective, TabularRound};
    use crate::env::{InstanceHeader, ModelKind};
    use crate::probing::{ProbingRound, SubmodularSpec};

    #[test]
    fn probing_passes() {
        let round = ProbingRound {
            p: vec![0.3, 0.6, 0.5],
            g: SubmodularSpec::Coverage { weights: vec![1.0, 2.0], covers: vec![vec![0], vec![0, 1], vec![1]] },
        };
        let h = InstanceHeader::new(1, 2, 3, 0.1, 3.0, ModelKind::Probing);
        let inst = Instance::new(h, Model::Probing(vec![round])).unwrap();
        assert!(check_adaptive_submodularity(&inst).unwrap().pass);
    }

    #[test]
    fn observation_dependent_complementarity_fails() {
        // Two equally likely states; item a reveals the state and is worth nothing
        // itself, yet once a is observed either way b's marginal goes up.
        //   state 0: f(b) = 0.5, f(a) = 0, f(ab) = 0.5
        //   state 1: f(b) = 0,   f(a) = 0, f(ab) = 1
        let table = vec![0.0, 0.0, 0.0, 0.0, 0.5, 0.0, 0.5, 1.0];
        let r = TabularRound::from_parts(2, vec![0.5, 0.5], vec![0, 0, 1, 0], TabularObjective::Table(table)).unwrap();
        let h = InstanceHeader::new(1, 1, 2, 0.25, 1.0, ModelKind::Tabular);
        let inst = Instance::new(h, Model::Tabular(vec![r])).unwrap();
        let report = check_adaptive_submodularity(&inst).unwrap();
        let w = report.witness.unwrap();
        assert_eq!((w.t, w.item, w.smaller.as_str(), w.larger.as_str()), (1, 1, "", "0:0"));
        assert!((w.delta_smaller - 0.25).abs() < 1e-12 && (w.delta_larger - 0.5).abs() < 1e-12);
    }
}
