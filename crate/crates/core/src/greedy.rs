//! Greedy partially adaptive policy.
//!
//! The budget vector is fixed up front by [`budget_gr`]: each unit of budget
//! goes to the round whose next estimated greedy increment is largest. Rounds
//! are then played in order with the adaptive single-round greedy
//! [`single_gr`].

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::env::{Instance, Item, LiveRound, PartialState};
use crate::error::{Error, Result};
use crate::oracle::{argmax_item, estimate_items, oracle2_seeded, OracleConfig, OracleMode, RolloutPolicy};
use crate::par;
use crate::rng::{fork, stream, tags};

/// Limit on enumerated greedy trajectory nodes per round.
pub const MAX_TRAJECTORY_NODES: usize = 2_000_000;

/// Per-round selection counts summing to the total budget.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct BudgetVector(pub Vec<usize>);

impl BudgetVector {
    pub fn new(b: Vec<usize>, n: usize, budget: usize) -> Result<Self> {
        let total: usize = b.iter().sum();
        if total != budget {
            return Err(Error::arg(format!("budget vector sums to {total}, expected {budget}")));
        }
        if let Some(x) = b.iter().find(|&&x| x > n) {
            return Err(Error::arg(format!("budget entry {x} exceeds n = {n}")));
        }
        Ok(BudgetVector(b))
    }

    pub fn total(&self) -> usize {
        self.0.iter().sum()
    }

    /// Every vector with `horizon` entries in `0..=n` summing to `budget`, in
    /// lexicographic order.
    pub fn enumerate(horizon: usize, n: usize, budget: usize) -> Vec<BudgetVector> {
        fn go(rest: usize, slots: usize, n: usize, cur: &mut Vec<usize>, out: &mut Vec<BudgetVector>) {
            if slots == 0 {
                if rest == 0 {
                    out.push(BudgetVector(cur.clone()));
                }
                return;
            }
            for x in 0..=rest.min(n) {
                if rest - x <= (slots - 1) * n {
                    cur.push(x);
                    go(rest - x, slots - 1, n, cur, out);
                    cur.pop();
                }
            }
        }
        let mut out = Vec::new();
        go(budget, horizon, n, &mut Vec::new(), &mut out);
        out
    }
}

/// `δ = ξ = λ c ε / (B (4 + 3Λ))`.
pub fn epsilon_to_params(epsilon: f64, c: f64, lambda: f64, capital_lambda: f64, budget: usize) -> Result<(f64, f64)> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::arg(format!("epsilon must be positive (got {epsilon})")));
    }
    if !(c > 0.0 && c <= 1.0) {
        return Err(Error::arg(format!("c must lie in (0, 1] (got {c})")));
    }
    if !(lambda > 0.0 && capital_lambda > 0.0) || budget == 0 {
        return Err(Error::arg("lambda, capital_lambda and B must be positive"));
    }
    let x = lambda * c * epsilon / (budget as f64 * (4.0 + 3.0 * capital_lambda));
    Ok((x, x))
}

/// One greedy selection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    /// 1-based round.
    pub t: usize,
    /// 1-based step within the round.
    pub step: usize,
    pub item: Item,
    pub estimate: f64,
    /// Digest of the observation after the selection.
    pub observation_digest: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GreedyTrace {
    pub records: Vec<TraceRecord>,
    /// Selected items per round, in selection order.
    pub selected: Vec<Vec<Item>>,
    /// Realized value per round.
    pub round_values: Vec<f64>,
}

impl GreedyTrace {
    /// One JSON object per line.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for r in &self.records {
            out.push_str(&serde_json::to_string(r).expect("plain record"));
            out.push('\n');
        }
        out
    }

    pub fn total(&self) -> f64 {
        self.round_values.iter().sum()
    }
}

/// Adaptive greedy on one live round: `b` steps, each selecting the eligible
/// item with the largest estimated increment and revealing its local state.
/// Influence rounds stop early once every node is active.
pub fn single_gr<R: Rng + ?Sized>(
    live: &mut LiveRound<'_>,
    b: usize,
    cfg: &OracleConfig,
    rng: &mut R,
    trace: &mut Vec<TraceRecord>,
) -> Result<()> {
    let n = live.instance().n();
    if b > n {
        return Err(Error::arg(format!("single-round budget {b} exceeds n = {n}")));
    }
    cfg.check_instance(live.instance())?;
    for step in 1..=b {
        let estimates = estimate_items(cfg, live, fork(rng))?;
        let Some((v, estimate)) = argmax_item(&estimates, cfg.mode) else {
            break;
        };
        live.select(v, rng)?;
        trace.push(TraceRecord { t: live.round() + 1, step, item: v, estimate, observation_digest: live.digest() });
    }
    Ok(())
}

/// Exact `Δ_{t,i}`, `i = 1..=n`: expected increment of the exact-oracle greedy
/// at its `i`-th step, by enumerating greedy trajectories.
pub fn exact_increments(inst: &Instance, t: usize) -> Result<Vec<f64>> {
    let n = inst.n();
    let mut deltas = vec![0.0; n];
    let mut level = vec![(PartialState::new(), 1.0)];
    let mut visited = 0usize;
    for delta in deltas.iter_mut() {
        let mut next: BTreeMap<PartialState, f64> = BTreeMap::new();
        for (obs, p) in &level {
            let Some((v, marginal)) = exact_choice(inst, t, obs)? else {
                continue;
            };
            *delta += p * marginal;
            for (local, q) in inst.outcome_distribution(t, obs, v)? {
                *next.entry(obs.with(v, local)).or_insert(0.0) += p * q;
            }
        }
        visited += next.len();
        if visited > MAX_TRAJECTORY_NODES {
            return Err(Error::guard(format!("more than {MAX_TRAJECTORY_NODES} greedy trajectory nodes")));
        }
        level = next.into_iter().collect();
    }
    Ok(deltas)
}

/// Exact-oracle greedy choice at an observation.
pub(crate) fn exact_choice(inst: &Instance, t: usize, obs: &PartialState) -> Result<Option<(Item, f64)>> {
    let marginals = (0..inst.n())
        .map(|v| if obs.contains(v) { Ok(None) } else { inst.exact_marginal(t, v, obs).map(Some) })
        .collect::<Result<Vec<_>>>()?;
    Ok(argmax_item(&marginals, OracleMode::Exact))
}

/// `GR_t(b)`: expected value of the exact-oracle greedy with `b` selections at
/// round `t`, from the conditional expected objective at the trajectory leaves.
pub fn greedy_round_value(inst: &Instance, t: usize, b: usize) -> Result<f64> {
    let mut level = vec![(PartialState::new(), 1.0)];
    for _ in 0..b.min(inst.n()) {
        let mut next: BTreeMap<PartialState, f64> = BTreeMap::new();
        for (obs, p) in &level {
            match exact_choice(inst, t, obs)? {
                Some((v, _)) => {
                    for (local, q) in inst.outcome_distribution(t, obs, v)? {
                        *next.entry(obs.with(v, local)).or_insert(0.0) += p * q;
                    }
                }
                None => *next.entry(obs.clone()).or_insert(0.0) += p,
            }
        }
        if next.len() > MAX_TRAJECTORY_NODES {
            return Err(Error::guard(format!("more than {MAX_TRAJECTORY_NODES} greedy trajectory nodes")));
        }
        level = next.into_iter().collect();
    }
    level.iter().map(|(obs, p)| inst.expected_value(t, obs).map(|v| p * v)).sum()
}

/// Exact expected value of the exact-oracle greedy under a budget vector.
pub fn greedy_expected_value(inst: &Instance, budget: &BudgetVector) -> Result<f64> {
    if budget.0.len() != inst.horizon() {
        return Err(Error::arg("budget vector length differs from the horizon"));
    }
    if !inst.supports_exact() {
        return Err(Error::Unsupported("exact greedy values on influence instances".into()));
    }
    (0..inst.horizon()).map(|t| greedy_round_value(inst, t, budget.0[t])).sum()
}

/// Greedy allocation from increment estimates `deltas[t][i-1] = Δ̃_{t,i}`.
///
/// Estimates are made non-increasing by a running minimum; then each unit of
/// budget goes to the round with the largest next increment, lowest round on
/// ties. Rounds with `n` units are never chosen again.
pub fn allocate(deltas: &[Vec<f64>], budget: usize) -> BudgetVector {
    let bars: Vec<Vec<f64>> = deltas
        .iter()
        .map(|d| {
            let mut bar = Vec::with_capacity(d.len() + 2);
            bar.push(f64::INFINITY);
            for &x in d {
                let prev = *bar.last().expect("seeded");
                bar.push(f64::min(prev, x));
            }
            bar.push(f64::NEG_INFINITY);
            bar
        })
        .collect();
    let mut b = vec![0usize; deltas.len()];
    for _ in 0..budget {
        let mut best = 0;
        for t in 1..bars.len() {
            if bars[t][b[t] + 1] > bars[best][b[best] + 1] {
                best = t;
            }
        }
        b[best] += 1;
    }
    BudgetVector(b)
}

/// Increment estimates for every round: exact in exact mode, otherwise one
/// oracle2 batch per round with sampled greedy rollouts.
pub fn round_increments<R: Rng + ?Sized>(inst: &Instance, cfg: &OracleConfig, rng: &mut R) -> Result<Vec<Vec<f64>>> {
    cfg.check_instance(inst)?;
    let base = fork(rng);
    let h = inst.header();
    let policy = match cfg.mode {
        OracleMode::Exact => None,
        OracleMode::MonteCarlo => Some((
            cfg.q2(h.n, h.horizon, h.capital_lambda)?,
            RolloutPolicy::SampledGreedy { q1: cfg.q1(h.n, h.capital_lambda)? },
        )),
    };
    par::map_indexed(inst.horizon(), |t| match policy {
        None => exact_increments(inst, t),
        Some((q2, rollout)) => {
            let seed = rand::RngCore::next_u64(&mut stream(base, &[tags::BUDGET, t as u64]));
            oracle2_seeded(q2, inst, t, rollout, seed)
        }
    })
    .into_iter()
    .collect()
}

pub fn budget_gr<R: Rng + ?Sized>(inst: &Instance, cfg: &OracleConfig, rng: &mut R) -> Result<BudgetVector> {
    let deltas = round_increments(inst, cfg, rng)?;
    Ok(allocate(&deltas, inst.budget()))
}

/// Play every round with [`single_gr`] under a fixed budget vector.
pub fn run_partially_adaptive<R: Rng + ?Sized>(
    inst: &Instance,
    budget: &BudgetVector,
    cfg: &OracleConfig,
    rng: &mut R,
) -> Result<GreedyTrace> {
    if budget.0.len() != inst.horizon() {
        return Err(Error::arg("budget vector length differs from the horizon"));
    }
    let mut trace = GreedyTrace::default();
    for t in 0..inst.horizon() {
        let mut live = LiveRound::new(inst, t)?;
        single_gr(&mut live, budget.0[t], cfg, rng, &mut trace.records)?;
        trace.round_values.push(live.value());
        trace.selected.push(live.selected().to_vec());
    }
    Ok(trace)
}

/// Allocate once, then play the rounds in order.
pub fn multi_gr<R: Rng + ?Sized>(
    inst: &Instance,
    cfg: &OracleConfig,
    rng: &mut R,
) -> Result<(BudgetVector, GreedyTrace)> {
    let budget = budget_gr(inst, cfg, rng)?;
    let trace = run_partially_adaptive(inst, &budget, cfg, rng)?;
    Ok((budget, trace))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{InstanceHeader, Model, ModelKind};
    use crate::probing::{ProbingRound, SubmodularSpec};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn probing(rounds: Vec<(Vec<f64>, Vec<f64>)>, budget: usize) -> Instance {
        let n = rounds[0].0.len();
        let h = InstanceHeader::new(rounds.len(), budget, n, 0.01, 10.0, ModelKind::Probing);
        let rounds = rounds.into_iter().map(|(p, w)| ProbingRound { p, g: SubmodularSpec::Additive { w } }).collect();
        Instance::new(h, Model::Probing(rounds)).unwrap()
    }

    #[test]
    fn parameter_mapping() {
        let (d, x) = epsilon_to_params(0.1, 1.0, 1.0, 2.0, 10).unwrap();
        assert!((d - 0.001).abs() < 1e-15 && d == x);
        let (d3, _) = epsilon_to_params(0.3, 1.0, 1.0, 2.0, 10).unwrap();
        assert!((d3 / d - 3.0).abs() < 1e-12);
        let (one, _) = epsilon_to_params(100.0, 1.0, 1.0, 2.0, 10).unwrap();
        assert!((one - 1.0).abs() < 1e-15);
        assert!(epsilon_to_params(0.1, 1.5, 1.0, 2.0, 10).is_err());
        assert!(epsilon_to_params(0.0, 1.0, 1.0, 2.0, 10).is_err());
    }

    #[test]
    fn greedy_orders_by_weight() {
        let inst = probing(vec![(vec![1.0; 3], vec![3.0, 1.0, 2.0])], 2);
        let mut live = LiveRound::new(&inst, 0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut trace = Vec::new();
        single_gr(&mut live, 2, &OracleConfig::exact(), &mut rng, &mut trace).unwrap();
        assert_eq!(live.selected(), &[0, 2]);
        assert_eq!(trace.len(), 2);
        let mut live = LiveRound::new(&inst, 0).unwrap();
        single_gr(&mut live, 0, &OracleConfig::exact(), &mut rng, &mut trace).unwrap();
        assert!(live.selected().is_empty());
        assert!(single_gr(&mut live, 4, &OracleConfig::exact(), &mut rng, &mut trace).is_err());
    }

    #[test]
    fn single_bernoulli_value() {
        let inst = probing(vec![(vec![0.5], vec![2.0]), (vec![0.5], vec![2.0])], 1);
        assert_eq!(greedy_expected_value(&inst, &BudgetVector(vec![1, 0])).unwrap(), 1.0);
        assert_eq!(greedy_expected_value(&inst, &BudgetVector(vec![0, 0])).unwrap(), 0.0);
    }

    #[test]
    fn single_round_allocation_takes_everything() {
        let b = allocate(&[vec![0.1, 0.1, 0.0]], 2);
        assert_eq!(b.0, vec![2]);
    }

    #[test]
    fn allocation_respects_item_limit_and_ties() {
        // Round 0 has larger increments but only 2 items.
        let b = allocate(&[vec![5.0, 5.0], vec![1.0, 1.0]], 3);
        assert_eq!(b.0, vec![2, 1]);
        let b = allocate(&[vec![1.0, 1.0], vec![1.0, 1.0]], 1);
        assert_eq!(b.0, vec![1, 0]);
        // Running minimum: an increase at step 2 is flattened.
        let b = allocate(&[vec![1.0, 3.0], vec![2.0, 0.0]], 2);
        assert_eq!(b.0, vec![1, 1]);
    }

    #[test]
    fn increments_sum_to_greedy_value() {
        let inst = probing(vec![(vec![0.3, 0.8, 0.5], vec![1.0, 0.5, 2.0])], 2);
        let d = exact_increments(&inst, 0).unwrap();
        for b in 0..=3 {
            let sum: f64 = d[..b].iter().sum();
            assert!((sum - greedy_round_value(&inst, 0, b).unwrap()).abs() < 1e-12);
        }
    }

    #[test]
    fn enumerates_feasible_vectors() {
        let all = BudgetVector::enumerate(3, 2, 3);
        assert!(all.iter().all(|b| b.total() == 3 && b.0.iter().all(|&x| x <= 2)));
        assert_eq!(all.len(), 7);
    }
}
