//! Optimal fully adaptive policies by backward induction.
//!
//! `R(t, b)` is the best expected value obtainable from rounds `t..T` with `b`
//! selections left; `R(T+1, ·) = 0` and `R(t, b)` is the value of the best
//! single-round policy whose STOP leaves pay `E[f_t | obs] + R(t+1, b - k)`.

mod tree;

use std::borrow::Cow;
use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::{json, Value};

use crate::env::{Instance, Item, LiveRound, Model, PartialState};
use crate::error::{Error, Result};
use crate::par;
pub use tree::TreeStats;
use tree::{Mode, RoundSolution, RoundTree};

/// Size limits for exact solving.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SolveGuards {
    pub max_items: usize,
    /// Positive-probability global states per round.
    pub max_states: usize,
    pub max_budget: usize,
}

impl Default for SolveGuards {
    fn default() -> Self {
        SolveGuards { max_items: 8, max_states: 64, max_budget: 16 }
    }
}

/// Policy action at a node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Action {
    Stop,
    Select(Item),
}

impl Serialize for Action {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Action::Stop => s.serialize_str("STOP"),
            Action::Select(v) => s.serialize_u64(*v as u64),
        }
    }
}

impl<'de> Deserialize<'de> for Action {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        match Value::deserialize(d)? {
            Value::String(s) if s == "STOP" => Ok(Action::Stop),
            Value::Number(n) if n.as_u64().is_some() => Ok(Action::Select(n.as_u64().unwrap() as Item)),
            other => Err(serde::de::Error::custom(format!("bad action {other}"))),
        }
    }
}

/// `R(t, b)` for `t` in `0..=T` (0-based; row `T` is all zeros) and `b` in `0..=B`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValueTable {
    rows: Vec<Vec<f64>>,
}

impl ValueTable {
    /// Value from 0-based round `t` on with `b` selections left.
    pub fn value(&self, t: usize, b: usize) -> f64 {
        self.rows[t][b]
    }

    /// Optimal expected value `R(1, B)`.
    pub fn optimum(&self) -> f64 {
        *self.rows[0].last().expect("non-empty table")
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    /// Terminal row is zero, each row is non-decreasing in `b`, and values never
    /// increase with `t`. Returns a description of the first violation.
    pub fn check_invariants(&self, tol: f64) -> std::result::Result<(), String> {
        let last = self.rows.len() - 1;
        if self.rows[last].iter().any(|&x| x != 0.0) {
            return Err("terminal row is not zero".into());
        }
        for (t, row) in self.rows.iter().enumerate() {
            for b in 1..row.len() {
                if row[b] + tol < row[b - 1] {
                    return Err(format!("R({}, {b}) < R({}, {})", t + 1, t + 1, b - 1));
                }
            }
            if t < last {
                for b in 0..row.len() {
                    if row[b] + tol < self.rows[t + 1][b] {
                        return Err(format!("R({}, {b}) < R({}, {b})", t + 1, t + 2));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Optimal policy: actions at every reachable (round, start-of-round budget,
/// observation) node together with the value table.
#[derive(Debug, Clone, PartialEq)]
pub struct ExactPolicy {
    pub horizon: usize,
    pub budget: usize,
    pub values: ValueTable,
    actions: BTreeMap<(usize, usize, PartialState), Action>,
}

impl ExactPolicy {
    pub fn optimum(&self) -> f64 {
        self.values.optimum()
    }

    pub fn action(&self, t: usize, b: usize, obs: &PartialState) -> Option<Action> {
        self.actions.get(&(t, b, obs.clone())).copied()
    }

    pub fn nodes(&self) -> usize {
        self.actions.len()
    }

    /// Reachable (round, start-of-round budget) pairs.
    pub fn round_budgets(&self) -> BTreeSet<(usize, usize)> {
        self.actions.keys().map(|(t, b, _)| (*t, *b)).collect()
    }

    /// `{"T", "B", "R": [[...]], "actions": {"t|b|obs": "STOP" | item}}` with
    /// 1-based rounds.
    pub fn to_json(&self) -> Value {
        let actions: BTreeMap<String, Action> =
            self.actions.iter().map(|((t, b, obs), a)| (format!("{}|{b}|{obs}", t + 1), *a)).collect();
        json!({ "T": self.horizon, "B": self.budget, "R": self.values.rows, "actions": actions })
    }

    pub fn from_json(value: &Value) -> Result<Self> {
        #[derive(Deserialize)]
        struct Raw {
            #[serde(rename = "T")]
            horizon: usize,
            #[serde(rename = "B")]
            budget: usize,
            #[serde(rename = "R")]
            rows: Vec<Vec<f64>>,
            actions: BTreeMap<String, Action>,
        }
        let raw = Raw::deserialize(value)?;
        if raw.rows.len() != raw.horizon + 1 || raw.rows.iter().any(|r| r.len() != raw.budget + 1) {
            return Err(Error::invalid("value table shape does not match T and B"));
        }
        let mut actions = BTreeMap::new();
        for (key, a) in raw.actions {
            let bad = || Error::invalid(format!("malformed policy key {key:?}"));
            let mut parts = key.splitn(3, '|');
            let t: usize = parts.next().and_then(|x| x.parse().ok()).ok_or_else(bad)?;
            let b: usize = parts.next().and_then(|x| x.parse().ok()).ok_or_else(bad)?;
            let obs = parts.next().and_then(PartialState::parse).ok_or_else(bad)?;
            if t == 0 || t > raw.horizon {
                return Err(bad());
            }
            actions.insert((t - 1, b, obs), a);
        }
        Ok(ExactPolicy { horizon: raw.horizon, budget: raw.budget, values: ValueTable { rows: raw.rows }, actions })
    }
}

/// Deterministic round whose value depends only on a weight sum of active
/// items: the best `i`-subset is a prefix of the weight order.
struct PrefixRound {
    order: Vec<Item>,
    locals: Vec<u32>,
    prefix: Vec<f64>,
}

enum Prepared<'a> {
    Tree(Cow<'a, Instance>),
    Prefix(Vec<PrefixRound>),
}

fn prefix_rounds(inst: &Instance) -> Option<Vec<PrefixRound>> {
    let Model::Probing(rounds) = inst.model() else {
        return None;
    };
    if !rounds.iter().all(|r| r.is_deterministic() && r.g.is_weight_sum()) {
        return None;
    }
    let n = inst.n();
    Some(
        rounds
            .iter()
            .map(|r| {
                let locals: Vec<u32> = r.p.iter().map(|&p| (p == 1.0) as u32).collect();
                let weight = |v: Item| if locals[v] == 1 { r.g.eval([v]) } else { 0.0 };
                let mut order: Vec<Item> = (0..n).collect();
                order.sort_by(|&a, &b| weight(b).total_cmp(&weight(a)).then(a.cmp(&b)));
                let active: Vec<Item> = order.iter().copied().filter(|&v| locals[v] == 1).collect();
                let prefix = (0..=n).map(|i| r.g.eval(active.iter().copied().take(i))).collect();
                PrefixRound { order, locals, prefix }
            })
            .collect(),
    )
}

fn prepare<'a>(inst: &'a Instance, guards: &SolveGuards) -> Result<Prepared<'a>> {
    if let Some(rounds) = prefix_rounds(inst) {
        return Ok(Prepared::Prefix(rounds));
    }
    if inst.n() > guards.max_items {
        return Err(Error::guard(format!("{} items exceed the exact-solver limit of {}", inst.n(), guards.max_items)));
    }
    if inst.budget() > guards.max_budget {
        return Err(Error::guard(format!(
            "budget {} exceeds the exact-solver limit of {}",
            inst.budget(),
            guards.max_budget
        )));
    }
    let tab = match inst.model() {
        Model::Tabular(_) => Cow::Borrowed(inst),
        _ => Cow::Owned(inst.to_tabular()?),
    };
    for t in 0..tab.horizon() {
        let h = tab.tabular_round(t).expect("tabular").support_size();
        if h > guards.max_states.min(64) {
            return Err(Error::guard(format!(
                "round {} has {h} positive-probability states (limit {})",
                t + 1,
                guards.max_states.min(64)
            )));
        }
    }
    Ok(Prepared::Tree(tab))
}

fn solve_round(prep: &Prepared<'_>, t: usize, b: usize, cont: &[f64], mode: Mode) -> Result<RoundSolution> {
    match prep {
        Prepared::Tree(inst) => {
            let round = inst.tabular_round(t).expect("tabular");
            Ok(RoundTree::new(round, b, cont, mode)?.solve())
        }
        Prepared::Prefix(rounds) => {
            let r = &rounds[t];
            let limit = b.min(r.order.len());
            let stop = match mode {
                Mode::Exactly => limit,
                Mode::Free => {
                    let total = |i: usize| r.prefix[i] + cont[b - i];
                    (0..=limit).fold(0, |best, i| if total(i) > total(best) { i } else { best })
                }
            };
            let value = r.prefix[stop] + if mode == Mode::Free { cont[b - stop] } else { 0.0 };
            let mut actions = BTreeMap::new();
            let mut obs = PartialState::new();
            for &v in &r.order[..stop] {
                actions.insert(obs.clone(), Action::Select(v));
                obs.insert(v, r.locals[v]);
            }
            actions.insert(obs, Action::Stop);
            Ok(RoundSolution { value, actions, exits: BTreeSet::from([b - stop]) })
        }
    }
}

/// Best single-round policy at 0-based round `t` with `b` selections and
/// continuation values `cont[0..=b]`.
pub fn solve_single_round(
    inst: &Instance,
    t: usize,
    b: usize,
    cont: &[f64],
    guards: &SolveGuards,
) -> Result<(f64, BTreeMap<PartialState, Action>)> {
    if t >= inst.horizon() {
        return Err(Error::arg(format!("round {} outside 1..={}", t + 1, inst.horizon())));
    }
    if cont.len() != b + 1 {
        return Err(Error::arg(format!("continuation has {} entries, expected {}", cont.len(), b + 1)));
    }
    let prep = prepare(inst, guards)?;
    let sol = solve_round(&prep, t, b, cont, Mode::Free)?;
    Ok((sol.value, sol.actions))
}

/// Backward induction over (round, budget).
pub fn solve_dp(inst: &Instance, guards: &SolveGuards) -> Result<ExactPolicy> {
    let prep = prepare(inst, guards)?;
    let (horizon, budget) = (inst.horizon(), inst.budget());
    let mut rows = vec![vec![0.0; budget + 1]; horizon + 1];
    let mut solutions: Vec<Vec<RoundSolution>> = Vec::with_capacity(horizon);
    for t in (0..horizon).rev() {
        let next = &rows[t + 1];
        let sols = par::map_indexed(budget + 1, |b| solve_round(&prep, t, b, &next[..=b], Mode::Free))
            .into_iter()
            .collect::<Result<Vec<_>>>()?;
        rows[t] = sols.iter().map(|s| s.value).collect();
        solutions.push(sols);
        log::debug!("solved round {} for budgets 0..={budget}", t + 1);
    }
    solutions.reverse();
    let mut actions = BTreeMap::new();
    let mut reach = BTreeSet::from([budget]);
    for (t, sols) in solutions.iter_mut().enumerate() {
        let mut next = BTreeSet::new();
        for &b in &reach {
            let sol = &mut sols[b];
            next.extend(sol.exits.iter().copied());
            for (obs, a) in std::mem::take(&mut sol.actions) {
                actions.insert((t, b, obs), a);
            }
        }
        reach = next;
    }
    Ok(ExactPolicy { horizon, budget, values: ValueTable { rows }, actions })
}

/// One rollout of `policy`. Returns the per-round selections and the realized
/// total value. Influence instances must be executed in tabular form.
pub fn execute_exact_policy<R: Rng + ?Sized>(
    policy: &ExactPolicy,
    inst: &Instance,
    rng: &mut R,
) -> Result<(Vec<Vec<Item>>, f64)> {
    if matches!(inst.model(), Model::Influence(_)) {
        return Err(Error::Unsupported("exact policies run on the tabular form of influence instances".into()));
    }
    if policy.horizon != inst.horizon() || policy.budget != inst.budget() {
        return Err(Error::arg("policy was built for a different horizon or budget"));
    }
    let mut b = inst.budget();
    let mut total = 0.0;
    let mut chosen = Vec::with_capacity(inst.horizon());
    for t in 0..inst.horizon() {
        let mut live = LiveRound::new(inst, t)?;
        let start = b;
        loop {
            let obs = live.observation().expect("tabular or probing round");
            let node = || format!("{}|{start}|{obs}", t + 1);
            match policy.action(t, start, obs).ok_or_else(|| Error::UnmappedNode(node()))? {
                Action::Stop => break,
                Action::Select(v) => {
                    if b == 0 || !live.eligible(v) {
                        return Err(Error::UnmappedNode(node()));
                    }
                    live.select(v, rng)?;
                    b -= 1;
                }
            }
        }
        total += live.value();
        chosen.push(live.selected().to_vec());
    }
    Ok((chosen, total))
}

/// `OPT_t(b)` for `b` in `0..=b_max`: best adaptive value at round `t` when
/// exactly `min(b, n)` items must be selected.
pub fn per_round_opt_table(inst: &Instance, t: usize, b_max: usize, guards: &SolveGuards) -> Result<Vec<f64>> {
    if t >= inst.horizon() {
        return Err(Error::arg(format!("round {} outside 1..={}", t + 1, inst.horizon())));
    }
    let prep = prepare(inst, guards)?;
    par::map_indexed(b_max + 1, |b| solve_round(&prep, t, b, &[], Mode::Exactly).map(|s| s.value)).into_iter().collect()
}

/// Node counts of the raw game tree of round `t` with `b` selections.
pub fn tree_stats(inst: &Instance, t: usize, b: usize, guards: &SolveGuards) -> Result<TreeStats> {
    if t >= inst.horizon() {
        return Err(Error::arg(format!("round {} outside 1..={}", t + 1, inst.horizon())));
    }
    let tab = match inst.model() {
        Model::Tabular(_) => Cow::Borrowed(inst),
        _ => Cow::Owned(inst.to_tabular()?),
    };
    if inst.n() > guards.max_items || b > guards.max_budget {
        return Err(Error::guard("instance exceeds the exact-solver limits"));
    }
    let round = tab.tabular_round(t).expect("tabular");
    if round.support_size() > guards.max_states {
        return Err(Error::guard(format!("{} positive-probability states", round.support_size())));
    }
    tree::count_raw(round, b)
}
