//! Multi-round binary submodular stochastic probing.
//!
//! Every item is independently active with a round-specific probability, and a
//! round's value is a monotone submodular function `g_t` of the selected items
//! that turned out active.

use serde::{Deserialize, Serialize};

use crate::env::{tabular::TabularObjective, tabular::TabularRound, Instance, InstanceHeader, Item, Model, ModelKind};
use crate::error::{Error, Result};

/// Hard limit on items for full enumeration of activation vectors.
pub const MAX_ENUMERABLE_ITEMS: usize = 20;
/// Above this many items enumeration works but is slow; a warning is logged.
pub const RECOMMENDED_ENUMERABLE_ITEMS: usize = 12;

/// Closed families of monotone submodular set functions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum SubmodularSpec {
    /// `g(A) = sum of w(v)` over `A`.
    Additive { w: Vec<f64> },
    /// `g(A) = min(cap, sum of w(v))`.
    BudgetAdditive { w: Vec<f64>, cap: f64 },
    /// `g(A) = total weight of universe elements covered by some `v` in `A``.
    Coverage { weights: Vec<f64>, covers: Vec<Vec<usize>> },
}

impl SubmodularSpec {
    pub fn items(&self) -> usize {
        match self {
            SubmodularSpec::Additive { w } | SubmodularSpec::BudgetAdditive { w, .. } => w.len(),
            SubmodularSpec::Coverage { covers, .. } => covers.len(),
        }
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if self.items() != n {
            return Err(Error::invalid(format!("submodular function defined on {} items, expected {n}", self.items())));
        }
        let bad = |x: &f64| !(x.is_finite() && *x >= 0.0);
        match self {
            SubmodularSpec::Additive { w } => {
                if w.iter().any(bad) {
                    return Err(Error::invalid("additive weights must be finite and >= 0"));
                }
            }
            SubmodularSpec::BudgetAdditive { w, cap } => {
                if w.iter().any(bad) || bad(cap) {
                    return Err(Error::invalid("budget-additive weights and cap must be finite and >= 0"));
                }
            }
            SubmodularSpec::Coverage { weights, covers } => {
                if weights.iter().any(bad) {
                    return Err(Error::invalid("coverage weights must be finite and >= 0"));
                }
                if let Some(e) = covers.iter().flatten().find(|&&e| e >= weights.len()) {
                    return Err(Error::invalid(format!("cover set references unknown element {e}")));
                }
            }
        }
        Ok(())
    }

    /// Evaluate on a set of items. Duplicates are ignored.
    pub fn eval<I: IntoIterator<Item = Item>>(&self, items: I) -> f64 {
        match self {
            SubmodularSpec::Additive { w } => dedup(items).map(|v| w[v]).sum(),
            SubmodularSpec::BudgetAdditive { w, cap } => {
                let s: f64 = dedup(items).map(|v| w[v]).sum();
                s.min(*cap)
            }
            SubmodularSpec::Coverage { weights, covers } => {
                let mut covered = vec![false; weights.len()];
                let mut total = 0.0;
                for v in items {
                    for &e in &covers[v] {
                        if !covered[e] {
                            covered[e] = true;
                            total += weights[e];
                        }
                    }
                }
                total
            }
        }
    }

    pub fn eval_mask(&self, mask: u64) -> f64 {
        self.eval(mask_items(mask))
    }

    /// Marginal gain of `v` on top of `base`.
    pub fn gain(&self, base: &[Item], v: Item) -> f64 {
        if base.contains(&v) {
            return 0.0;
        }
        match self {
            SubmodularSpec::Additive { w } => w[v],
            _ => {
                let before = self.eval(base.iter().copied());
                let after = self.eval(base.iter().copied().chain(std::iter::once(v)));
                after - before
            }
        }
    }

    /// Largest single-item increment over any base set; by submodularity this
    /// is the value of the best singleton.
    pub fn max_increment(&self) -> f64 {
        (0..self.items()).map(|v| self.eval([v])).fold(0.0, f64::max)
    }

    /// True for families whose value depends only on a weight sum, so that the
    /// best `i`-subset is a weight-sorted prefix.
    pub fn is_weight_sum(&self) -> bool {
        matches!(self, SubmodularSpec::Additive { .. } | SubmodularSpec::BudgetAdditive { .. })
    }
}

fn dedup<I: IntoIterator<Item = Item>>(items: I) -> impl Iterator<Item = Item> {
    let mut v: Vec<Item> = items.into_iter().collect();
    v.sort_unstable();
    v.dedup();
    v.into_iter()
}

pub(crate) fn mask_items(mask: u64) -> impl Iterator<Item = Item> {
    (0..64).filter(move |i| mask >> i & 1 == 1)
}

/// One round of a probing instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbingRound {
    /// Activation probability per item.
    pub p: Vec<f64>,
    pub g: SubmodularSpec,
}

impl ProbingRound {
    pub fn validate(&self, n: usize) -> Result<()> {
        if self.p.len() != n {
            return Err(Error::invalid(format!("{} activation probabilities, expected {n}", self.p.len())));
        }
        if let Some((v, p)) = self.p.iter().enumerate().find(|(_, p)| !(0.0..=1.0).contains(*p)) {
            return Err(Error::invalid(format!("activation probability {p} of item {v} outside [0,1]")));
        }
        self.g.validate(n)
    }

    /// Deterministic round: every activation probability is 0 or 1.
    pub fn is_deterministic(&self) -> bool {
        self.p.iter().all(|&p| p == 0.0 || p == 1.0)
    }
}

/// `f_t(S, phi) = g_t({v in S : phi(v)})`.
pub fn probing_eval(round: &ProbingRound, selected: &[Item], phi: &[bool]) -> f64 {
    round.g.eval(selected.iter().copied().filter(|&v| phi[v]))
}

/// Enumerate all `2^n` activation vectors of a probing instance.
///
/// State `s` has item `v` active iff bit `v` of `s` is set; its local state is
/// that bit. Zero-probability vectors are kept so state indices stay aligned
/// with bit patterns.
pub fn probing_to_tabular(instance: &Instance) -> Result<Instance> {
    let rounds = match instance.model() {
        Model::Probing(r) => r,
        _ => return Err(Error::Unsupported("probing_to_tabular on a non-probing instance".into())),
    };
    let n = instance.n();
    if n > MAX_ENUMERABLE_ITEMS {
        return Err(Error::guard(format!(
            "probing instance with {n} items exceeds the enumeration limit of {MAX_ENUMERABLE_ITEMS}"
        )));
    }
    if n > RECOMMENDED_ENUMERABLE_ITEMS {
        log::warn!("enumerating 2^{n} activation vectors per round");
    }
    let states = 1usize << n;
    let tab_rounds = rounds
        .iter()
        .map(|round| {
            let mut probs = Vec::with_capacity(states);
            let mut locals = Vec::with_capacity(states * n);
            for s in 0..states {
                let mut pr = 1.0;
                for v in 0..n {
                    let active = s >> v & 1 == 1;
                    pr *= if active { round.p[v] } else { 1.0 - round.p[v] };
                    locals.push(active as u32);
                }
                probs.push(pr);
            }
            TabularRound::from_parts(n, probs, locals, TabularObjective::Probing(round.g.clone()))
        })
        .collect::<Result<Vec<_>>>()?;
    let header = InstanceHeader { kind: ModelKind::Tabular, ..instance.header().clone() };
    Instance::new(header, Model::Tabular(tab_rounds))
}
