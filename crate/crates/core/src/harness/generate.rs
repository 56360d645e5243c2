//! Random small tabular instances.

use rand::Rng;
use serde::Serialize;

use crate::env::tabular::{TabularObjective, TabularRound};
use crate::env::{Instance, InstanceHeader, Model, ModelKind};
use crate::error::Result;
use crate::probing::{ProbingRound, SubmodularSpec};
use crate::rng::{stream, tags};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    /// Independent item states; coverage whose cover sets depend on each
    /// item's own state. Adaptive submodular.
    ProductCoverage,
    /// Correlated global states, each with its own coverage function.
    CorrelatedCoverage,
    /// Correlated states with arbitrary monotone tables.
    GeneralMonotone,
}

pub const FAMILIES: [Family; 3] = [Family::ProductCoverage, Family::CorrelatedCoverage, Family::GeneralMonotone];

/// Shape limits of generated instances.
#[derive(Debug, Clone, Copy)]
pub struct Limits {
    pub max_rounds: usize,
    pub max_items: usize,
    pub max_states: usize,
    pub max_budget: usize,
}

impl Default for Limits {
    fn default() -> Self {
        Limits { max_rounds: 3, max_items: 3, max_states: 4, max_budget: 3 }
    }
}

const UNIVERSE: usize = 4;

fn random_probs<R: Rng + ?Sized>(k: usize, rng: &mut R) -> Vec<f64> {
    let raw: Vec<f64> = (0..k).map(|_| rng.random_range(0.05..1.0)).collect();
    let total: f64 = raw.iter().sum();
    raw.iter().map(|x| x / total).collect()
}

fn random_cover<R: Rng + ?Sized>(rng: &mut R) -> u32 {
    (0..UNIVERSE).filter(|_| rng.random_bool(0.4)).fold(0, |m, e| m | 1 << e)
}

fn coverage_value(weights: &[f64], covered: u32) -> f64 {
    (0..UNIVERSE).filter(|e| covered >> e & 1 == 1).map(|e| weights[e]).sum()
}

fn product_round<R: Rng + ?Sized>(n: usize, max_states: usize, rng: &mut R) -> Result<TabularRound> {
    // Local-state counts in {1, 2} with product at most `max_states`.
    let mut counts = vec![1usize; n];
    let mut product = 1;
    for c in counts.iter_mut() {
        if product * 2 <= max_states && rng.random_bool(0.7) {
            *c = 2;
            product *= 2;
        }
    }
    let weights: Vec<f64> = (0..UNIVERSE).map(|_| rng.random_range(0.0..1.0)).collect();
    let local_probs: Vec<Vec<f64>> = counts.iter().map(|&c| random_probs(c, rng)).collect();
    let covers: Vec<Vec<u32>> = counts.iter().map(|&c| (0..c).map(|_| random_cover(rng)).collect()).collect();
    let mut probs = Vec::with_capacity(product);
    let mut locals = Vec::with_capacity(product * n);
    for s in 0..product {
        let mut rest = s;
        let mut p = 1.0;
        for v in 0..n {
            let l = rest % counts[v];
            rest /= counts[v];
            p *= local_probs[v][l];
            locals.push(l as u32);
        }
        probs.push(p);
    }
    let mut table = vec![0.0; (1 << n) * product];
    for mask in 0..1usize << n {
        for s in 0..product {
            let covered =
                (0..n).filter(|v| mask >> v & 1 == 1).fold(0, |c, v| c | covers[v][locals[s * n + v] as usize]);
            table[mask * product + s] = coverage_value(&weights, covered);
        }
    }
    TabularRound::from_parts(n, probs, locals, TabularObjective::Table(table))
}

fn correlated_round<R: Rng + ?Sized>(n: usize, max_states: usize, general: bool, rng: &mut R) -> Result<TabularRound> {
    let h = rng.random_range(1..=max_states);
    let probs = random_probs(h, rng);
    let locals: Vec<u32> = (0..h * n).map(|_| rng.random_range(0..2)).collect();
    let mut table = vec![0.0; (1 << n) * h];
    for s in 0..h {
        if general {
            for mask in 1..1usize << n {
                let base = (0..n)
                    .filter(|v| mask >> v & 1 == 1)
                    .map(|v| table[(mask & !(1 << v)) * h + s])
                    .fold(0.0, f64::max);
                let bump = if rng.random_bool(0.3) { 0.0 } else { rng.random_range(0.0..1.0) };
                table[mask * h + s] = base + bump;
            }
        } else {
            let weights: Vec<f64> = (0..UNIVERSE).map(|_| rng.random_range(0.0..1.0)).collect();
            let covers: Vec<u32> = (0..n).map(|_| random_cover(rng)).collect();
            for mask in 0..1usize << n {
                let covered = (0..n).filter(|v| mask >> v & 1 == 1).fold(0, |c, v| c | covers[v]);
                table[mask * h + s] = coverage_value(&weights, covered);
            }
        }
    }
    TabularRound::from_parts(n, probs, locals, TabularObjective::Table(table))
}

/// Header constants read off the rounds: `Λ` is the largest increment and
/// `λ` the best single-item expected value. `None` if every value is 0.
fn constants(rounds: &[TabularRound]) -> Option<(f64, f64)> {
    let cap = rounds.iter().map(TabularRound::max_increment).fold(0.0, f64::max);
    let best = rounds
        .iter()
        .flat_map(|r| (0..r.items()).map(move |v| r.support().map(|s| r.prob(s) * r.value(1 << v, s)).sum::<f64>()))
        .fold(0.0, f64::max);
    (cap > 0.0 && best > 0.0).then_some((best.min(cap), cap))
}

pub fn random_tabular<R: Rng + ?Sized>(family: Family, limits: &Limits, rng: &mut R) -> Result<Instance> {
    loop {
        let horizon = rng.random_range(1..=limits.max_rounds);
        let n = rng.random_range(1..=limits.max_items);
        let budget = rng.random_range(0..=limits.max_budget.min(n * horizon - 1));
        let rounds = (0..horizon)
            .map(|_| match family {
                Family::ProductCoverage => product_round(n, limits.max_states, rng),
                Family::CorrelatedCoverage => correlated_round(n, limits.max_states, false, rng),
                Family::GeneralMonotone => correlated_round(n, limits.max_states, true, rng),
            })
            .collect::<Result<Vec<_>>>()?;
        let Some((lambda, cap)) = constants(&rounds) else {
            continue;
        };
        let header = InstanceHeader::new(horizon, budget, n, lambda, cap, ModelKind::Tabular);
        return Instance::new(header, Model::Tabular(rounds));
    }
}

/// `count` instances cycling through the families; instance `i` is drawn from
/// `stream(seed, [GENERATOR, i])`.
pub fn random_instances(seed: u64, count: usize, limits: &Limits) -> Result<Vec<(Family, Instance)>> {
    (0..count)
        .map(|i| {
            let family = FAMILIES[i % FAMILIES.len()];
            let mut rng = stream(seed, &[tags::GENERATOR, i as u64]);
            random_tabular(family, limits, &mut rng).map(|inst| (family, inst))
        })
        .collect()
}

/// Random probing instance with coverage objectives.
pub fn random_probing<R: Rng + ?Sized>(horizon: usize, n: usize, budget: usize, rng: &mut R) -> Result<Instance> {
    loop {
        let rounds: Vec<ProbingRound> = (0..horizon)
            .map(|_| ProbingRound {
                p: (0..n).map(|_| rng.random_range(0.0..1.0)).collect(),
                g: SubmodularSpec::Coverage {
                    weights: (0..UNIVERSE).map(|_| rng.random_range(0.0..1.0)).collect(),
                    covers: (0..n).map(|_| (0..UNIVERSE).filter(|_| rng.random_bool(0.4)).collect()).collect(),
                },
            })
            .collect();
        let cap = rounds.iter().map(|r| r.g.max_increment()).fold(0.0, f64::max);
        let best = rounds.iter().flat_map(|r| (0..n).map(move |v| r.p[v] * r.g.eval([v]))).fold(0.0, f64::max);
        if cap == 0.0 || best == 0.0 {
            continue;
        }
        let header = InstanceHeader::new(horizon, budget, n, best, cap, ModelKind::Probing);
        return Instance::new(header, Model::Probing(rounds));
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generated_instances_respect_limits() {
        let limits = Limits::default();
        for (_, inst) in random_instances(1, 60, &limits).unwrap() {
            assert!(inst.n() <= 3 && inst.horizon() <= 3 && inst.budget() <= 3);
            for t in 0..inst.horizon() {
                assert!(inst.tabular_round(t).unwrap().support_size() <= 4);
            }
        }
    }
}
