//! Constructive instances on which natural strategies go wrong.

use rand::Rng;

use crate::env::tabular::{TabularObjective, TabularRound};
use crate::env::{Instance, InstanceHeader, Item, LiveRound, Model, ModelKind};
use crate::error::{Error, Result};
use crate::greedy::BudgetVector;
use crate::probing::{ProbingRound, SubmodularSpec};

/// Largest horizon for which the dense objective table is built.
pub const MAX_CONCENTRATED_HORIZON: usize = 20;

/// `T = B = n`, one global state, and `f_t(S) = |S|` at round `t_star`
/// (0-based) and 0 elsewhere. An even split of the budget collects 1.
pub fn concentrated_round_instance(horizon: usize, t_star: usize) -> Result<Instance> {
    if !(2..=MAX_CONCENTRATED_HORIZON).contains(&horizon) {
        return Err(Error::arg(format!("T must lie in 2..={MAX_CONCENTRATED_HORIZON}")));
    }
    if t_star >= horizon {
        return Err(Error::arg(format!("designated round {} outside 1..={horizon}", t_star + 1)));
    }
    let n = horizon;
    let rounds = (0..horizon)
        .map(|t| {
            let table = (0..1u64 << n).map(|m| if t == t_star { m.count_ones() as f64 } else { 0.0 }).collect();
            TabularRound::from_parts(n, vec![1.0], vec![0; n], TabularObjective::Table(table))
        })
        .collect::<Result<Vec<_>>>()?;
    let header = InstanceHeader::new(horizon, horizon, n, 1.0, 1.0, ModelKind::Tabular);
    Instance::new(header, Model::Tabular(rounds))
}

/// Two deterministic rounds, `B = n + 1`. Item 0 is worth 1 in both rounds;
/// every other item is worth 1/2 in round one and nothing in round two.
pub fn decoy_round_instance(n: usize) -> Result<Instance> {
    if n < 2 {
        return Err(Error::arg("at least two items are required"));
    }
    let mut first = vec![0.5; n];
    first[0] = 1.0;
    let mut second = vec![0.0; n];
    second[0] = 1.0;
    let rounds = [first, second]
        .into_iter()
        .map(|w| ProbingRound { p: vec![1.0; n], g: SubmodularSpec::Additive { w } })
        .collect();
    let header = InstanceHeader::new(2, n + 1, n, 1.0, 1.0, ModelKind::Probing);
    Instance::new(header, Model::Probing(rounds))
}

/// `B / T` per round with the remainder on the first rounds.
pub fn uniform_budget(inst: &Instance) -> Result<BudgetVector> {
    let (horizon, budget) = (inst.horizon(), inst.budget());
    let b = (0..horizon).map(|t| budget / horizon + usize::from(t < budget % horizon)).collect();
    BudgetVector::new(b, inst.n(), budget)
}

/// Greedy over (round, item) pairs restricted to the current and the next
/// round. Choosing an item of the next round moves there for good. When no
/// candidate has a positive expected increment the policy advances a round
/// without spending budget, or stops at the last round. Ties go to the lowest
/// (round, item). Returns the realized value.
pub fn cross_round_restricted_greedy<R: Rng + ?Sized>(inst: &Instance, rng: &mut R) -> Result<f64> {
    if !inst.supports_exact() {
        return Err(Error::Unsupported("restricted greedy needs exact marginals".into()));
    }
    let horizon = inst.horizon();
    let mut rounds = (0..horizon).map(|t| LiveRound::new(inst, t)).collect::<Result<Vec<_>>>()?;
    let mut current = 0;
    let mut budget = inst.budget();
    while budget > 0 {
        let mut best: Option<(usize, Item, f64)> = None;
        for t in current..(current + 2).min(horizon) {
            let obs = rounds[t].observation().expect("tabular or probing");
            for v in (0..inst.n()).filter(|&v| !obs.contains(v)) {
                let gain = inst.exact_marginal(t, v, obs)?;
                if best.is_none_or(|b| gain > b.2) {
                    best = Some((t, v, gain));
                }
            }
        }
        match best {
            Some((t, v, gain)) if gain > 0.0 => {
                rounds[t].select(v, rng)?;
                current = t;
                budget -= 1;
            }
            _ if current + 1 < horizon => current += 1,
            _ => break,
        }
    }
    Ok(rounds.iter().map(|r| r.value()).sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn restricted_greedy_collects_two() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for n in [2, 3, 10] {
            let inst = decoy_round_instance(n).unwrap();
            assert_eq!(cross_round_restricted_greedy(&inst, &mut rng).unwrap(), 2.0);
        }
    }

    #[test]
    fn uniform_split_collects_one() {
        let inst = concentrated_round_instance(5, 4).unwrap();
        assert_eq!(uniform_budget(&inst).unwrap().0, vec![1; 5]);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(cross_round_restricted_greedy(&inst, &mut rng).unwrap(), 5.0);
    }
}
