//! Expected number of selections an exact policy makes in each round.

use std::borrow::Cow;
use std::collections::BTreeMap;

use crate::env::{Instance, Model, PartialState};
use crate::error::{Error, Result};
use crate::exact::{Action, ExactPolicy};

/// `d*_t` for every round, by propagating the distribution of the budget left
/// at the start of each round through the policy tree.
pub fn policy_round_usage(policy: &ExactPolicy, inst: &Instance) -> Result<Vec<f64>> {
    let inst = match inst.model() {
        Model::Influence(_) => Cow::Owned(inst.to_tabular()?),
        _ => Cow::Borrowed(inst),
    };
    let mut start: BTreeMap<usize, f64> = BTreeMap::from([(inst.budget(), 1.0)]);
    let mut usage = Vec::with_capacity(inst.horizon());
    for t in 0..inst.horizon() {
        let mut used = 0.0;
        let mut next: BTreeMap<usize, f64> = BTreeMap::new();
        for (&b, &pb) in &start {
            let mut stack = vec![(PartialState::new(), pb)];
            while let Some((obs, p)) = stack.pop() {
                let node = || Error::UnmappedNode(format!("{}|{b}|{obs}", t + 1));
                match policy.action(t, b, &obs).ok_or_else(node)? {
                    Action::Stop => *next.entry(b - obs.len()).or_insert(0.0) += p,
                    Action::Select(v) => {
                        used += p;
                        for (local, q) in inst.outcome_distribution(t, &obs, v)? {
                            stack.push((obs.with(v, local), p * q));
                        }
                    }
                }
            }
        }
        usage.push(used);
        start = next;
    }
    Ok(usage)
}
