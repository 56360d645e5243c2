//! The budget-adaptivity gap instance.
//!
//! `T` is a perfect square, there are `n = T^{3/2}` items, `B = n`, every item
//! is active with probability `1/√T` in every round, and each round is worth 1
//! as soon as one selected item is active. Spreading the budget evenly gives
//! `T (1 - (1 - 1/√T)^{√T})`; the fully adaptive policy that moves on after
//! the first success is worth `E[min(T, Bin(B, 1/√T))]`.

use rand_distr::{Binomial, Distribution};
use serde::Serialize;

use crate::env::{Instance, InstanceHeader, Model, ModelKind};
use crate::error::{Error, Result};
use crate::harness::estimate::{estimate_with_range, value_range, CiMethod, ValueEstimate};
use crate::probing::{ProbingRound, SubmodularSpec};

/// `e / (e - 1)`.
pub fn gap_limit() -> f64 {
    let e = std::f64::consts::E;
    e / (e - 1.0)
}

fn root(horizon: usize) -> Result<usize> {
    let k = (horizon as f64).sqrt().round() as usize;
    if horizon < 4 || k * k != horizon {
        return Err(Error::arg(format!("T = {horizon} must be a perfect square of at least 4")));
    }
    Ok(k)
}

pub fn gap_instance(horizon: usize) -> Result<Instance> {
    let k = root(horizon)?;
    let n = horizon * k;
    let p = 1.0 / k as f64;
    let round = ProbingRound { p: vec![p; n], g: SubmodularSpec::BudgetAdditive { w: vec![1.0; n], cap: 1.0 } };
    let header = InstanceHeader::new(horizon, n, n, p, 1.0, ModelKind::Probing);
    Instance::new(header, Model::Probing(vec![round; horizon]))
}

/// `T (1 - (1 - 1/√T)^{√T})`.
pub fn sigma_partial_closed_form(horizon: usize) -> Result<f64> {
    let k = root(horizon)? as f64;
    Ok(horizon as f64 * (1.0 - (1.0 - 1.0 / k).powf(k)))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GapReport {
    #[serde(rename = "T")]
    pub horizon: usize,
    pub n: usize,
    #[serde(rename = "B")]
    pub budget: usize,
    pub p: f64,
    pub sigma_partial_closed_form: f64,
    pub sigma_adaptive_estimate: ValueEstimate,
    pub ratio: f64,
    pub ratio_std_error: f64,
    /// Limit of the ratio as `T` grows.
    pub limit: f64,
}

pub fn gap_report(horizon: usize, rollouts: u64, seed: u64, method: CiMethod) -> Result<GapReport> {
    let inst = gap_instance(horizon)?;
    let k = root(horizon)?;
    let (n, p) = (horizon * k, 1.0 / k as f64);
    let closed = sigma_partial_closed_form(horizon)?;
    let binomial = Binomial::new(n as u64, p).map_err(|e| Error::arg(e.to_string()))?;
    let cap = horizon as u64;
    let est = estimate_with_range(
        |rng| Ok(binomial.sample(rng).min(cap) as f64),
        value_range(&inst),
        rollouts,
        seed,
        method,
    )?;
    Ok(GapReport {
        horizon,
        n,
        budget: n,
        p,
        sigma_partial_closed_form: closed,
        ratio: est.mean / closed,
        ratio_std_error: est.std_error / closed,
        sigma_adaptive_estimate: est,
        limit: gap_limit(),
    })
}

/// `T,n,B,p,closed_form,estimate,std_error,ratio` rows with a header line.
pub fn gap_csv(reports: &[GapReport]) -> String {
    let mut out = String::from("T,n,B,p,closed_form,estimate,std_error,ratio\n");
    for r in reports {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            r.horizon,
            r.n,
            r.budget,
            r.p,
            r.sigma_partial_closed_form,
            r.sigma_adaptive_estimate.mean,
            r.sigma_adaptive_estimate.std_error,
            r.ratio
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn construction() {
        for (t, n, p) in [(4, 8, 0.5), (9, 27, 1.0 / 3.0), (100, 1000, 0.1)] {
            let inst = gap_instance(t).unwrap();
            assert_eq!((inst.n(), inst.budget()), (n, n));
            let Model::Probing(rounds) = inst.model() else { panic!() };
            assert!(rounds.iter().all(|r| r.p.iter().all(|&x| (x - p).abs() < 1e-15)));
        }
        assert!(gap_instance(8).is_err());
        assert!(gap_instance(1).is_err());
    }

    #[test]
    fn closed_forms() {
        assert!((sigma_partial_closed_form(4).unwrap() - 3.0).abs() < 1e-12);
        assert!((sigma_partial_closed_form(100).unwrap() - 65.132).abs() < 1e-3);
    }
}
