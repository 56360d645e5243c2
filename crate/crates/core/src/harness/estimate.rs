//! Monte-Carlo policy evaluation.

use serde::{Deserialize, Serialize};

use crate::env::Instance;
use crate::error::{Error, Result};
use crate::par;
use crate::rng::{stream, tags, Stream};
use crate::stats::{mean_and_variance, CompensatedSum};

/// Confidence level of reported half-widths.
pub const CONFIDENCE: f64 = 0.95;
const Z_95: f64 = 1.959_963_984_540_054;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CiMethod {
    Hoeffding,
    Normal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValueEstimate {
    pub mean: f64,
    pub half_width: f64,
    pub std_error: f64,
    pub rollouts: u64,
    pub seed: u64,
    pub method: CiMethod,
}

/// Hoeffding half-width for values in an interval of length `range`.
pub fn hoeffding_half_width(range: f64, rollouts: u64) -> f64 {
    (range * range * (2.0 / (1.0 - CONFIDENCE)).ln() / (2.0 * rollouts as f64)).sqrt()
}

/// Largest possible rollout value `T · n · Λ`.
pub fn value_range(inst: &Instance) -> f64 {
    let h = inst.header();
    h.horizon as f64 * h.n as f64 * h.capital_lambda
}

/// Mean of `rollouts` independent runs; run `r` draws from
/// `stream(seed, [ROLLOUT, r])`. `range` bounds a single rollout value for
/// the Hoeffding width.
pub fn estimate_with_range<F>(
    runner: F,
    range: f64,
    rollouts: u64,
    seed: u64,
    method: CiMethod,
) -> Result<ValueEstimate>
where
    F: Fn(&mut Stream) -> Result<f64> + Sync + Send,
{
    if rollouts == 0 {
        return Err(Error::arg("at least one rollout is required"));
    }
    let values = par::map_indexed(rollouts as usize, |r| runner(&mut stream(seed, &[tags::ROLLOUT, r as u64])))
        .into_iter()
        .collect::<Result<Vec<f64>>>()?;
    let mean = values.iter().copied().collect::<CompensatedSum>().value() / rollouts as f64;
    let (_, var) = mean_and_variance(&values);
    let std_error = (var / rollouts as f64).sqrt();
    let half_width = match method {
        CiMethod::Hoeffding => hoeffding_half_width(range, rollouts),
        CiMethod::Normal => Z_95 * std_error,
    };
    Ok(ValueEstimate { mean, half_width, std_error, rollouts, seed, method })
}

/// [`estimate_with_range`] with the instance's value range.
pub fn estimate_policy_value<F>(
    runner: F,
    inst: &Instance,
    rollouts: u64,
    seed: u64,
    method: CiMethod,
) -> Result<ValueEstimate>
where
    F: Fn(&mut Stream) -> Result<f64> + Sync + Send,
{
    estimate_with_range(runner, value_range(inst), rollouts, seed, method)
}
