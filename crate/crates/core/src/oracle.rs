//! Monte-Carlo increment oracles.
//!
//! `oracle1` estimates the conditional expected increment of one item given
//! the current observation. `oracle2` estimates, for every step `i`, the
//! expected increment obtained by the greedy single-round policy at its `i`-th
//! selection; one batch of greedy rollouts yields all `n` estimates.
//!
//! Samples are drawn in fixed-size blocks, each from its own derived stream,
//! and block sums are combined in block order, so estimates depend only on the
//! seed and not on the number of worker threads.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::env::{Instance, Item, LiveRound, Model, RoundView};
use crate::error::{Error, Result};
use crate::influence::hypothetical_spread;
use crate::par;
use crate::rng::{fork, stream, tags};
use crate::stats::CompensatedSum;

/// Samples per derived stream.
pub const BLOCK: u64 = 4096;
pub const DEFAULT_SAMPLE_CEILING: u64 = 10_000_000;
/// Environment variable overriding the sample ceiling.
pub const CEILING_ENV: &str = "SBMSM_SAMPLE_CEILING";
/// Two exact marginals closer than this count as tied (lowest item wins).
pub const EXACT_TIE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OracleMode {
    Exact,
    MonteCarlo,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleConfig {
    pub mode: OracleMode,
    pub delta: f64,
    pub xi: f64,
    pub q1_override: Option<u64>,
    pub q2_override: Option<u64>,
    pub sample_ceiling: u64,
}

/// Sample ceiling from the environment, falling back to the default.
pub fn default_ceiling() -> u64 {
    std::env::var(CEILING_ENV)
        .ok()
        .and_then(|s| s.trim().parse::<f64>().ok())
        .filter(|x| *x >= 1.0)
        .map(|x| x as u64)
        .unwrap_or(DEFAULT_SAMPLE_CEILING)
}

impl OracleConfig {
    pub fn exact() -> Self {
        OracleConfig {
            mode: OracleMode::Exact,
            delta: 0.0,
            xi: 0.0,
            q1_override: None,
            q2_override: None,
            sample_ceiling: default_ceiling(),
        }
    }

    pub fn monte_carlo(delta: f64, xi: f64) -> Result<Self> {
        check_accuracy(delta, xi)?;
        Ok(OracleConfig {
            mode: OracleMode::MonteCarlo,
            delta,
            xi,
            q1_override: None,
            q2_override: None,
            sample_ceiling: default_ceiling(),
        })
    }

    /// Exact mode needs exact conditioning, which influence instances lack.
    pub fn check_instance(&self, inst: &Instance) -> Result<()> {
        if self.mode == OracleMode::Exact && !inst.supports_exact() {
            return Err(Error::Unsupported("exact oracles on influence instances".into()));
        }
        Ok(())
    }

    fn clamp(&self, q: u64, what: &str) -> u64 {
        if q > self.sample_ceiling {
            log::warn!("{what}: {q} samples requested, clamped to the ceiling of {}", self.sample_ceiling);
            self.sample_ceiling
        } else {
            q
        }
    }

    /// Samples per oracle1 call.
    pub fn q1(&self, n: usize, capital_lambda: f64) -> Result<u64> {
        let q = match self.q1_override {
            Some(q) => q.max(1),
            None => q_oracle1(self.delta, self.xi, n, capital_lambda)?,
        };
        Ok(self.clamp(q, "oracle1"))
    }

    /// Greedy rollouts per oracle2 batch.
    pub fn q2(&self, n: usize, horizon: usize, capital_lambda: f64) -> Result<u64> {
        let q = match self.q2_override {
            Some(q) => q.max(1),
            None => q_oracle2(self.delta, self.xi, n, horizon, capital_lambda)?,
        };
        Ok(self.clamp(q, "oracle2"))
    }
}

fn check_accuracy(delta: f64, xi: f64) -> Result<()> {
    if !(delta > 0.0 && delta.is_finite()) || !(xi > 0.0 && xi.is_finite()) {
        return Err(Error::arg(format!("delta and xi must be positive (got {delta}, {xi})")));
    }
    Ok(())
}

fn ceil_count(x: f64) -> u64 {
    if x.is_nan() || x <= 1.0 {
        1
    } else if x >= u64::MAX as f64 {
        u64::MAX
    } else {
        x.ceil() as u64
    }
}

/// `ceil(2 Λ²/δ² · ln(2n/ξ))`, at least 1.
pub fn q_oracle1(delta: f64, xi: f64, n: usize, capital_lambda: f64) -> Result<u64> {
    check_accuracy(delta, xi)?;
    let l = capital_lambda / delta;
    Ok(ceil_count(2.0 * l * l * (2.0 * n as f64 / xi).ln()))
}

/// `ceil(Λ²/(2δ²) · ln(2Tn/ξ))`, at least 1.
pub fn q_oracle2(delta: f64, xi: f64, n: usize, horizon: usize, capital_lambda: f64) -> Result<u64> {
    check_accuracy(delta, xi)?;
    let l = capital_lambda / delta;
    Ok(ceil_count(0.5 * l * l * (2.0 * horizon as f64 * n as f64 / xi).ln()))
}

/// Draws of `f_t(S ∪ {v}, η) - f_t(S, η)` given the current observation.
enum IncrementSampler<'a> {
    Constant(f64),
    /// Conditional state distribution (cumulative) and increment per state.
    Tabular {
        cumulative: Vec<f64>,
        increments: Vec<f64>,
    },
    /// Item active with probability `p`, then contributes `gain`.
    Bernoulli {
        p: f64,
        gain: f64,
    },
    Influence {
        inst: &'a Instance,
        view: RoundView<'a>,
        t: usize,
        v: Item,
    },
}

impl<'a> IncrementSampler<'a> {
    fn new(inst: &'a Instance, t: usize, view: RoundView<'a>, v: Item) -> Result<Self> {
        match (inst.model(), view) {
            (Model::Tabular(rounds), RoundView::States(obs)) => {
                let r = &rounds[t];
                let dist = r.conditional(obs).ok_or(Error::ZeroProbability { round: t + 1 })?;
                if obs.contains(v) {
                    return Ok(IncrementSampler::Constant(0.0));
                }
                let mask = obs.mask();
                let mut acc = 0.0;
                let mut cumulative = Vec::with_capacity(dist.len());
                let mut increments = Vec::with_capacity(dist.len());
                for (s, p) in dist {
                    acc += p;
                    cumulative.push(acc);
                    increments.push(r.value(mask | 1 << v, s) - r.value(mask, s));
                }
                if increments.iter().all(|&x| x == increments[0]) {
                    return Ok(IncrementSampler::Constant(increments[0]));
                }
                Ok(IncrementSampler::Tabular { cumulative, increments })
            }
            (Model::Probing(rounds), RoundView::States(obs)) => {
                if obs.contains(v) {
                    return Ok(IncrementSampler::Constant(0.0));
                }
                let r = &rounds[t];
                let active: Vec<Item> = obs.iter().filter(|e| e.1 == 1).map(|e| e.0).collect();
                let gain = r.g.gain(&active, v);
                Ok(match r.p[v] {
                    0.0 => IncrementSampler::Constant(0.0),
                    1.0 => IncrementSampler::Constant(gain),
                    p => IncrementSampler::Bernoulli { p, gain },
                })
            }
            (Model::Influence(_), RoundView::Influence { active, .. }) => {
                if active[v] {
                    return Ok(IncrementSampler::Constant(0.0));
                }
                Ok(IncrementSampler::Influence { inst, view, t, v })
            }
            _ => Err(Error::arg("round view does not match the instance model")),
        }
    }

    fn sum_block<R: Rng + ?Sized>(&self, count: u64, rng: &mut R) -> CompensatedSum {
        let mut sum = CompensatedSum::new();
        match self {
            IncrementSampler::Constant(x) => {
                for _ in 0..count {
                    sum.add(*x);
                }
            }
            IncrementSampler::Tabular { cumulative, increments } => {
                let total = *cumulative.last().expect("non-empty");
                for _ in 0..count {
                    let u = rng.random::<f64>() * total;
                    let i = cumulative.partition_point(|&c| c <= u).min(increments.len() - 1);
                    sum.add(increments[i]);
                }
            }
            IncrementSampler::Bernoulli { p, gain } => {
                for _ in 0..count {
                    sum.add(if rng.random_bool(*p) { *gain } else { 0.0 });
                }
            }
            IncrementSampler::Influence { inst, view, t, v } => {
                let (Model::Influence(g), RoundView::Influence { revelation, active }) = (inst.model(), view) else {
                    unreachable!("checked at construction")
                };
                debug_assert_eq!(revelation.round, *t);
                let mut scratch = Vec::with_capacity(active.len());
                for _ in 0..count {
                    sum.add(hypothetical_spread(g, revelation, active, *v, &mut scratch, rng));
                }
            }
        }
        sum
    }
}

/// Monte-Carlo `oracle1` with an explicit base seed. Block `k` of item `v`
/// draws from `stream(seed, [ORACLE1, v, k])`.
pub fn oracle1_seeded(q: u64, inst: &Instance, t: usize, view: RoundView<'_>, v: Item, seed: u64) -> Result<f64> {
    if q == 0 {
        return Err(Error::arg("oracle1 needs at least one sample"));
    }
    if v >= inst.n() {
        return Err(Error::arg(format!("item {v} out of range")));
    }
    let sampler = IncrementSampler::new(inst, t, view, v)?;
    if let IncrementSampler::Constant(x) = sampler {
        return Ok(x);
    }
    let blocks = q.div_ceil(BLOCK) as usize;
    let sums = par::map_indexed(blocks, |k| {
        let count = if k + 1 == blocks { q - k as u64 * BLOCK } else { BLOCK };
        let mut rng = stream(seed, &[tags::ORACLE1, v as u64, k as u64]);
        sampler.sum_block(count, &mut rng)
    });
    let mut total = CompensatedSum::new();
    for s in &sums {
        total.merge(s);
    }
    Ok(total.value() / q as f64)
}

/// Empirical mean of `q` conditional increment samples of item `v`.
pub fn oracle1<R: Rng + ?Sized>(
    q: u64,
    inst: &Instance,
    t: usize,
    view: RoundView<'_>,
    v: Item,
    rng: &mut R,
) -> Result<f64> {
    oracle1_seeded(q, inst, t, view, v, fork(rng))
}

/// Estimates for every eligible item of a live round under `cfg`; `None` for
/// ineligible items. Exact mode returns exact marginals.
pub fn estimate_items(cfg: &OracleConfig, live: &LiveRound<'_>, seed: u64) -> Result<Vec<Option<f64>>> {
    let inst = live.instance();
    let t = live.round();
    let n = inst.n();
    match cfg.mode {
        OracleMode::Exact => {
            let obs =
                live.observation().ok_or_else(|| Error::Unsupported("exact oracles on influence instances".into()))?;
            (0..n).map(|v| if live.eligible(v) { inst.exact_marginal(t, v, obs).map(Some) } else { Ok(None) }).collect()
        }
        OracleMode::MonteCarlo => {
            let q = cfg.q1(n, inst.header().capital_lambda)?;
            let view = live.view();
            par::map_indexed(n, |v| {
                if live.eligible(v) {
                    oracle1_seeded(q, inst, t, view, v, seed).map(Some)
                } else {
                    Ok(None)
                }
            })
            .into_iter()
            .collect()
        }
    }
}

/// Greedy argmax over estimates: lowest item among the maxima. In exact mode
/// values within [`EXACT_TIE_TOLERANCE`] are tied.
pub fn argmax_item(estimates: &[Option<f64>], mode: OracleMode) -> Option<(Item, f64)> {
    let tol = match mode {
        OracleMode::Exact => EXACT_TIE_TOLERANCE,
        OracleMode::MonteCarlo => 0.0,
    };
    let mut best: Option<(Item, f64)> = None;
    for (v, e) in estimates.iter().enumerate() {
        if let Some(x) = *e {
            if best.is_none_or(|(_, b)| x > b + tol) {
                best = Some((v, x));
            }
        }
    }
    best
}

/// Item choice inside oracle2 rollouts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "type")]
pub enum RolloutPolicy {
    /// Greedy on exact marginals (tabular and probing instances).
    ExactGreedy,
    /// Greedy on oracle1 estimates with `q1` samples each.
    SampledGreedy { q1: u64 },
}

impl RolloutPolicy {
    fn config(self) -> OracleConfig {
        match self {
            RolloutPolicy::ExactGreedy => OracleConfig::exact(),
            RolloutPolicy::SampledGreedy { q1 } => OracleConfig {
                mode: OracleMode::MonteCarlo,
                delta: 0.0,
                xi: 0.0,
                q1_override: Some(q1),
                q2_override: None,
                sample_ceiling: u64::MAX,
            },
        }
    }
}

/// Rollouts per derived stream in oracle2.
const ROLLOUT_BLOCK: u64 = 64;

/// `Δ̃_{t,i}` for `i = 1..=n` from `q` greedy rollouts of round `t`. Steps at
/// which no item is selectable contribute 0.
pub fn oracle2_seeded(q: u64, inst: &Instance, t: usize, policy: RolloutPolicy, seed: u64) -> Result<Vec<f64>> {
    if q == 0 {
        return Err(Error::arg("oracle2 needs at least one rollout"));
    }
    if t >= inst.horizon() {
        return Err(Error::arg(format!("round {} outside 1..={}", t + 1, inst.horizon())));
    }
    let cfg = policy.config();
    cfg.check_instance(inst)?;
    let n = inst.n();
    let blocks = q.div_ceil(ROLLOUT_BLOCK) as usize;
    let partial = par::map_indexed(blocks, |k| -> Result<Vec<CompensatedSum>> {
        let count = if k + 1 == blocks { q - k as u64 * ROLLOUT_BLOCK } else { ROLLOUT_BLOCK };
        let mut rng = stream(seed, &[tags::ORACLE2, t as u64, k as u64]);
        let mut sums = vec![CompensatedSum::new(); n];
        for _ in 0..count {
            let mut live = LiveRound::new(inst, t)?;
            let mut before = 0.0;
            for sum in sums.iter_mut() {
                let estimates = estimate_items(&cfg, &live, fork(&mut rng))?;
                let Some((v, _)) = argmax_item(&estimates, cfg.mode) else {
                    break;
                };
                live.select(v, &mut rng)?;
                let after = live.value();
                sum.add(after - before);
                before = after;
            }
        }
        Ok(sums)
    });
    let mut totals = vec![CompensatedSum::new(); n];
    for block in partial {
        for (tot, s) in totals.iter_mut().zip(block?) {
            tot.merge(&s);
        }
    }
    Ok(totals.iter().map(|s| s.value() / q as f64).collect())
}

pub fn oracle2<R: Rng + ?Sized>(
    q: u64,
    inst: &Instance,
    t: usize,
    policy: RolloutPolicy,
    rng: &mut R,
) -> Result<Vec<f64>> {
    oracle2_seeded(q, inst, t, policy, fork(rng))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{InstanceHeader, ModelKind, PartialState};
    use crate::probing::{ProbingRound, SubmodularSpec};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn probing(p: Vec<f64>, w: Vec<f64>) -> Instance {
        let n = p.len();
        let h = InstanceHeader::new(1, 0, n, 0.01, 10.0, ModelKind::Probing);
        Instance::new(h, Model::Probing(vec![ProbingRound { p, g: SubmodularSpec::Additive { w } }])).unwrap()
    }

    #[test]
    fn sample_counts() {
        assert_eq!(q_oracle1(0.1, 0.1, 10, 1.0).unwrap(), 1060);
        assert_eq!(q_oracle2(0.1, 0.1, 10, 5, 1.0).unwrap(), 346);
        assert_eq!(q_oracle2(1e6, 0.1, 10, 5, 1.0).unwrap(), 1);
        assert_eq!(q_oracle1(1.0, 19.99, 10, 1.0).unwrap(), 1);
        assert!(q_oracle1(0.0, 0.1, 10, 1.0).is_err());
        assert!(q_oracle2(0.1, -1.0, 10, 2, 1.0).is_err());
    }

    #[test]
    fn doubling_capital_lambda_quadruples_raw_count() {
        let raw = |l: f64| 2.0 * (l / 0.05f64).powi(2) * (2.0 * 7.0 / 0.2f64).ln();
        assert!((raw(2.0) / raw(1.0) - 4.0).abs() < 1e-12);
        let a = q_oracle1(0.05, 0.2, 7, 1.0).unwrap() as f64;
        let b = q_oracle1(0.05, 0.2, 7, 2.0).unwrap() as f64;
        assert!((b / a - 4.0).abs() < 4.0 / a);
    }

    #[test]
    fn ceiling_clamps() {
        let cfg = OracleConfig { sample_ceiling: 50, ..OracleConfig::monte_carlo(0.001, 0.001).unwrap() };
        assert_eq!(cfg.q1(10, 1.0).unwrap(), 50);
    }

    #[test]
    fn bernoulli_increment_mean() {
        let inst = probing(vec![0.5], vec![2.0]);
        let obs = PartialState::new();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let est = oracle1(100_000, &inst, 0, RoundView::States(&obs), 0, &mut rng).unwrap();
        assert!((est - 1.0).abs() < 0.02, "{est}");
    }

    #[test]
    fn deterministic_increment_is_exact() {
        let inst = probing(vec![1.0, 1.0], vec![3.0, 1.0]);
        let obs = PartialState::from_pairs([(0, 1)]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(oracle1(7, &inst, 0, RoundView::States(&obs), 1, &mut rng).unwrap(), 1.0);
        assert_eq!(oracle1(7, &inst, 0, RoundView::States(&obs), 0, &mut rng).unwrap(), 0.0);
    }

    #[test]
    fn greedy_step_increments() {
        let inst = probing(vec![1.0, 1.0], vec![3.0, 1.0]);
        for policy in [RolloutPolicy::ExactGreedy, RolloutPolicy::SampledGreedy { q1: 10 }] {
            let est = oracle2_seeded(5, &inst, 0, policy, 9).unwrap();
            assert_eq!(est, vec![3.0, 1.0]);
        }
    }

    #[cfg(feature = "parallel")]
    #[test]
    fn estimates_do_not_depend_on_worker_count() {
        let inst = probing(vec![0.3, 0.6, 0.9], vec![1.0, 2.0, 0.5]);
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| oracle2_seeded(300, &inst, 0, RolloutPolicy::SampledGreedy { q1: 5000 }, 17).unwrap())
        };
        assert_eq!(run(1), run(4));
    }
}
