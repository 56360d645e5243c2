//! Acceptance run. Prints one PASS/FAIL line per criterion and exits nonzero
//! if any criterion fails.

use std::process::ExitCode;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use sbmsm::exact::{solve_dp, tree_stats, SolveGuards};
use sbmsm::greedy::{budget_gr, exact_increments, greedy_expected_value, multi_gr};
use sbmsm::harness::checks::{
    check_adaptive_submodularity, check_greedy_ratio, check_increment_allocation, check_oracle_equivalence,
    check_partial_sandwich, greedy_ratio_bound,
};
use sbmsm::harness::generate::{random_instances, random_tabular, Family, Limits};
use sbmsm::harness::{
    concentrated_round_instance, cross_round_restricted_greedy, decoy_round_instance, gap_report,
    round_fractional_budget, uniform_budget, CiMethod,
};
use sbmsm::oracle::{argmax_item, estimate_items, oracle2_seeded, OracleConfig, OracleMode, RolloutPolicy};
use sbmsm::{Instance, LiveRound};

const SEED: u64 = 20240611;
const INSTANCES: usize = 120;
const TOL: f64 = 1e-9;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

type Check = fn() -> Result<Outcome, String>;

fn instances() -> Result<Vec<(Family, Instance)>, String> {
    random_instances(SEED, INSTANCES, &Limits::default()).map_err(|e| e.to_string())
}

fn oracle_equivalence() -> Result<Outcome, String> {
    let mut worst = 0.0f64;
    let mut failures = Vec::new();
    let all = instances()?;
    for (i, (_, inst)) in all.iter().enumerate() {
        let r = check_oracle_equivalence(inst).map_err(|e| format!("instance {i}: {e}"))?;
        worst = worst.max(r.difference);
        if !r.pass {
            failures.push(i);
        }
    }
    Ok(outcome(
        failures.is_empty(),
        format!("{} instances, max |R(1,B) - brute force| = {worst:.3e}, failing {failures:?}", all.len()),
    ))
}

fn greedy_ratio() -> Result<Outcome, String> {
    let guards = SolveGuards::default();
    let (mut checked, mut worst, mut failures) = (0, f64::INFINITY, Vec::new());
    for (i, (_, inst)) in instances()?.iter().enumerate() {
        if !check_adaptive_submodularity(inst).map_err(|e| e.to_string())?.pass {
            continue;
        }
        let r = check_greedy_ratio(inst, &guards).map_err(|e| format!("instance {i}: {e}"))?;
        checked += 1;
        worst = worst.min(r.ratio);
        if !r.pass {
            failures.push(i);
        }
    }
    Ok(outcome(
        failures.is_empty() && checked > 0,
        format!(
            "{checked} adaptive submodular instances, min ratio {worst:.4} vs bound {:.4}, failing {failures:?}",
            greedy_ratio_bound()
        ),
    ))
}

fn concentrated_round() -> Result<Outcome, String> {
    let mut pass = true;
    let mut parts = Vec::new();
    for horizon in [2usize, 5, 10] {
        let inst = concentrated_round_instance(horizon, horizon - 1).map_err(|e| e.to_string())?;
        let guards = SolveGuards { max_items: 10, max_budget: 10, ..SolveGuards::default() };
        let opt = solve_dp(&inst, &guards).map_err(|e| e.to_string())?.optimum();
        let budget = uniform_budget(&inst).map_err(|e| e.to_string())?;
        let uniform = greedy_expected_value(&inst, &budget).map_err(|e| e.to_string())?;
        let ratio = uniform / opt;
        pass &= opt == horizon as f64 && uniform == 1.0 && (ratio - 1.0 / horizon as f64).abs() <= TOL;
        parts.push(format!("T={horizon}: opt {opt}, uniform {uniform}, ratio {ratio:.4}"));
    }
    Ok(outcome(pass, parts.join("; ")))
}

fn restricted_greedy() -> Result<Outcome, String> {
    let mut pass = true;
    let mut parts = Vec::new();
    for n in [4usize, 10, 50] {
        let inst = decoy_round_instance(n).map_err(|e| e.to_string())?;
        let opt = solve_dp(&inst, &SolveGuards::default()).map_err(|e| e.to_string())?.optimum();
        let mut rng = ChaCha8Rng::seed_from_u64(SEED);
        let restricted = cross_round_restricted_greedy(&inst, &mut rng).map_err(|e| e.to_string())?;
        let expected = n as f64 / 2.0 + 1.5;
        pass &= opt == expected && restricted == 2.0;
        parts.push(format!("n={n}: opt {opt} (expected {expected}), restricted greedy {restricted}"));
    }
    Ok(outcome(pass, parts.join("; ")))
}

fn gap_trend() -> Result<Outcome, String> {
    let started = Instant::now();
    let mut reports = Vec::new();
    for (i, horizon) in [4usize, 16, 64, 100].into_iter().enumerate() {
        reports.push(gap_report(horizon, 100_000, SEED + i as u64, CiMethod::Normal).map_err(|e| e.to_string())?);
    }
    let small = &reports[0];
    let large = &reports[3];
    let closed_ok = (small.sigma_partial_closed_form - 3.0).abs() <= TOL
        && (large.sigma_partial_closed_form - 65.132).abs() <= 0.001;
    let ratio_ok = (1.40..=2.0).contains(&large.ratio);
    let monotone = reports.windows(2).all(|w| {
        let slack = 2.0 * (w[0].ratio_std_error.powi(2) + w[1].ratio_std_error.powi(2)).sqrt();
        w[1].ratio >= w[0].ratio - slack
    });
    let limit_ok = reports.iter().all(|r| (r.limit - 1.5820).abs() < 1e-4);
    let elapsed = started.elapsed().as_secs_f64();
    let ratios: Vec<String> = reports.iter().map(|r| format!("T={} {:.4}", r.horizon, r.ratio)).collect();
    Ok(outcome(
        closed_ok && ratio_ok && monotone && limit_ok && elapsed < 120.0,
        format!(
            "closed forms {:.4} / {:.4}, ratios [{}], limit {:.4}, {elapsed:.1}s",
            small.sigma_partial_closed_form,
            large.sigma_partial_closed_form,
            ratios.join(", "),
            large.limit
        ),
    ))
}

fn partial_sandwich() -> Result<Outcome, String> {
    let guards = SolveGuards::default();
    let (mut worst, mut failures) = (0.0f64, Vec::new());
    let all = instances()?;
    for (i, (_, inst)) in all.iter().enumerate() {
        let r = check_partial_sandwich(inst, &guards).map_err(|e| format!("instance {i}: {e}"))?;
        if r.ratio.is_finite() {
            worst = worst.max(r.ratio);
        }
        if !r.pass {
            failures.push(i);
        }
    }
    Ok(outcome(
        failures.is_empty(),
        format!("{} instances, max R(1,B) / best partial {worst:.4}, failing {failures:?}", all.len()),
    ))
}

/// Fixed adaptive submodular instance for the concentration trials.
fn concentration_instance() -> Result<Instance, String> {
    let limits = Limits { max_rounds: 2, max_items: 3, max_states: 4, max_budget: 3 };
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    loop {
        let inst = random_tabular(Family::ProductCoverage, &limits, &mut rng).map_err(|e| e.to_string())?;
        if inst.n() == 3 && inst.horizon() == 2 {
            return Ok(inst);
        }
    }
}

fn concentration() -> Result<Outcome, String> {
    const TRIALS: u64 = 200;
    const ALLOWED: usize = 18;
    let (delta, xi) = (0.05, 0.05);
    let inst = concentration_instance()?;
    let cfg = OracleConfig::monte_carlo(delta, xi).map_err(|e| e.to_string())?;
    let h = inst.header();
    let q1 = cfg.q1(h.n, h.capital_lambda).map_err(|e| e.to_string())?;
    let q2 = cfg.q2(h.n, h.horizon, h.capital_lambda).map_err(|e| e.to_string())?;

    let exact_root: Vec<f64> = {
        let live = LiveRound::new(&inst, 0).map_err(|e| e.to_string())?;
        estimate_items(&OracleConfig::exact(), &live, 0)
            .map_err(|e| e.to_string())?
            .into_iter()
            .map(|x| x.expect("every item eligible at the root"))
            .collect()
    };
    let best = exact_root.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let increments = (0..inst.horizon())
        .map(|t| exact_increments(&inst, t))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| e.to_string())?;

    let mut seeds = ChaCha8Rng::seed_from_u64(SEED ^ 0x5eed);
    let (mut argmax_failures, mut increment_failures) = (0usize, 0usize);
    for _ in 0..TRIALS {
        let live = LiveRound::new(&inst, 0).map_err(|e| e.to_string())?;
        let estimates = estimate_items(&cfg, &live, seeds.random()).map_err(|e| e.to_string())?;
        let (v, _) = argmax_item(&estimates, OracleMode::MonteCarlo).ok_or("no item chosen")?;
        if exact_root[v] < best - delta {
            argmax_failures += 1;
        }
        let mut ok = true;
        for (t, exact) in increments.iter().enumerate() {
            let est =
                oracle2_seeded(q2, &inst, t, RolloutPolicy::ExactGreedy, seeds.random()).map_err(|e| e.to_string())?;
            ok &= est.iter().zip(exact).all(|(a, b)| (a - b).abs() <= delta);
        }
        if !ok {
            increment_failures += 1;
        }
    }
    Ok(outcome(
        argmax_failures <= ALLOWED && increment_failures <= ALLOWED,
        format!(
            "q1 = {q1}, q2 = {q2}, {TRIALS} trials: argmax gap > delta in {argmax_failures}, \
             increment error > delta in {increment_failures} (allowed {ALLOWED})"
        ),
    ))
}

fn increment_allocation() -> Result<Outcome, String> {
    let limits = Limits { max_rounds: 3, max_items: 3, max_states: 4, max_budget: 4 };
    let all = random_instances(SEED + 4, INSTANCES, &limits).map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let (mut checked, mut failures) = (0, Vec::new());
    for (i, (_, inst)) in all.iter().enumerate() {
        if !check_adaptive_submodularity(inst).map_err(|e| e.to_string())?.pass {
            continue;
        }
        checked += 1;
        let report = check_increment_allocation(inst).map_err(|e| format!("instance {i}: {e}"))?;
        let chosen = budget_gr(inst, &OracleConfig::exact(), &mut rng).map_err(|e| e.to_string())?;
        let chosen_score: f64 = chosen.0.iter().zip(&report.increments).map(|(&b, d)| d[..b].iter().sum::<f64>()).sum();
        let monotone = report.increase_at.is_none();
        if !(monotone && chosen_score >= report.best_score - TOL) {
            failures.push(i);
        }
    }
    Ok(outcome(
        failures.is_empty() && checked > 0,
        format!("{checked} adaptive submodular instances (B <= 4), failing {failures:?}"),
    ))
}

fn prop3_bounds() -> Result<Outcome, String> {
    let limits = Limits { max_rounds: 1, max_items: 4, max_states: 4, max_budget: 4 };
    let guards = SolveGuards::default();
    let mut rng = ChaCha8Rng::seed_from_u64(SEED + 9);
    let (mut checked, mut failures) = (0, Vec::new());
    for i in 0..60 {
        let family = [Family::ProductCoverage, Family::CorrelatedCoverage, Family::GeneralMonotone][i % 3];
        let inst = random_tabular(family, &limits, &mut rng).map_err(|e| e.to_string())?;
        let n = inst.n();
        let h = inst.tabular_round(0).ok_or("tabular")?.support_size() as u128;
        let sequences: u128 = (0..=n).map(|k| ((n - k + 1)..=n).map(|x| x as u128).product::<u128>()).sum();
        for b in 0..=n {
            let stats = tree_stats(&inst, 0, b, &guards).map_err(|e| e.to_string())?;
            checked += 1;
            if stats.leaves > sequences * h || stats.total() > 2 * stats.leaves {
                failures.push((i, b));
            }
        }
    }
    Ok(outcome(failures.is_empty(), format!("{checked} (instance, b) trees, failing {failures:?}")))
}

fn lemma2_rounding() -> Result<Outcome, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED + 10);
    let mut failures = Vec::new();
    let mut max_iterations = 0;
    for case in 0..100 {
        let horizon = rng.random_range(2..=6);
        let n = rng.random_range(1..=5);
        let opt: Vec<Vec<f64>> = (0..horizon)
            .map(|_| {
                let mut acc = 0.0;
                let mut row = vec![0.0];
                for _ in 0..n {
                    acc += rng.random_range(0.0..1.0);
                    row.push(acc);
                }
                row
            })
            .collect();
        // Integer start, then random mass transfers that keep entries in [0, n].
        let mut d: Vec<f64> = (0..horizon).map(|_| rng.random_range(0..=n) as f64).collect();
        for _ in 0..horizon * 2 {
            let (i, j) = (rng.random_range(0..horizon), rng.random_range(0..horizon));
            if i == j {
                continue;
            }
            let room = d[i].min(n as f64 - d[j]);
            let beta = rng.random_range(0.0..=1.0) * room;
            d[i] -= beta;
            d[j] += beta;
        }
        let total: f64 = d.iter().sum();
        let target = total.round();
        d[0] += target - total;
        if d[0] < 0.0 {
            continue;
        }
        let r = round_fractional_budget(&d, &opt).map_err(|e| format!("case {case}: {e}"))?;
        max_iterations = max_iterations.max(r.iterations);
        let sum_ok = r.budget.iter().sum::<usize>() as f64 == target;
        if r.iterations > horizon || r.objective_after < r.objective_before - TOL || !sum_ok {
            failures.push(case);
        }
    }
    Ok(outcome(failures.is_empty(), format!("100 cases, max iterations {max_iterations}, failing {failures:?}")))
}

fn reproducibility() -> Result<Outcome, String> {
    let run = || -> Result<String, String> {
        let inst = concentration_instance()?;
        let cfg = OracleConfig::monte_carlo(0.2, 0.2).map_err(|e| e.to_string())?;
        let mut rng = ChaCha8Rng::seed_from_u64(SEED);
        let (budget, trace) = multi_gr(&inst, &cfg, &mut rng).map_err(|e| e.to_string())?;
        let policy = solve_dp(&inst, &SolveGuards::default()).map_err(|e| e.to_string())?;
        let gap = gap_report(16, 20_000, SEED, CiMethod::Hoeffding).map_err(|e| e.to_string())?;
        Ok(format!(
            "{}\n{}\n{}\n{}",
            serde_json::to_string(&budget.0).map_err(|e| e.to_string())?,
            trace.to_jsonl(),
            policy.to_json(),
            serde_json::to_string(&gap).map_err(|e| e.to_string())?
        ))
    };
    let first = run()?;
    let second = run()?;
    Ok(outcome(first == second, format!("{} bytes per run, identical: {}", first.len(), first == second)))
}

fn main() -> ExitCode {
    let criteria: [(&str, Check); 11] = [
        ("oracle equivalence", oracle_equivalence),
        ("greedy ratio at epsilon = 0", greedy_ratio),
        ("uniform split on one-round instance", concentrated_round),
        ("cross-round restricted greedy", restricted_greedy),
        ("adaptivity gap trend", gap_trend),
        ("partially adaptive sandwich", partial_sandwich),
        ("oracle concentration", concentration),
        ("increment monotonicity and allocation", increment_allocation),
        ("game tree size bounds", prop3_bounds),
        ("fractional budget rounding", lemma2_rounding),
        ("reproducibility", reproducibility),
    ];
    let mut failed = 0;
    for (k, (name, check)) in criteria.iter().enumerate() {
        let started = Instant::now();
        let result = check().unwrap_or_else(|e| outcome(false, format!("error: {e}")));
        let tag = if result.pass { "PASS" } else { "FAIL" };
        println!("{tag} [{:>2}] {name}: {} ({:.1}s)", k + 1, result.detail, started.elapsed().as_secs_f64());
        if !result.pass {
            failed += 1;
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
