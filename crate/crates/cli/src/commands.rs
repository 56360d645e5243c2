use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::Serialize;
use serde_json::{json, Value};

use sbmsm::env::Model;
use sbmsm::exact::{solve_dp, SolveGuards};
use sbmsm::greedy::{budget_gr, epsilon_to_params, greedy_expected_value, run_partially_adaptive, BudgetVector};
use sbmsm::harness::checks::{
    check_adaptive_submodularity, check_greedy_ratio, check_increment_allocation, check_oracle_equivalence,
    check_partial_sandwich,
};
use sbmsm::harness::gap::{gap_csv, gap_limit};
use sbmsm::harness::generate::{random_tabular, Limits};
use sbmsm::harness::{
    concentrated_round_instance, decoy_round_instance, estimate_policy_value, gap_instance, gap_report,
    policy_round_usage, uniform_budget, CiMethod,
};
use sbmsm::influence::InfluenceGraph;
use sbmsm::io::{instance_to_string, load_instance};
use sbmsm::oracle::{OracleConfig, OracleMode};
use sbmsm::rng::{fork, stream, tags};
use sbmsm::{Error, Instance, InstanceHeader, ModelKind};

use crate::{Command, GenKind, GuardArgs, OracleArgs, Property, RunArgs};

pub const OK: u8 = 0;
pub const FAILED: u8 = 1;
pub const USAGE: u8 = 2;
pub const GUARD: u8 = 3;

/// Exit code for an error, from the first library error in its chain.
pub fn exit_code(e: &anyhow::Error) -> u8 {
    match e.chain().find_map(|c| c.downcast_ref::<Error>()) {
        Some(Error::SizeGuard(_)) => GUARD,
        Some(Error::Argument(_) | Error::Unsupported(_) | Error::Io(_)) => USAGE,
        Some(_) => FAILED,
        None => USAGE,
    }
}

pub fn run(command: Command) -> Result<u8> {
    match command {
        Command::Validate { path, out } => validate(&path, out.output.as_deref()),
        Command::Exact { path, guards, run, policy_out } => {
            setup(&run)?;
            exact(&path, &guards, &run, policy_out.as_deref())
        }
        Command::Greedy { path, oracle, run } => {
            setup(&run)?;
            greedy(&path, &oracle, &run)
        }
        Command::Eval { path, oracle, guards, run } => {
            setup(&run)?;
            eval(&path, &oracle, &guards, &run)
        }
        Command::Gap { horizons, csv, ci, run } => {
            setup(&run)?;
            gap(&horizons, csv, ci.into(), &run)
        }
        Command::Check { path, property, guards, run } => {
            setup(&run)?;
            check(&path, property, &guards, &run)
        }
        Command::Gen { kind, run } => {
            setup(&run)?;
            generate(kind, &run)
        }
    }
}

fn setup(run: &RunArgs) -> Result<()> {
    if let Some(k) = run.workers {
        if k == 0 {
            return Err(Error::Argument("--workers must be at least 1".into()).into());
        }
        rayon::ThreadPoolBuilder::new().num_threads(k).build_global().context("starting the worker pool")?;
    }
    Ok(())
}

fn emit(text: &str, output: Option<&Path>) -> Result<()> {
    match output {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn emit_json(value: &Value, output: Option<&Path>) -> Result<()> {
    emit(&(serde_json::to_string_pretty(value)? + "\n"), output)
}

fn load(path: &Path) -> Result<Instance> {
    load_instance(path).with_context(|| format!("loading {}", path.display()))
}

fn run_params(command: &str, path: Option<&Path>, run: &RunArgs) -> Value {
    json!({
        "command": command,
        "instance": path.map(|p| p.display().to_string()),
        "seed": run.seed,
        "workers": rayon::current_num_threads(),
        "rollouts": run.rollouts,
    })
}

fn header_json(inst: &Instance) -> Value {
    let h = inst.header();
    json!({
        "kind": h.kind,
        "T": h.horizon,
        "B": h.budget,
        "n": h.n,
        "lambda": h.lambda,
        "capital_lambda": h.capital_lambda,
    })
}

fn solve_guards(g: &GuardArgs) -> SolveGuards {
    SolveGuards { max_items: g.max_items, max_states: g.max_states, max_budget: g.max_budget }
}

fn validate(path: &Path, output: Option<&Path>) -> Result<u8> {
    let params = json!({ "command": "validate", "instance": path.display().to_string() });
    match load_instance(path) {
        Ok(inst) => {
            emit_json(&json!({ "params": params, "valid": true, "instance": header_json(&inst) }), output)?;
            Ok(OK)
        }
        Err(e @ (Error::SizeGuard(_) | Error::Io(_))) => {
            Err(anyhow::Error::from(e).context(format!("loading {}", path.display())))
        }
        Err(e) => {
            emit_json(&json!({ "params": params, "valid": false, "error": e.to_string() }), output)?;
            Ok(FAILED)
        }
    }
}

fn exact(path: &Path, guards: &GuardArgs, run: &RunArgs, policy_out: Option<&Path>) -> Result<u8> {
    let inst = load(path)?;
    let guards = solve_guards(guards);
    let policy = solve_dp(&inst, &guards)?;
    let usage = policy_round_usage(&policy, &inst)?;
    let mut params = run_params("exact", Some(path), run);
    params["guards"] = serde_json::to_value(guards)?;
    let policy_json = policy.to_json();
    if let Some(p) = policy_out {
        emit_json(&policy_json, Some(p))?;
    }
    let report = json!({
        "params": params,
        "instance": header_json(&inst),
        "optimum": policy.optimum(),
        "R": policy.values.rows(),
        "round_usage": usage,
        "policy_nodes": policy.nodes(),
        "policy": policy_json,
    });
    emit_json(&report, run.out.output.as_deref())?;
    Ok(OK)
}

/// Oracle configuration and the echo of every parameter that produced it.
fn oracle_config(inst: &Instance, args: &OracleArgs) -> Result<(OracleConfig, Value)> {
    let h = inst.header();
    let (mut cfg, epsilon) = if args.exact {
        (OracleConfig::exact(), None)
    } else if let (Some(delta), Some(xi)) = (args.delta, args.xi) {
        (OracleConfig::monte_carlo(delta, xi)?, None)
    } else {
        let (delta, xi) = epsilon_to_params(args.epsilon, args.c, h.lambda, h.capital_lambda, h.budget)?;
        (OracleConfig::monte_carlo(delta, xi)?, Some(args.epsilon))
    };
    cfg.q1_override = args.q1;
    cfg.q2_override = args.q2;
    cfg.check_instance(inst)?;
    let (q1, q2) = match cfg.mode {
        OracleMode::Exact => (None, None),
        OracleMode::MonteCarlo => {
            (Some(cfg.q1(h.n, h.capital_lambda)?), Some(cfg.q2(h.n, h.horizon, h.capital_lambda)?))
        }
    };
    let echo = json!({
        "mode": cfg.mode,
        "epsilon": epsilon,
        "c": epsilon.map(|_| args.c),
        "delta": (cfg.mode == OracleMode::MonteCarlo).then_some(cfg.delta),
        "xi": (cfg.mode == OracleMode::MonteCarlo).then_some(cfg.xi),
        "q1": q1,
        "q2": q2,
        "q1_override": args.q1,
        "q2_override": args.q2,
        "sample_ceiling": cfg.sample_ceiling,
        "ci": CiMethod::from(args.ci),
    });
    Ok((cfg, echo))
}

#[derive(Serialize)]
struct PolicyEstimate {
    budget: Vec<usize>,
    estimate: sbmsm::harness::ValueEstimate,
    /// Exact expected value of exact-oracle greedy under the same budget.
    exact_value: Option<f64>,
}

fn estimate_allocation(
    inst: &Instance,
    budget: &BudgetVector,
    cfg: &OracleConfig,
    run: &RunArgs,
    ci: CiMethod,
    seed: u64,
) -> Result<PolicyEstimate> {
    let estimate = estimate_policy_value(
        |rng| Ok(run_partially_adaptive(inst, budget, cfg, rng)?.total()),
        inst,
        run.rollouts,
        seed,
        ci,
    )?;
    let exact_value = if inst.supports_exact() { Some(greedy_expected_value(inst, budget)?) } else { None };
    Ok(PolicyEstimate { budget: budget.0.clone(), estimate, exact_value })
}

fn greedy(path: &Path, args: &OracleArgs, run: &RunArgs) -> Result<u8> {
    let inst = load(path)?;
    let (cfg, echo) = oracle_config(&inst, args)?;
    let mut rng = stream(run.seed, &[]);
    let budget = budget_gr(&inst, &cfg, &mut rng)?;
    let trace = run_partially_adaptive(&inst, &budget, &cfg, &mut rng)?;
    let value = estimate_allocation(&inst, &budget, &cfg, run, args.ci.into(), fork(&mut rng))?;
    let mut params = run_params("greedy", Some(path), run);
    params["oracle"] = echo;
    let report = json!({
        "params": params,
        "instance": header_json(&inst),
        "budget": budget.0,
        "trace": {
            "records": trace.records,
            "selected": trace.selected,
            "round_values": trace.round_values,
            "total": trace.total(),
        },
        "estimate": value.estimate,
        "exact_value": value.exact_value,
    });
    emit_json(&report, run.out.output.as_deref())?;
    Ok(OK)
}

fn eval(path: &Path, args: &OracleArgs, guards: &GuardArgs, run: &RunArgs) -> Result<u8> {
    let inst = load(path)?;
    let (cfg, echo) = oracle_config(&inst, args)?;
    let ci = args.ci.into();
    let mut rng = stream(run.seed, &[]);
    let greedy_budget = budget_gr(&inst, &cfg, &mut rng)?;
    let greedy = estimate_allocation(&inst, &greedy_budget, &cfg, run, ci, fork(&mut rng))?;
    let uniform = estimate_allocation(&inst, &uniform_budget(&inst)?, &cfg, run, ci, fork(&mut rng))?;
    let (optimum, skipped) = match solve_dp(&inst, &solve_guards(guards)) {
        Ok(p) => (Some(p.optimum()), None),
        Err(e @ (Error::SizeGuard(_) | Error::Unsupported(_))) => (None, Some(e.to_string())),
        Err(e) => return Err(e.into()),
    };
    let ratio = |p: &PolicyEstimate| optimum.filter(|o| *o > 0.0).map(|o| p.exact_value.unwrap_or(p.estimate.mean) / o);
    let mut params = run_params("eval", Some(path), run);
    params["oracle"] = echo;
    params["guards"] = serde_json::to_value(solve_guards(guards))?;
    let report = json!({
        "params": params,
        "instance": header_json(&inst),
        "optimum": optimum,
        "optimum_skipped": skipped,
        "greedy": greedy,
        "greedy_ratio": ratio(&greedy),
        "uniform": uniform,
        "uniform_ratio": ratio(&uniform),
    });
    emit_json(&report, run.out.output.as_deref())?;
    Ok(OK)
}

fn gap(horizons: &[usize], csv: bool, ci: CiMethod, run: &RunArgs) -> Result<u8> {
    let reports = horizons
        .iter()
        .map(|&t| gap_report(t, run.rollouts, fork(&mut stream(run.seed, &[tags::GAP, t as u64])), ci))
        .collect::<sbmsm::Result<Vec<_>>>()?;
    if csv {
        let head = format!(
            "# seed={} rollouts={} workers={} ci={} limit={}\n",
            run.seed,
            run.rollouts,
            rayon::current_num_threads(),
            serde_json::to_value(ci)?.as_str().unwrap_or_default(),
            gap_limit()
        );
        emit(&(head + &gap_csv(&reports)), run.out.output.as_deref())?;
    } else {
        let mut params = run_params("gap", None, run);
        params["T"] = json!(horizons);
        params["ci"] = serde_json::to_value(ci)?;
        emit_json(&json!({ "params": params, "limit": gap_limit(), "reports": reports }), run.out.output.as_deref())?;
    }
    Ok(OK)
}

fn check(path: &Path, property: Property, guards: &GuardArgs, run: &RunArgs) -> Result<u8> {
    let inst = load(path)?;
    let guards = solve_guards(guards);
    let (name, pass, details) = match property {
        Property::Submodularity => {
            let r = check_adaptive_submodularity(&inst)?;
            ("submodularity", r.pass, serde_json::to_value(r)?)
        }
        Property::OracleEquivalence => {
            let r = check_oracle_equivalence(&inst)?;
            ("oracle-equivalence", r.pass, serde_json::to_value(r)?)
        }
        Property::IncrementAllocation => {
            let r = check_increment_allocation(&inst)?;
            ("lemma4", r.pass, serde_json::to_value(r)?)
        }
        Property::GreedyRatio => {
            let r = check_greedy_ratio(&inst, &guards)?;
            ("thm1-ratio", r.pass, serde_json::to_value(r)?)
        }
        Property::PartialSandwich => {
            let r = check_partial_sandwich(&inst, &guards)?;
            ("thm2-sandwich", r.pass, serde_json::to_value(r)?)
        }
    };
    let mut params = run_params("check", Some(path), run);
    params["property"] = json!(name);
    params["guards"] = serde_json::to_value(guards)?;
    emit_json(&json!({ "params": params, "pass": pass, "details": details }), run.out.output.as_deref())?;
    Ok(if pass { OK } else { FAILED })
}

fn generate(kind: GenKind, run: &RunArgs) -> Result<u8> {
    let inst = match kind {
        GenKind::Concentrated { horizon, t_star } => {
            let t_star = t_star.unwrap_or(horizon);
            if t_star == 0 {
                bail!(Error::Argument("--t-star is 1-based".into()));
            }
            concentrated_round_instance(horizon, t_star - 1)?
        }
        GenKind::Decoy { n } => decoy_round_instance(n)?,
        GenKind::Gap { horizon } => gap_instance(horizon)?,
        GenKind::Influence { edge_list, horizon, budget, weight } => {
            influence_from_edge_list(&edge_list, horizon, budget, weight)?
        }
        GenKind::Random { family, max_rounds, max_items, max_states, max_budget } => {
            let limits = Limits { max_rounds, max_items, max_states, max_budget };
            if [max_rounds, max_items, max_states].contains(&0) {
                bail!(Error::Argument("random instance limits must be positive".into()));
            }
            random_tabular(family.into(), &limits, &mut stream(run.seed, &[tags::GENERATOR]))?
        }
    };
    emit(&(instance_to_string(&inst)? + "\n"), run.out.output.as_deref())?;
    Ok(OK)
}

fn influence_from_edge_list(path: &PathBuf, horizon: usize, budget: usize, weight: f64) -> Result<Instance> {
    let text = fs::read_to_string(path).map_err(Error::from).with_context(|| format!("reading {}", path.display()))?;
    let mut edges = Vec::new();
    let mut probs = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        let parsed = match fields.as_slice() {
            [u, v, p] => u.parse::<usize>().ok().zip(v.parse::<usize>().ok()).zip(p.parse::<f64>().ok()),
            _ => None,
        };
        let Some(((u, v), p)) = parsed else {
            bail!(Error::Invalid(format!("{}:{}: expected `u v p`", path.display(), i + 1)));
        };
        edges.push((u, v));
        probs.push(p);
    }
    let nodes = edges.iter().map(|&(u, v)| u.max(v) + 1).max().unwrap_or(0);
    if nodes == 0 {
        bail!(Error::Invalid(format!("{} has no edges", path.display())));
    }
    if !(weight > 0.0 && weight.is_finite()) {
        bail!(Error::Argument("--weight must be positive".into()));
    }
    let graph = InfluenceGraph::new(nodes, edges, vec![probs; horizon], vec![vec![weight; nodes]; horizon])?;
    let header = InstanceHeader::new(horizon, budget, nodes, weight, nodes as f64 * weight, ModelKind::Influence);
    Ok(Instance::new(header, Model::Influence(graph))?)
}
