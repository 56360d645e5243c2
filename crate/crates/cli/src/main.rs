//! `sbmsm`: solve, simulate and check multi-round budgeted adaptive
//! submodular instances.
//!
//! Exit codes: 0 success, 1 invalid instance or failed property, 2 usage
//! error, 3 size guard refusal.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use sbmsm::harness::generate::Family;
use sbmsm::harness::CiMethod;

#[derive(Parser)]
#[command(name = "sbmsm", version, about = "Multi-round budgeted adaptive submodular maximization")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check an instance file: schema, probabilities, normalization, monotonicity.
    Validate {
        path: PathBuf,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Optimal fully adaptive policy and its value table.
    Exact {
        path: PathBuf,
        #[command(flatten)]
        guards: GuardArgs,
        #[command(flatten)]
        run: RunArgs,
        /// Also write the policy alone to this file.
        #[arg(long)]
        policy_out: Option<PathBuf>,
    },
    /// Greedy partially adaptive policy: one traced run plus a rollout estimate.
    Greedy {
        path: PathBuf,
        #[command(flatten)]
        oracle: OracleArgs,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Compare the greedy policy, the uniform allocation and the optimum.
    Eval {
        path: PathBuf,
        #[command(flatten)]
        oracle: OracleArgs,
        #[command(flatten)]
        guards: GuardArgs,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Adaptivity gap report on the binomial construction.
    Gap {
        /// Horizons (perfect squares), comma separated or repeated.
        #[arg(long = "T", value_delimiter = ',', default_values_t = [4usize, 16, 64, 100])]
        horizons: Vec<usize>,
        /// Emit CSV rows instead of JSON.
        #[arg(long)]
        csv: bool,
        #[arg(long, value_enum, default_value_t = Ci::Hoeffding)]
        ci: Ci,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Exhaustive property check on a small instance.
    Check {
        path: PathBuf,
        #[arg(long, value_enum)]
        property: Property,
        #[command(flatten)]
        guards: GuardArgs,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Write a constructed instance.
    Gen {
        #[command(subcommand)]
        kind: GenKind,
        #[command(flatten)]
        run: RunArgs,
    },
}

#[derive(Subcommand)]
enum GenKind {
    /// All value at one designated round.
    #[command(name = "remark1", alias = "concentrated")]
    Concentrated {
        #[arg(long = "T")]
        horizon: usize,
        /// Designated round, 1-based (default: the last round).
        #[arg(long)]
        t_star: Option<usize>,
    },
    /// Two rounds where restricting greedy to nearby rounds fails.
    #[command(name = "remark3", alias = "decoy")]
    Decoy {
        #[arg(long)]
        n: usize,
    },
    /// Binomial gap construction.
    Gap {
        #[arg(long = "T")]
        horizon: usize,
    },
    /// Influence instance from an edge list with lines `u v p`.
    Influence {
        #[arg(long)]
        edge_list: PathBuf,
        #[arg(long = "T")]
        horizon: usize,
        #[arg(long = "B")]
        budget: usize,
        /// Weight of every node in every round.
        #[arg(long, default_value_t = 1.0)]
        weight: f64,
    },
    /// Random small tabular instance.
    Random {
        #[arg(long, value_enum, default_value_t = FamilyArg::ProductCoverage)]
        family: FamilyArg,
        #[arg(long = "T", default_value_t = 3)]
        max_rounds: usize,
        #[arg(long, default_value_t = 3)]
        max_items: usize,
        #[arg(long, default_value_t = 4)]
        max_states: usize,
        #[arg(long = "B", default_value_t = 3)]
        max_budget: usize,
    },
}

#[derive(Args, Clone)]
struct OutputArgs {
    /// Write the report here instead of stdout.
    #[arg(long, short, global = true)]
    output: Option<PathBuf>,
}

#[derive(Args, Clone)]
struct RunArgs {
    #[arg(long, default_value_t = 42, global = true)]
    seed: u64,
    /// Worker threads (default: one per core).
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Rollouts for value estimates; accepts `1e4`.
    #[arg(long, default_value = "1e4", value_parser = parse_count, global = true)]
    rollouts: u64,
    #[command(flatten)]
    out: OutputArgs,
}

#[derive(Args, Clone)]
struct OracleArgs {
    /// Target accuracy, mapped to (delta, xi).
    #[arg(long, default_value_t = 0.1)]
    epsilon: f64,
    #[arg(long, default_value_t = 1.0)]
    c: f64,
    /// Oracle accuracy; overrides --epsilon together with --xi.
    #[arg(long, requires = "xi")]
    delta: Option<f64>,
    #[arg(long, requires = "delta")]
    xi: Option<f64>,
    /// Use exact conditional expectations instead of sampling.
    #[arg(long, conflicts_with_all = ["delta", "xi", "q1", "q2"])]
    exact: bool,
    /// Samples per single-item estimate.
    #[arg(long, value_parser = parse_count)]
    q1: Option<u64>,
    /// Greedy rollouts per increment estimate.
    #[arg(long, value_parser = parse_count)]
    q2: Option<u64>,
    #[arg(long, value_enum, default_value_t = Ci::Hoeffding)]
    ci: Ci,
}

#[derive(Args, Clone)]
struct GuardArgs {
    #[arg(long, default_value_t = 8)]
    max_items: usize,
    #[arg(long, default_value_t = 64)]
    max_states: usize,
    #[arg(long, default_value_t = 16)]
    max_budget: usize,
}

#[derive(ValueEnum, Clone, Copy)]
enum Ci {
    Hoeffding,
    Normal,
}

impl From<Ci> for CiMethod {
    fn from(c: Ci) -> Self {
        match c {
            Ci::Hoeffding => CiMethod::Hoeffding,
            Ci::Normal => CiMethod::Normal,
        }
    }
}

#[derive(ValueEnum, Clone, Copy, PartialEq, Eq)]
enum Property {
    Submodularity,
    OracleEquivalence,
    #[value(name = "lemma4", alias = "increment-allocation")]
    IncrementAllocation,
    #[value(name = "thm1-ratio", alias = "greedy-ratio")]
    GreedyRatio,
    #[value(name = "thm2-sandwich", alias = "partial-sandwich")]
    PartialSandwich,
}

#[derive(ValueEnum, Clone, Copy)]
enum FamilyArg {
    ProductCoverage,
    CorrelatedCoverage,
    GeneralMonotone,
}

impl From<FamilyArg> for Family {
    fn from(f: FamilyArg) -> Self {
        match f {
            FamilyArg::ProductCoverage => Family::ProductCoverage,
            FamilyArg::CorrelatedCoverage => Family::CorrelatedCoverage,
            FamilyArg::GeneralMonotone => Family::GeneralMonotone,
        }
    }
}

fn parse_count(s: &str) -> Result<u64, String> {
    let x: f64 = s.trim().parse().map_err(|_| format!("{s:?} is not a number"))?;
    if !(x >= 1.0 && x.fract() == 0.0 && x < u64::MAX as f64) {
        return Err(format!("{s:?} is not a positive integer"));
    }
    Ok(x as u64)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match commands::run(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(commands::exit_code(&e))
        }
    }
}
