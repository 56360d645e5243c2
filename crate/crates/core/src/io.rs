//! JSON instance files.
//!
//! ```json
//! {"kind": "tabular", "T": 2, "B": 1, "items": ["a", "b"],
//!  "lambda": 0.5, "capital_lambda": 1.0,
//!  "rounds": [{"states": [{"prob": 1.0, "local": [0, 0]}],
//!              "f": {"1@0": 1.0, "2@0": 0.5, "3@0": 1.0}}, ...]}
//! ```
//!
//! Objective keys are `<subset bitmask>@<state index>`. Every non-empty subset
//! must be listed for every state; the empty set defaults to 0. Probing rounds
//! are `{"p": [...], "g": {"type": "additive", "w": [...]}}`. Influence
//! instances carry `nodes`, `edges`, `p` and `w` at the top level instead of
//! `rounds`.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::env::tabular::{TabularObjective, TabularRound, MAX_TABLE_ENTRIES};
use crate::env::{Instance, InstanceHeader, LocalState, Model, ModelKind};
use crate::error::{Error, Result};
use crate::influence::InfluenceGraph;
use crate::probing::ProbingRound;

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawInstance {
    kind: ModelKind,
    #[serde(rename = "T")]
    horizon: usize,
    #[serde(rename = "B")]
    budget: usize,
    items: Vec<String>,
    lambda: f64,
    capital_lambda: f64,
    #[serde(default)]
    rounds: Vec<Value>,
    nodes: Option<usize>,
    edges: Option<Vec<(usize, usize)>>,
    p: Option<Vec<Vec<f64>>>,
    w: Option<Vec<Vec<f64>>>,
}

#[derive(Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct RawState {
    prob: f64,
    local: Vec<LocalState>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTabularRound {
    states: Vec<RawState>,
    f: BTreeMap<String, f64>,
}

pub fn parse_instance(text: &str) -> Result<Instance> {
    let raw: RawInstance = serde_json::from_str(text)?;
    let n = raw.items.len();
    let header = InstanceHeader {
        horizon: raw.horizon,
        budget: raw.budget,
        n,
        lambda: raw.lambda,
        capital_lambda: raw.capital_lambda,
        kind: raw.kind,
        items: raw.items,
    };
    let model = match raw.kind {
        ModelKind::Tabular => Model::Tabular(
            raw.rounds.into_iter().enumerate().map(|(t, v)| parse_tabular_round(t, n, v)).collect::<Result<_>>()?,
        ),
        ModelKind::Probing => Model::Probing(
            raw.rounds
                .into_iter()
                .enumerate()
                .map(|(t, v)| {
                    serde_json::from_value::<ProbingRound>(v)
                        .map_err(|e| Error::invalid(format!("round {}: {e}", t + 1)))
                })
                .collect::<Result<_>>()?,
        ),
        ModelKind::Influence => {
            let missing = |f: &str| Error::invalid(format!("influence instance without `{f}`"));
            let nodes = raw.nodes.ok_or_else(|| missing("nodes"))?;
            let edges = raw.edges.ok_or_else(|| missing("edges"))?;
            let p = raw.p.ok_or_else(|| missing("p"))?;
            let w = raw.w.ok_or_else(|| missing("w"))?;
            Model::Influence(InfluenceGraph::new(nodes, edges, p, w)?)
        }
    };
    Instance::new(header, model)
}

fn parse_tabular_round(t: usize, n: usize, value: Value) -> Result<TabularRound> {
    let r = t + 1;
    let raw: RawTabularRound = serde_json::from_value(value).map_err(|e| Error::invalid(format!("round {r}: {e}")))?;
    let h = raw.states.len();
    if n > 24 || (1usize << n).saturating_mul(h) > MAX_TABLE_ENTRIES {
        return Err(Error::guard(format!("round {r}: objective table 2^{n} x {h} is too large")));
    }
    let mut probs = Vec::with_capacity(h);
    let mut locals = Vec::with_capacity(h * n);
    for (s, st) in raw.states.into_iter().enumerate() {
        if st.local.len() != n {
            return Err(Error::invalid(format!(
                "round {r}: state {s} has {} local states, expected {n}",
                st.local.len()
            )));
        }
        probs.push(st.prob);
        locals.extend(st.local);
    }
    let mut table: Vec<Option<f64>> = vec![None; (1usize << n) * h];
    table[..h].fill(Some(0.0));
    for (key, value) in raw.f {
        let bad = || Error::invalid(format!("round {r}: malformed objective key {key:?}"));
        let (mask, state) = key.split_once('@').ok_or_else(bad)?;
        let mask: usize = mask.trim().parse().map_err(|_| bad())?;
        let state: usize = state.trim().parse().map_err(|_| bad())?;
        if mask >> n != 0 || state >= h {
            return Err(Error::invalid(format!("round {r}: objective key {key:?} out of range")));
        }
        table[mask * h + state] = Some(value);
    }
    let table = table
        .into_iter()
        .enumerate()
        .map(|(i, v)| {
            v.ok_or_else(|| Error::invalid(format!("round {r}: missing objective value \"{}@{}\"", i / h, i % h)))
        })
        .collect::<Result<Vec<f64>>>()?;
    TabularRound::from_parts(n, probs, locals, TabularObjective::Table(table))
}

pub fn load_instance(path: &Path) -> Result<Instance> {
    parse_instance(&std::fs::read_to_string(path)?)
}

/// JSON form of an instance. Tabular objectives given in closed form are
/// written out as full tables.
pub fn instance_to_json(inst: &Instance) -> Result<Value> {
    let h = inst.header();
    let mut out = json!({
        "kind": h.kind,
        "T": h.horizon,
        "B": h.budget,
        "items": h.items,
        "lambda": h.lambda,
        "capital_lambda": h.capital_lambda,
    });
    let obj = out.as_object_mut().expect("object literal");
    match inst.model() {
        Model::Tabular(rounds) => {
            let n = inst.n();
            if n > 24 {
                return Err(Error::guard("cannot write objective tables for more than 24 items"));
            }
            let rounds: Vec<Value> = rounds
                .iter()
                .map(|r| {
                    let states: Vec<RawState> = (0..r.num_states())
                        .map(|s| RawState { prob: r.prob(s), local: r.local_vector(s).to_vec() })
                        .collect();
                    let mut f = serde_json::Map::new();
                    for mask in 1..(1u64 << n) {
                        for s in 0..r.num_states() {
                            f.insert(format!("{mask}@{s}"), json!(r.value(mask, s)));
                        }
                    }
                    json!({ "states": states, "f": f })
                })
                .collect();
            obj.insert("rounds".into(), Value::Array(rounds));
        }
        Model::Probing(rounds) => {
            obj.insert("rounds".into(), serde_json::to_value(rounds)?);
        }
        Model::Influence(g) => {
            obj.insert("nodes".into(), json!(g.nodes));
            obj.insert("edges".into(), json!(g.edges));
            obj.insert("p".into(), json!(g.p));
            obj.insert("w".into(), json!(g.w));
        }
    }
    Ok(out)
}

pub fn instance_to_string(inst: &Instance) -> Result<String> {
    Ok(serde_json::to_string_pretty(&instance_to_json(inst)?)?)
}
