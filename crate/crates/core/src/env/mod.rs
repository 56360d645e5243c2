//! Instances, partial states and exact conditioning.

pub mod live;
pub mod partial;
pub mod tabular;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::influence::{influence_objective, influence_to_tabular, sample_live_edges, InfluenceGraph};
use crate::probing::{probing_to_tabular, ProbingRound};
pub use live::{LiveRound, RoundView};
pub use partial::PartialState;
use tabular::{ConditionalSampler, TabularRound};

pub type Item = usize;
pub type LocalState = u32;

/// Numerical slack for validating the boundedness constants.
const CONSTANT_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Tabular,
    Probing,
    Influence,
}

impl ModelKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Tabular => "tabular",
            ModelKind::Probing => "probing",
            ModelKind::Influence => "influence",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InstanceHeader {
    pub horizon: usize,
    pub budget: usize,
    pub n: usize,
    /// Lower bound on some single-item expected value.
    pub lambda: f64,
    /// Upper bound on every single-item increment.
    pub capital_lambda: f64,
    pub kind: ModelKind,
    pub items: Vec<String>,
}

impl InstanceHeader {
    /// Header with items named `v0, v1, ...`.
    pub fn new(horizon: usize, budget: usize, n: usize, lambda: f64, capital_lambda: f64, kind: ModelKind) -> Self {
        InstanceHeader {
            horizon,
            budget,
            n,
            lambda,
            capital_lambda,
            kind,
            items: (0..n).map(|v| format!("v{v}")).collect(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.horizon == 0 {
            return Err(Error::invalid("horizon T must be at least 1"));
        }
        if self.n == 0 {
            return Err(Error::invalid("at least one item is required"));
        }
        if self.budget >= self.n * self.horizon {
            return Err(Error::invalid(format!(
                "budget B = {} must be below n*T = {}",
                self.budget,
                self.n * self.horizon
            )));
        }
        if !(self.lambda > 0.0 && self.lambda.is_finite())
            || !(self.capital_lambda > 0.0 && self.capital_lambda.is_finite())
        {
            return Err(Error::invalid("lambda and capital_lambda must be positive and finite"));
        }
        if self.lambda > self.capital_lambda {
            return Err(Error::invalid(format!(
                "lambda = {} exceeds capital_lambda = {}",
                self.lambda, self.capital_lambda
            )));
        }
        if self.items.len() != self.n {
            return Err(Error::invalid(format!("{} item names for {} items", self.items.len(), self.n)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Model {
    Tabular(Vec<TabularRound>),
    Probing(Vec<ProbingRound>),
    Influence(InfluenceGraph),
}

/// A realized global state of one round.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum GlobalState {
    /// Index into the round's state list.
    Tabular(usize),
    /// Activation bit per item.
    Probing(Vec<bool>),
    /// Live flag per edge.
    Influence(Vec<bool>),
}

/// Immutable, validated instance.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    header: InstanceHeader,
    model: Model,
}

impl Instance {
    pub fn new(header: InstanceHeader, model: Model) -> Result<Self> {
        header.validate()?;
        let (n, horizon) = (header.n, header.horizon);
        let kind = match &model {
            Model::Tabular(rounds) => {
                check_rounds(rounds.len(), horizon)?;
                for (t, r) in rounds.iter().enumerate() {
                    if r.items() != n {
                        return Err(Error::invalid(format!("round {}: {} items, expected {n}", t + 1, r.items())));
                    }
                    r.validate(t)?;
                }
                ModelKind::Tabular
            }
            Model::Probing(rounds) => {
                check_rounds(rounds.len(), horizon)?;
                for (t, r) in rounds.iter().enumerate() {
                    r.validate(n).map_err(|e| prefix_round(e, t))?;
                }
                ModelKind::Probing
            }
            Model::Influence(g) => {
                check_rounds(g.rounds(), horizon)?;
                if g.nodes != n {
                    return Err(Error::invalid(format!("graph has {} nodes, header declares {n}", g.nodes)));
                }
                ModelKind::Influence
            }
        };
        if kind != header.kind {
            return Err(Error::invalid(format!(
                "header kind {} does not match the {} payload",
                header.kind.as_str(),
                kind.as_str()
            )));
        }
        let inst = Instance { header, model };
        inst.check_constants()?;
        Ok(inst)
    }

    fn check_constants(&self) -> Result<()> {
        let (lambda, cap) = (self.header.lambda, self.header.capital_lambda);
        let (max_inc, best_single) = match &self.model {
            Model::Tabular(rounds) => {
                let inc = rounds.iter().map(TabularRound::max_increment).fold(0.0, f64::max);
                let single = rounds
                    .iter()
                    .flat_map(|r| {
                        (0..r.items()).map(move |v| r.support().map(|s| r.prob(s) * r.value(1 << v, s)).sum::<f64>())
                    })
                    .fold(0.0, f64::max);
                (inc, single)
            }
            Model::Probing(rounds) => {
                let inc = rounds.iter().map(|r| r.g.max_increment()).fold(0.0, f64::max);
                let single =
                    rounds.iter().flat_map(|r| (0..r.p.len()).map(move |v| r.p[v] * r.g.eval([v]))).fold(0.0, f64::max);
                (inc, single)
            }
            Model::Influence(g) => (g.nodes as f64 * g.max_weight(), g.max_weight()),
        };
        if max_inc > cap + CONSTANT_TOLERANCE {
            return Err(Error::invalid(format!(
                "capital_lambda = {cap} is below the largest single-item increment {max_inc}"
            )));
        }
        if lambda > best_single + CONSTANT_TOLERANCE {
            return Err(Error::invalid(format!("lambda = {lambda} exceeds the best single-item value {best_single}")));
        }
        Ok(())
    }

    pub fn header(&self) -> &InstanceHeader {
        &self.header
    }

    pub fn model(&self) -> &Model {
        &self.model
    }

    pub fn n(&self) -> usize {
        self.header.n
    }

    pub fn horizon(&self) -> usize {
        self.header.horizon
    }

    pub fn budget(&self) -> usize {
        self.header.budget
    }

    pub fn kind(&self) -> ModelKind {
        self.header.kind
    }

    /// Same instance with a different total budget.
    pub fn with_budget(&self, budget: usize) -> Result<Instance> {
        let header = InstanceHeader { budget, ..self.header.clone() };
        header.validate()?;
        Ok(Instance { header, model: self.model.clone() })
    }

    pub fn tabular_round(&self, t: usize) -> Option<&TabularRound> {
        match &self.model {
            Model::Tabular(r) => r.get(t),
            _ => None,
        }
    }

    /// Fully enumerated copy. Probing instances enumerate activation vectors,
    /// influence instances enumerate live-edge patterns.
    pub fn to_tabular(&self) -> Result<Instance> {
        match &self.model {
            Model::Tabular(_) => Ok(self.clone()),
            Model::Probing(_) => probing_to_tabular(self),
            Model::Influence(_) => influence_to_tabular(self),
        }
    }

    fn check_round(&self, t: usize) -> Result<()> {
        if t >= self.horizon() {
            return Err(Error::arg(format!("round {} outside 1..={}", t + 1, self.horizon())));
        }
        Ok(())
    }

    fn check_items(&self, items: &[Item]) -> Result<()> {
        if let Some(v) = items.iter().find(|&&v| v >= self.n()) {
            return Err(Error::arg(format!("item {v} out of range (n = {})", self.n())));
        }
        Ok(())
    }

    /// `f_t(S, eta)`.
    pub fn eval_objective(&self, t: usize, selected: &[Item], eta: &GlobalState) -> Result<f64> {
        self.check_round(t)?;
        self.check_items(selected)?;
        match (&self.model, eta) {
            (Model::Tabular(rounds), GlobalState::Tabular(s)) => {
                let r = &rounds[t];
                if *s >= r.num_states() {
                    return Err(Error::arg(format!("unknown state {s} at round {}", t + 1)));
                }
                Ok(r.value(items_mask(selected), *s))
            }
            (Model::Probing(rounds), GlobalState::Probing(phi)) if phi.len() == self.n() => {
                Ok(crate::probing::probing_eval(&rounds[t], selected, phi))
            }
            (Model::Influence(g), GlobalState::Influence(live)) if live.len() == g.edges.len() => {
                Ok(influence_objective(g, t, selected, live))
            }
            _ => Err(Error::arg("global state does not match the instance model")),
        }
    }

    pub fn sample_state<R: Rng + ?Sized>(&self, t: usize, rng: &mut R) -> Result<GlobalState> {
        self.check_round(t)?;
        Ok(match &self.model {
            Model::Tabular(rounds) => GlobalState::Tabular(rounds[t].sample_state(rng)),
            Model::Probing(rounds) => GlobalState::Probing(rounds[t].p.iter().map(|&p| rng.random_bool(p)).collect()),
            Model::Influence(g) => GlobalState::Influence(sample_live_edges(g, t, rng)),
        })
    }

    /// Draw `⟨target⟩ ⪰ observed` from the round distribution conditioned on
    /// `observed`.
    pub fn sample_extension<R: Rng + ?Sized>(
        &self,
        t: usize,
        observed: &PartialState,
        target: &[Item],
        rng: &mut R,
    ) -> Result<PartialState> {
        self.check_round(t)?;
        self.check_items(target)?;
        self.check_items(&observed.items())?;
        let mut out = observed.clone();
        match &self.model {
            Model::Tabular(rounds) => {
                let r = &rounds[t];
                let dist = r.conditional(observed).ok_or(Error::ZeroProbability { round: t + 1 })?;
                let s = ConditionalSampler::new(&dist).sample(rng);
                for &v in target {
                    out.insert(v, r.local(s, v));
                }
            }
            Model::Probing(rounds) => {
                let r = &rounds[t];
                probing_consistent(r, observed, t)?;
                for &v in target {
                    if !out.contains(v) {
                        out.insert(v, rng.random_bool(r.p[v]) as LocalState);
                    }
                }
            }
            Model::Influence(_) => {
                return Err(Error::Unsupported(
                    "influence rounds are observed through edge revelations; use a live round".into(),
                ))
            }
        }
        Ok(out)
    }

    /// `Δ_t(v | observed)`, the exact conditional expected increment.
    pub fn exact_marginal(&self, t: usize, v: Item, observed: &PartialState) -> Result<f64> {
        self.check_round(t)?;
        self.check_items(&[v])?;
        match &self.model {
            Model::Tabular(rounds) => {
                let r = &rounds[t];
                let dist = r.conditional(observed).ok_or(Error::ZeroProbability { round: t + 1 })?;
                if observed.contains(v) {
                    return Ok(0.0);
                }
                let mask = observed.mask();
                Ok(dist.iter().map(|&(s, p)| p * (r.value(mask | 1 << v, s) - r.value(mask, s))).sum())
            }
            Model::Probing(rounds) => {
                let r = &rounds[t];
                probing_consistent(r, observed, t)?;
                if observed.contains(v) {
                    return Ok(0.0);
                }
                let active: Vec<Item> = observed.iter().filter(|e| e.1 == 1).map(|e| e.0).collect();
                Ok(r.p[v] * r.g.gain(&active, v))
            }
            Model::Influence(_) => Err(Error::Unsupported("exact marginals on influence instances".into())),
        }
    }

    /// `E[f_t(S, eta) | observed]` where `S` are the observed items.
    pub fn expected_value(&self, t: usize, observed: &PartialState) -> Result<f64> {
        self.check_round(t)?;
        match &self.model {
            Model::Tabular(rounds) => {
                let r = &rounds[t];
                let dist = r.conditional(observed).ok_or(Error::ZeroProbability { round: t + 1 })?;
                let mask = observed.mask();
                Ok(dist.iter().map(|&(s, p)| p * r.value(mask, s)).sum())
            }
            Model::Probing(rounds) => {
                let r = &rounds[t];
                probing_consistent(r, observed, t)?;
                Ok(r.g.eval(observed.iter().filter(|e| e.1 == 1).map(|e| e.0)))
            }
            Model::Influence(_) => Err(Error::Unsupported("exact conditioning on influence instances".into())),
        }
    }

    /// Distribution of the local state of `v` given `observed`, sorted by
    /// local state; zero-probability outcomes are omitted.
    pub fn outcome_distribution(&self, t: usize, observed: &PartialState, v: Item) -> Result<Vec<(LocalState, f64)>> {
        self.check_round(t)?;
        self.check_items(&[v])?;
        match &self.model {
            Model::Tabular(rounds) => {
                let r = &rounds[t];
                let dist = r.conditional(observed).ok_or(Error::ZeroProbability { round: t + 1 })?;
                let mut out: Vec<(LocalState, f64)> = Vec::new();
                for (s, p) in dist {
                    let local = r.local(s, v);
                    match out.iter_mut().find(|o| o.0 == local) {
                        Some(o) => o.1 += p,
                        None => out.push((local, p)),
                    }
                }
                out.sort_by_key(|o| o.0);
                Ok(out)
            }
            Model::Probing(rounds) => {
                let r = &rounds[t];
                probing_consistent(r, observed, t)?;
                if let Some(local) = observed.get(v) {
                    return Ok(vec![(local, 1.0)]);
                }
                let p = r.p[v];
                Ok([(0, 1.0 - p), (1, p)].into_iter().filter(|o| o.1 > 0.0).collect())
            }
            Model::Influence(_) => Err(Error::Unsupported("exact conditioning on influence instances".into())),
        }
    }

    /// True if exact conditioning is available without enumeration.
    pub fn supports_exact(&self) -> bool {
        !matches!(self.model, Model::Influence(_))
    }
}

fn check_rounds(found: usize, horizon: usize) -> Result<()> {
    if found != horizon {
        return Err(Error::invalid(format!("{found} rounds supplied, header declares T = {horizon}")));
    }
    Ok(())
}

fn prefix_round(e: Error, t: usize) -> Error {
    match e {
        Error::Invalid(msg) => Error::Invalid(format!("round {}: {msg}", t + 1)),
        other => other,
    }
}

fn probing_consistent(r: &ProbingRound, observed: &PartialState, t: usize) -> Result<()> {
    for (v, local) in observed.iter() {
        let ok = match local {
            0 => r.p[v] < 1.0,
            1 => r.p[v] > 0.0,
            _ => false,
        };
        if !ok {
            return Err(Error::ZeroProbability { round: t + 1 });
        }
    }
    Ok(())
}

pub(crate) fn items_mask(items: &[Item]) -> u64 {
    items.iter().fold(0, |m, &v| m | 1u64 << v)
}

#[cfg(test)]
mod tests {
    use super::tabular::TabularObjective;
    use super::*;
    use crate::probing::SubmodularSpec;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Two items; state 0 has local states (0,0), state 1 has (1,0).
    fn two_state() -> Instance {
        let table = vec![0.0, 0.0, 2.0, 3.0, 0.5, 0.5, 2.5, 3.5];
        let r =
            TabularRound::from_parts(2, vec![0.25, 0.75], vec![0, 0, 1, 0], TabularObjective::Table(table)).unwrap();
        let h = InstanceHeader::new(1, 1, 2, 0.5, 10.0, ModelKind::Tabular);
        Instance::new(h, Model::Tabular(vec![r])).unwrap()
    }

    fn probing(p: Vec<f64>, w: Vec<f64>) -> Instance {
        let n = p.len();
        let h = InstanceHeader::new(1, 0, n, 0.01, 10.0, ModelKind::Probing);
        Instance::new(h, Model::Probing(vec![ProbingRound { p, g: SubmodularSpec::Additive { w } }])).unwrap()
    }

    #[test]
    fn empty_set_is_zero() {
        let inst = two_state();
        for s in 0..2 {
            assert_eq!(inst.eval_objective(0, &[], &GlobalState::Tabular(s)).unwrap(), 0.0);
        }
        assert_eq!(inst.eval_objective(0, &[0], &GlobalState::Tabular(0)).unwrap(), 2.0);
        assert!(inst.eval_objective(0, &[0], &GlobalState::Tabular(5)).is_err());
        assert!(inst.eval_objective(0, &[4], &GlobalState::Tabular(0)).is_err());
    }

    #[test]
    fn header_invariants() {
        assert!(InstanceHeader::new(2, 4, 2, 1.0, 1.0, ModelKind::Tabular).validate().is_err());
        assert!(InstanceHeader::new(0, 0, 2, 1.0, 1.0, ModelKind::Tabular).validate().is_err());
        assert!(InstanceHeader::new(2, 1, 2, 2.0, 1.0, ModelKind::Tabular).validate().is_err());
        assert!(InstanceHeader::new(2, 3, 2, 1.0, 1.0, ModelKind::Tabular).validate().is_ok());
    }

    #[test]
    fn capital_lambda_must_cover_increments() {
        let r = TabularRound::from_parts(1, vec![1.0], vec![0], TabularObjective::Table(vec![0.0, 3.0])).unwrap();
        let h = InstanceHeader::new(1, 0, 1, 1.0, 2.0, ModelKind::Tabular);
        let err = Instance::new(h, Model::Tabular(vec![r])).unwrap_err();
        assert!(err.to_string().contains("capital_lambda"));
    }

    #[test]
    fn probing_state_never_activates_zero_probability_items() {
        let inst = probing(vec![0.0, 1.0], vec![1.0, 1.0]);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..1000 {
            assert_eq!(inst.sample_state(0, &mut rng).unwrap(), GlobalState::Probing(vec![false, true]));
        }
    }

    #[test]
    fn probing_eval_on_active_subset() {
        let inst = probing(vec![0.5, 0.5], vec![1.0, 3.0]);
        let v = inst.eval_objective(0, &[0, 1], &GlobalState::Probing(vec![true, false])).unwrap();
        assert_eq!(v, 1.0);
    }

    #[test]
    fn extension_to_observed_items_is_identity() {
        let inst = two_state();
        let obs = PartialState::from_pairs([(0, 1)]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        assert_eq!(inst.sample_extension(0, &obs, &[0], &mut rng).unwrap(), obs);
        // Only state 1 has item 0 in local state 1.
        let ext = inst.sample_extension(0, &obs, &[0, 1], &mut rng).unwrap();
        assert_eq!(ext, PartialState::from_pairs([(0, 1), (1, 0)]).unwrap());
        let impossible = PartialState::from_pairs([(1, 1)]).unwrap();
        assert!(matches!(
            inst.sample_extension(0, &impossible, &[0], &mut rng),
            Err(Error::ZeroProbability { round: 1 })
        ));
    }

    #[test]
    fn extension_frequencies_match_bayes() {
        // States: (a,b) locals (0,0) p=.2, (0,1) p=.3, (1,1) p=.5. Given b=1,
        // a=1 with probability .5/.8.
        let locals = vec![0, 0, 0, 1, 1, 1];
        let table = vec![0.0; 4 * 3];
        let r = TabularRound::from_parts(2, vec![0.2, 0.3, 0.5], locals, TabularObjective::Table(table)).unwrap();
        let h = InstanceHeader::new(1, 1, 2, 1e-9, 1.0, ModelKind::Tabular);
        let h = InstanceHeader { lambda: 1e-12, ..h };
        let inst = Instance { header: h, model: Model::Tabular(vec![r]) };
        let obs = PartialState::from_pairs([(1, 1)]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let draws = 100_000;
        let hits =
            (0..draws).filter(|_| inst.sample_extension(0, &obs, &[0, 1], &mut rng).unwrap().get(0) == Some(1)).count();
        assert!((hits as f64 / draws as f64 - 0.625).abs() < 0.01);
    }

    #[test]
    fn probing_marginal_closed_form_matches_enumeration() {
        let inst = probing(vec![0.5], vec![2.0]);
        assert!((inst.exact_marginal(0, 0, &PartialState::new()).unwrap() - 1.0).abs() < 1e-15);
        let tab = inst.to_tabular().unwrap();
        assert!((tab.exact_marginal(0, 0, &PartialState::new()).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn marginal_of_observed_item_is_zero() {
        let inst = two_state();
        let obs = PartialState::from_pairs([(0, 1)]).unwrap();
        assert_eq!(inst.exact_marginal(0, 0, &obs).unwrap(), 0.0);
        // Single consistent state (1): f({a,b}) - f({a}) = 3.5 - 3.
        assert!((inst.exact_marginal(0, 1, &obs).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn outcome_distribution_sums_to_one() {
        let inst = two_state();
        let d = inst.outcome_distribution(0, &PartialState::new(), 0).unwrap();
        assert_eq!(d, vec![(0, 0.25), (1, 0.75)]);
    }
}
