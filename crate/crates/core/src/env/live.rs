//! A round being played: hidden state, observations so far, realized value.

use rand::Rng;
use sha2::{Digest, Sha256};

use super::tabular::ConditionalSampler;
use super::{Instance, Item, LocalState, Model, PartialState};
use crate::error::{Error, Result};
use crate::influence::{diffuse, influence_eval, EdgeRevelation};

/// What a policy may condition on.
#[derive(Debug, Clone, Copy)]
pub enum RoundView<'a> {
    States(&'a PartialState),
    Influence { revelation: &'a EdgeRevelation, active: &'a [bool] },
}

#[derive(Debug, Clone)]
enum Inner {
    Tabular { hidden: Option<usize>, obs: PartialState },
    Probing { obs: PartialState },
    Influence { revelation: EdgeRevelation, active: Vec<bool>, activations: Vec<Vec<usize>> },
}

/// One round of one rollout. Hidden randomness is drawn lazily from the rng
/// passed to [`LiveRound::select`].
#[derive(Debug, Clone)]
pub struct LiveRound<'a> {
    inst: &'a Instance,
    t: usize,
    selected: Vec<Item>,
    inner: Inner,
}

impl<'a> LiveRound<'a> {
    pub fn new(inst: &'a Instance, t: usize) -> Result<Self> {
        if t >= inst.horizon() {
            return Err(Error::arg(format!("round {} outside 1..={}", t + 1, inst.horizon())));
        }
        let inner = match inst.model() {
            Model::Tabular(_) => Inner::Tabular { hidden: None, obs: PartialState::new() },
            Model::Probing(_) => Inner::Probing { obs: PartialState::new() },
            Model::Influence(g) => Inner::Influence {
                revelation: EdgeRevelation::new(g, t),
                active: vec![false; g.nodes],
                activations: Vec::new(),
            },
        };
        Ok(LiveRound { inst, t, selected: Vec::new(), inner })
    }

    pub fn round(&self) -> usize {
        self.t
    }

    pub fn instance(&self) -> &'a Instance {
        self.inst
    }

    /// Items in selection order.
    pub fn selected(&self) -> &[Item] {
        &self.selected
    }

    pub fn view(&self) -> RoundView<'_> {
        match &self.inner {
            Inner::Tabular { obs, .. } | Inner::Probing { obs } => RoundView::States(obs),
            Inner::Influence { revelation, active, .. } => RoundView::Influence { revelation, active },
        }
    }

    /// Observation for tabular and probing rounds.
    pub fn observation(&self) -> Option<&PartialState> {
        match &self.inner {
            Inner::Tabular { obs, .. } | Inner::Probing { obs } => Some(obs),
            Inner::Influence { .. } => None,
        }
    }

    /// Whether `v` may be selected next: not yet selected, and for influence
    /// rounds not already activated.
    pub fn eligible(&self, v: Item) -> bool {
        v < self.inst.n()
            && match &self.inner {
                Inner::Tabular { obs, .. } | Inner::Probing { obs } => !obs.contains(v),
                Inner::Influence { active, .. } => !active[v],
            }
    }

    pub fn any_eligible(&self) -> bool {
        (0..self.inst.n()).any(|v| self.eligible(v))
    }

    /// Select `v` and reveal its local state (or run its diffusion).
    pub fn select<R: Rng + ?Sized>(&mut self, v: Item, rng: &mut R) -> Result<()> {
        if !self.eligible(v) {
            return Err(Error::arg(format!("item {v} is not selectable at round {}", self.t + 1)));
        }
        let t = self.t;
        match (&mut self.inner, self.inst.model()) {
            (Inner::Tabular { hidden, obs }, Model::Tabular(rounds)) => {
                let r = &rounds[t];
                let s = match hidden {
                    Some(s) => *s,
                    None => {
                        let dist = r.conditional(obs).ok_or(Error::ZeroProbability { round: t + 1 })?;
                        *hidden.insert(ConditionalSampler::new(&dist).sample(rng))
                    }
                };
                obs.insert(v, r.local(s, v));
            }
            (Inner::Probing { obs }, Model::Probing(rounds)) => {
                obs.insert(v, rng.random_bool(rounds[t].p[v]) as LocalState);
            }
            (Inner::Influence { revelation, active, activations }, Model::Influence(g)) => {
                activations.push(diffuse(g, revelation, active, v, rng)?);
            }
            _ => unreachable!("live round built for a different model"),
        }
        self.selected.push(v);
        Ok(())
    }

    /// Realized `f_t(S_t, eta_t)` for the items selected so far.
    pub fn value(&self) -> f64 {
        match (&self.inner, self.inst.model()) {
            (Inner::Tabular { hidden, obs }, Model::Tabular(rounds)) => match hidden {
                Some(s) => rounds[self.t].value(obs.mask(), *s),
                None => 0.0,
            },
            (Inner::Probing { obs }, Model::Probing(rounds)) => {
                rounds[self.t].g.eval(obs.iter().filter(|e| e.1 == 1).map(|e| e.0))
            }
            (Inner::Influence { activations, .. }, Model::Influence(g)) => influence_eval(g, self.t, activations),
            _ => unreachable!("live round built for a different model"),
        }
    }

    /// Canonical text of everything observed so far.
    pub fn canonical(&self) -> String {
        match &self.inner {
            Inner::Tabular { obs, .. } | Inner::Probing { obs } => {
                format!("{}|{}", self.t + 1, obs)
            }
            Inner::Influence { revelation, .. } => {
                let seeds: Vec<String> = self.selected.iter().map(|v| v.to_string()).collect();
                format!("{}|{}|{}", self.t + 1, seeds.join(","), revelation.canonical())
            }
        }
    }

    /// Short stable digest of [`LiveRound::canonical`].
    pub fn digest(&self) -> String {
        let hash = Sha256::digest(self.canonical().as_bytes());
        hash.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }
}
