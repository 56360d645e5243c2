//! Multi-round influence maximization under independent cascade.
//!
//! Each round has its own edge probabilities and node weights. Rounds are
//! independent: a live round starts with every edge unrevealed, and edges are
//! sampled on demand when a diffusion first examines them.

use std::collections::VecDeque;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::env::{tabular::TabularObjective, tabular::TabularRound, Instance, InstanceHeader, Item, Model, ModelKind};
use crate::error::{Error, Result};

/// Limits for enumerating live-edge patterns as tabular global states.
pub const MAX_TABULAR_EDGES: usize = 16;
pub const MAX_TABULAR_NODES: usize = 32;

#[derive(Debug, Clone, PartialEq)]
pub struct InfluenceGraph {
    pub nodes: usize,
    pub edges: Vec<(usize, usize)>,
    /// `p[t][e]`: probability that edge `e` is live at round `t`.
    pub p: Vec<Vec<f64>>,
    /// `w[t][v]`: weight of node `v` at round `t`.
    pub w: Vec<Vec<f64>>,
    out: Vec<Vec<usize>>,
}

impl InfluenceGraph {
    pub fn new(nodes: usize, edges: Vec<(usize, usize)>, p: Vec<Vec<f64>>, w: Vec<Vec<f64>>) -> Result<Self> {
        let mut g = InfluenceGraph { nodes, edges, p, w, out: Vec::new() };
        g.validate()?;
        g.index();
        Ok(g)
    }

    fn index(&mut self) {
        let mut out = vec![Vec::new(); self.nodes];
        for (e, &(u, _)) in self.edges.iter().enumerate() {
            out[u].push(e);
        }
        self.out = out;
    }

    fn validate(&self) -> Result<()> {
        if self.p.len() != self.w.len() {
            return Err(Error::invalid("edge probabilities and node weights cover different numbers of rounds"));
        }
        let mut seen = std::collections::BTreeSet::new();
        for &(u, v) in &self.edges {
            if u >= self.nodes || v >= self.nodes {
                return Err(Error::invalid(format!("edge ({u},{v}) references a node outside 0..{}", self.nodes)));
            }
            if !seen.insert((u, v)) {
                return Err(Error::invalid(format!("duplicate edge ({u},{v})")));
            }
        }
        for (t, (pt, wt)) in self.p.iter().zip(&self.w).enumerate() {
            if pt.len() != self.edges.len() {
                return Err(Error::invalid(format!(
                    "round {}: {} edge probabilities, expected {}",
                    t + 1,
                    pt.len(),
                    self.edges.len()
                )));
            }
            if wt.len() != self.nodes {
                return Err(Error::invalid(format!(
                    "round {}: {} node weights, expected {}",
                    t + 1,
                    wt.len(),
                    self.nodes
                )));
            }
            if let Some(p) = pt.iter().find(|p| !(0.0..=1.0).contains(*p)) {
                return Err(Error::invalid(format!("round {}: edge probability {p} outside [0,1]", t + 1)));
            }
            if let Some(w) = wt.iter().find(|w| !(w.is_finite() && **w >= 0.0)) {
                return Err(Error::invalid(format!("round {}: node weight {w} must be finite and >= 0", t + 1)));
            }
        }
        Ok(())
    }

    pub fn rounds(&self) -> usize {
        self.p.len()
    }

    pub fn out_edges(&self, u: usize) -> &[usize] {
        &self.out[u]
    }

    pub fn max_weight(&self) -> f64 {
        self.w.iter().flatten().copied().fold(0.0, f64::max)
    }

    /// Nodes reachable from `sources` over the edges marked live.
    pub fn reachable(&self, live: &[bool], sources: &[usize]) -> Vec<bool> {
        let mut seen = vec![false; self.nodes];
        let mut queue: VecDeque<usize> = VecDeque::new();
        for &s in sources {
            if !seen[s] {
                seen[s] = true;
                queue.push_back(s);
            }
        }
        while let Some(u) = queue.pop_front() {
            for &e in &self.out[u] {
                let v = self.edges[e].1;
                if live[e] && !seen[v] {
                    seen[v] = true;
                    queue.push_back(v);
                }
            }
        }
        seen
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EdgeStatus {
    Unrevealed,
    Live,
    Dead,
}

/// Edge statuses revealed so far within one round.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EdgeRevelation {
    pub round: usize,
    pub status: Vec<EdgeStatus>,
}

impl EdgeRevelation {
    pub fn new(graph: &InfluenceGraph, round: usize) -> Self {
        EdgeRevelation { round, status: vec![EdgeStatus::Unrevealed; graph.edges.len()] }
    }

    pub fn revealed(&self) -> usize {
        self.status.iter().filter(|s| **s != EdgeStatus::Unrevealed).count()
    }

    /// Canonical text form: `index` + `L`/`D` for every revealed edge.
    pub fn canonical(&self) -> String {
        self.status
            .iter()
            .enumerate()
            .filter_map(|(e, s)| match s {
                EdgeStatus::Unrevealed => None,
                EdgeStatus::Live => Some(format!("{e}L")),
                EdgeStatus::Dead => Some(format!("{e}D")),
            })
            .collect::<Vec<_>>()
            .join(",")
    }
}

/// Draw a full live-edge pattern for round `t`.
pub fn sample_live_edges<R: Rng + ?Sized>(graph: &InfluenceGraph, t: usize, rng: &mut R) -> Vec<bool> {
    graph.p[t].iter().map(|&p| rng.random_bool(p)).collect()
}

/// Independent cascade from `seed` restricted to nodes not yet active.
///
/// Edges examined for the first time are sampled and recorded in `revelation`.
/// `active` is updated in place; the returned list holds the newly activated
/// nodes in BFS order, starting with `seed`.
pub fn diffuse<R: Rng + ?Sized>(
    graph: &InfluenceGraph,
    revelation: &mut EdgeRevelation,
    active: &mut [bool],
    seed: usize,
    rng: &mut R,
) -> Result<Vec<usize>> {
    if active[seed] {
        return Err(Error::arg(format!("seed {seed} is already active")));
    }
    let t = revelation.round;
    let mut reached = vec![seed];
    active[seed] = true;
    let mut head = 0;
    while head < reached.len() {
        let u = reached[head];
        head += 1;
        for &e in graph.out_edges(u) {
            let v = graph.edges[e].1;
            if active[v] {
                continue;
            }
            let live = match revelation.status[e] {
                EdgeStatus::Live => true,
                EdgeStatus::Dead => false,
                EdgeStatus::Unrevealed => {
                    let live = rng.random_bool(graph.p[t][e]);
                    revelation.status[e] = if live { EdgeStatus::Live } else { EdgeStatus::Dead };
                    live
                }
            };
            if live {
                active[v] = true;
                reached.push(v);
            }
        }
    }
    Ok(reached)
}

/// Weight of what a hypothetical seed would newly reach, sampling unrevealed
/// edges without recording them. Used by the Monte-Carlo oracles.
pub(crate) fn hypothetical_spread<R: Rng + ?Sized>(
    graph: &InfluenceGraph,
    revelation: &EdgeRevelation,
    active: &[bool],
    seed: usize,
    scratch: &mut Vec<bool>,
    rng: &mut R,
) -> f64 {
    if active[seed] {
        return 0.0;
    }
    let t = revelation.round;
    scratch.clear();
    scratch.extend_from_slice(active);
    let mut queue = vec![seed];
    scratch[seed] = true;
    let mut total = graph.w[t][seed];
    while let Some(u) = queue.pop() {
        for &e in graph.out_edges(u) {
            let v = graph.edges[e].1;
            if scratch[v] {
                continue;
            }
            let live = match revelation.status[e] {
                EdgeStatus::Live => true,
                EdgeStatus::Dead => false,
                EdgeStatus::Unrevealed => rng.random_bool(graph.p[t][e]),
            };
            if live {
                scratch[v] = true;
                total += graph.w[t][v];
                queue.push(v);
            }
        }
    }
    total
}

/// Total round-`t` weight of the union of the given activation sets.
pub fn influence_eval(graph: &InfluenceGraph, t: usize, activations: &[Vec<usize>]) -> f64 {
    let mut seen = vec![false; graph.nodes];
    let mut total = 0.0;
    for v in activations.iter().flatten() {
        if !seen[*v] {
            seen[*v] = true;
            total += graph.w[t][*v];
        }
    }
    total
}

/// `f_t(S, live)`: weight of everything reachable from `S` in the live graph.
pub fn influence_objective(graph: &InfluenceGraph, t: usize, seeds: &[Item], live: &[bool]) -> f64 {
    let reach = graph.reachable(live, seeds);
    reach.iter().zip(&graph.w[t]).filter(|(r, _)| **r).map(|(_, w)| w).sum()
}

/// Enumerate live-edge patterns as global states.
///
/// The local state of node `v` is the bitmask of nodes reachable from `v` in
/// the pattern, and `f_t(S, eta)` is the weight of the union of those masks.
pub fn influence_to_tabular(instance: &Instance) -> Result<Instance> {
    let graph = match instance.model() {
        Model::Influence(g) => g,
        _ => return Err(Error::Unsupported("influence_to_tabular on a non-influence instance".into())),
    };
    let m = graph.edges.len();
    if m > MAX_TABULAR_EDGES || graph.nodes > MAX_TABULAR_NODES {
        return Err(Error::guard(format!(
            "influence graph with {} nodes and {m} edges exceeds the enumeration limits ({MAX_TABULAR_NODES} nodes, {MAX_TABULAR_EDGES} edges)",
            graph.nodes
        )));
    }
    let n = graph.nodes;
    let patterns = 1usize << m;
    let mut rounds = Vec::with_capacity(graph.rounds());
    for t in 0..graph.rounds() {
        let mut probs = Vec::with_capacity(patterns);
        let mut locals = Vec::with_capacity(patterns * n);
        for s in 0..patterns {
            let live: Vec<bool> = (0..m).map(|e| s >> e & 1 == 1).collect();
            let pr: f64 = (0..m).map(|e| if live[e] { graph.p[t][e] } else { 1.0 - graph.p[t][e] }).product();
            probs.push(pr);
            for v in 0..n {
                let reach = graph.reachable(&live, &[v]);
                let mask = reach.iter().enumerate().filter(|(_, r)| **r).fold(0u32, |acc, (u, _)| acc | 1 << u);
                locals.push(mask);
            }
        }
        rounds.push(TabularRound::from_parts(n, probs, locals, TabularObjective::ReachUnion(graph.w[t].clone()))?);
    }
    let header = InstanceHeader { kind: ModelKind::Tabular, ..instance.header().clone() };
    Instance::new(header, Model::Tabular(rounds))
}

/// Parse an edge list with one `u v p_1 ... p_T` line per edge. Blank lines
/// and lines starting with `#` are skipped. Node weights default to 1.
pub fn parse_edge_list(text: &str, horizon: usize) -> Result<InfluenceGraph> {
    let mut edges = Vec::new();
    let mut p: Vec<Vec<f64>> = vec![Vec::new(); horizon];
    let mut nodes = 0;
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 2 + horizon {
            return Err(Error::invalid(format!(
                "edge list line {}: expected {} fields, found {}",
                lineno + 1,
                2 + horizon,
                fields.len()
            )));
        }
        let parse_node = |s: &str| {
            s.parse::<usize>().map_err(|_| Error::invalid(format!("edge list line {}: bad node id {s:?}", lineno + 1)))
        };
        let (u, v) = (parse_node(fields[0])?, parse_node(fields[1])?);
        nodes = nodes.max(u + 1).max(v + 1);
        edges.push((u, v));
        for (t, f) in fields[2..].iter().enumerate() {
            let x = f
                .parse::<f64>()
                .map_err(|_| Error::invalid(format!("edge list line {}: bad probability {f:?}", lineno + 1)))?;
            p[t].push(x);
        }
    }
    let w = vec![vec![1.0; nodes]; horizon];
    InfluenceGraph::new(nodes, edges, p, w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn path_graph(p: f64) -> InfluenceGraph {
        InfluenceGraph::new(3, vec![(0, 1), (1, 2)], vec![vec![p, p]], vec![vec![1.0; 3]]).unwrap()
    }

    #[test]
    fn all_live_or_all_dead() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!(sample_live_edges(&path_graph(1.0), 0, &mut rng).iter().all(|&x| x));
        assert!(sample_live_edges(&path_graph(0.0), 0, &mut rng).iter().all(|&x| !x));
    }

    #[test]
    fn single_edge_frequency() {
        let g = InfluenceGraph::new(2, vec![(0, 1)], vec![vec![0.3]], vec![vec![1.0; 2]]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let live = (0..100_000).filter(|_| sample_live_edges(&g, 0, &mut rng)[0]).count();
        assert!((live as f64 / 1e5 - 0.3).abs() < 0.01);
    }

    #[test]
    fn isolated_seed() {
        let g = InfluenceGraph::new(3, vec![(1, 2)], vec![vec![1.0]], vec![vec![1.0; 3]]).unwrap();
        let mut rev = EdgeRevelation::new(&g, 0);
        let mut active = vec![false; 3];
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        assert_eq!(diffuse(&g, &mut rev, &mut active, 0, &mut rng).unwrap(), vec![0]);
        assert_eq!(rev.revealed(), 0);
    }

    #[test]
    fn path_fully_live() {
        let g = path_graph(1.0);
        let mut rev = EdgeRevelation::new(&g, 0);
        let mut active = vec![false; 3];
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let got = diffuse(&g, &mut rev, &mut active, 0, &mut rng).unwrap();
        assert_eq!(got, vec![0, 1, 2]);
    }

    #[test]
    fn seed_already_active_is_an_error() {
        let g = path_graph(1.0);
        let mut rev = EdgeRevelation::new(&g, 0);
        let mut active = vec![true, false, false];
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        assert!(diffuse(&g, &mut rev, &mut active, 0, &mut rng).is_err());
    }

    #[test]
    fn half_edge_frequency() {
        let g = InfluenceGraph::new(2, vec![(0, 1)], vec![vec![0.5]], vec![vec![1.0; 2]]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let mut two = 0;
        for _ in 0..100_000 {
            let mut rev = EdgeRevelation::new(&g, 0);
            let mut active = vec![false; 2];
            if diffuse(&g, &mut rev, &mut active, 0, &mut rng).unwrap().len() == 2 {
                two += 1;
            }
        }
        assert!((two as f64 / 1e5 - 0.5).abs() < 0.01);
    }

    #[test]
    fn rerun_with_revelation_is_idempotent() {
        let g = InfluenceGraph::new(
            5,
            vec![(0, 1), (0, 2), (1, 3), (2, 3), (3, 4), (4, 0)],
            vec![vec![0.5; 6]],
            vec![vec![1.0; 5]],
        )
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..200 {
            let base_active = vec![false, false, false, false, rng.random_bool(0.3)];
            let mut rev = EdgeRevelation::new(&g, 0);
            let mut a1 = base_active.clone();
            let first = diffuse(&g, &mut rev, &mut a1, 0, &mut rng).unwrap();
            let snapshot = rev.clone();
            let mut a2 = base_active.clone();
            let second = diffuse(&g, &mut rev, &mut a2, 0, &mut rng).unwrap();
            assert_eq!(first, second);
            assert_eq!(rev, snapshot);
        }
    }

    #[test]
    fn union_weights() {
        let g = InfluenceGraph::new(3, vec![], vec![vec![]], vec![vec![1.0; 3]]).unwrap();
        assert_eq!(influence_eval(&g, 0, &[]), 0.0);
        assert_eq!(influence_eval(&g, 0, &[vec![0, 1], vec![1, 2]]), 3.0);
        let g = InfluenceGraph::new(3, vec![], vec![vec![]], vec![vec![1.0, 2.0, 4.0]]).unwrap();
        assert_eq!(influence_eval(&g, 0, &[vec![0, 2]]), 5.0);
    }

    #[test]
    fn edge_list_parsing() {
        let g = parse_edge_list("# comment\n0 1 0.5 0.25\n1 2 1 0\n", 2).unwrap();
        assert_eq!(g.nodes, 3);
        assert_eq!(g.edges, vec![(0, 1), (1, 2)]);
        assert_eq!(g.p[1], vec![0.25, 0.0]);
        assert!(parse_edge_list("0 1 0.5\n", 2).is_err());
        assert!(parse_edge_list("0 1 1.5 0\n", 2).is_err());
    }

    #[test]
    fn duplicate_edges_rejected() {
        assert!(InfluenceGraph::new(2, vec![(0, 1), (0, 1)], vec![vec![0.5, 0.5]], vec![vec![1.0; 2]]).is_err());
    }
}
