//! The augmented model: reachable pairs of epistemic state and observation
//! tuple, linked by transition steps, observation-change jumps and the
//! "considers possible" relation of each agent.

use std::collections::{BTreeMap, HashMap, VecDeque};
use std::fmt::Write as _;

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::ktree::{EpistemicState, UpdateError};
use crate::model::{AgentId, Model, ObsId, ObsTuple};

pub const DEFAULT_BUDGET: usize = 5_000_000;

/// The node budget: `DYNOBS_BUDGET` if set and valid, otherwise the default.
pub fn budget_from_env() -> usize {
    std::env::var("DYNOBS_BUDGET").ok().and_then(|v| v.parse().ok()).unwrap_or(DEFAULT_BUDGET)
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum AugmentError {
    #[error("node budget of {budget} exceeded ({frontier} nodes still queued)")]
    Budget { budget: usize, frontier: usize },
    #[error(transparent)]
    Update(#[from] UpdateError),
    #[error("no component for the given observation tuple at level {0}")]
    UnknownComponent(usize),
}

impl AugmentError {
    pub fn code(&self) -> &'static str {
        match self {
            AugmentError::Budget { .. } => "E_BUDGET",
            AugmentError::Update(_) => "E_UPDATE",
            AugmentError::UnknownComponent(_) => "E_COMPONENT",
        }
    }
}

#[derive(Clone, Debug)]
pub struct AugmentedModel<E> {
    nodes: Vec<(E, ObsTuple)>,
    index: HashMap<(E, ObsTuple), usize>,
    t_succ: Vec<Vec<usize>>,
    delta: Vec<Vec<((AgentId, ObsId), usize)>>,
    links: Vec<Vec<Vec<usize>>>,
    initial: usize,
}

impl<E: EpistemicState> AugmentedModel<E> {
    /// Breadth-first closure from `(start, obs)` under transition steps,
    /// jumps for `pairs`, and links to considered states.
    pub fn build(
        m: &Model,
        start: E,
        obs: ObsTuple,
        pairs: &[(AgentId, ObsId)],
        budget: usize,
    ) -> Result<AugmentedModel<E>, AugmentError> {
        let mut am = AugmentedModel {
            nodes: Vec::new(),
            index: HashMap::new(),
            t_succ: Vec::new(),
            delta: Vec::new(),
            links: Vec::new(),
            initial: 0,
        };
        let mut queue = VecDeque::new();
        am.intern((start, obs), &mut queue, budget)?;
        while let Some(v) = queue.pop_front() {
            let (e, ov) = am.nodes[v].clone();
            let mut succ = Vec::new();
            for &s in m.successors(e.root()) {
                let w = am.intern((e.advance(s, &ov, m)?, ov.clone()), &mut queue, budget)?;
                succ.push(w);
            }
            succ.sort_unstable();
            succ.dedup();
            let mut jumps = Vec::with_capacity(pairs.len());
            for &(a, o) in pairs {
                let w = am.intern((e.refine(a, o, m), ov.with(a, o)), &mut queue, budget)?;
                jumps.push(((a, o), w));
            }
            let mut links = Vec::with_capacity(m.num_agents());
            for a in m.agent_ids() {
                let mut l = Vec::new();
                for u in e.considered(a) {
                    l.push(am.intern((u, ov.clone()), &mut queue, budget)?);
                }
                l.sort_unstable();
                links.push(l);
            }
            am.t_succ[v] = succ;
            am.delta[v] = jumps;
            am.links[v] = links;
        }
        Ok(am)
    }

    fn intern(&mut self, key: (E, ObsTuple), queue: &mut VecDeque<usize>, budget: usize) -> Result<usize, AugmentError> {
        if let Some(&i) = self.index.get(&key) {
            return Ok(i);
        }
        if self.nodes.len() >= budget {
            return Err(AugmentError::Budget { budget, frontier: queue.len() });
        }
        let i = self.nodes.len();
        self.index.insert(key.clone(), i);
        self.nodes.push(key);
        self.t_succ.push(Vec::new());
        self.delta.push(Vec::new());
        self.links.push(Vec::new());
        queue.push_back(i);
        Ok(i)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn initial(&self) -> usize {
        self.initial
    }

    pub fn node(&self, v: usize) -> &(E, ObsTuple) {
        &self.nodes[v]
    }

    pub fn nodes(&self) -> &[(E, ObsTuple)] {
        &self.nodes
    }

    pub fn find(&self, e: &E, ov: &ObsTuple) -> Option<usize> {
        self.index.get(&(e.clone(), ov.clone())).copied()
    }

    pub fn t_succ(&self) -> &[Vec<usize>] {
        &self.t_succ
    }

    /// The jump target of `v` for `(agent, obs)`, if that pair was built.
    pub fn delta_target(&self, v: usize, agent: AgentId, o: ObsId) -> Option<usize> {
        self.delta[v].iter().find(|(p, _)| *p == (agent, o)).map(|(_, w)| *w)
    }

    pub fn links(&self, v: usize, agent: AgentId) -> &[usize] {
        &self.links[v][agent.index()]
    }

    pub fn level(&self, v: usize) -> usize {
        self.nodes[v].0.depth()
    }

    pub fn num_t_edges(&self) -> usize {
        self.t_succ.iter().map(Vec::len).sum()
    }

    /// Node count per level.
    pub fn level_sizes(&self) -> BTreeMap<usize, usize> {
        let mut out = BTreeMap::new();
        for (e, _) in &self.nodes {
            *out.entry(e.depth()).or_insert(0) += 1;
        }
        out
    }

    /// Nodes grouped by `(level, observation tuple)`.
    pub fn components(&self) -> BTreeMap<(usize, ObsTuple), Vec<usize>> {
        let mut out: BTreeMap<(usize, ObsTuple), Vec<usize>> = BTreeMap::new();
        for (v, (e, ov)) in self.nodes.iter().enumerate() {
            out.entry((e.depth(), ov.clone())).or_default().push(v);
        }
        out
    }

    /// The nodes of one component with its transition edges, in node order.
    pub fn component_of(&self, ov: &ObsTuple, level: usize) -> Result<Component, AugmentError> {
        let nodes: Vec<usize> =
            (0..self.len()).filter(|&v| self.nodes[v].1 == *ov && self.level(v) == level).collect();
        if nodes.is_empty() {
            return Err(AugmentError::UnknownComponent(level));
        }
        let edges = nodes.iter().flat_map(|&v| self.t_succ[v].iter().map(move |&w| (v, w))).collect();
        Ok(Component { nodes, edges })
    }

    /// Stable identifier derived from the node's content.
    pub fn node_id(&self, m: &Model, v: usize) -> String {
        let (e, ov) = &self.nodes[v];
        let mut h = Sha256::new();
        h.update(e.render(m).as_bytes());
        h.update(b"|");
        h.update(render_obs(m, ov).as_bytes());
        let digest = h.finalize();
        let mut out = String::from("n");
        for b in &digest[..8] {
            let _ = write!(out, "{b:02x}");
        }
        out
    }

    /// Graphviz rendering: one cluster per component, transition edges
    /// solid, jumps dashed, links dotted. `extra(v)` lists labels to show
    /// in brackets.
    pub fn to_dot(&self, m: &Model, extra: &dyn Fn(usize) -> Vec<String>) -> String {
        let ids: Vec<String> = (0..self.len()).map(|v| self.node_id(m, v)).collect();
        let mut out = String::from("digraph augmented {\n  node [shape=box, fontname=\"monospace\"];\n");
        for (ci, ((level, ov), members)) in self.components().into_iter().enumerate() {
            let _ = writeln!(out, "  subgraph cluster_{ci} {{");
            let _ = writeln!(out, "    label=\"level {level} / {}\";", render_obs(m, &ov));
            for v in members {
                let (e, _) = &self.nodes[v];
                let labels = extra(v);
                let lab = if labels.is_empty() { String::new() } else { format!(" [{}]", labels.join(" ")) };
                let style = if v == self.initial { ", penwidth=2" } else { "" };
                let caption = format!("{} | {}{}", e.render(m), render_obs(m, &ov), lab).replace('"', "\\\"");
                let _ = writeln!(out, "    {} [label=\"{caption}\"{style}];", ids[v]);
            }
            out.push_str("  }\n");
        }
        for v in 0..self.len() {
            for &w in &self.t_succ[v] {
                let _ = writeln!(out, "  {} -> {};", ids[v], ids[w]);
            }
            for ((a, o), w) in &self.delta[v] {
                if *w != v {
                    let _ = writeln!(
                        out,
                        "  {} -> {} [style=dashed, label=\"D[{},{}]\"];",
                        ids[v],
                        ids[*w],
                        m.agent_name(*a),
                        m.obs_name(*o)
                    );
                }
            }
            for (a, targets) in self.links[v].iter().enumerate() {
                for &w in targets {
                    if self.level(w) < self.level(v) {
                        let _ = writeln!(
                            out,
                            "  {} -> {} [style=dotted, arrowhead=none, label=\"{}\"];",
                            ids[v],
                            ids[w],
                            m.agent_name(AgentId::from(a))
                        );
                    }
                }
            }
        }
        out.push_str("}\n");
        out
    }
}

/// One observation-tuple component of a level.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Component {
    pub nodes: Vec<usize>,
    pub edges: Vec<(usize, usize)>,
}

pub fn render_obs(m: &Model, ov: &ObsTuple) -> String {
    ov.0.iter().map(|o| m.obs_name(*o)).collect::<Vec<_>>().join(",")
}

/// Largest exponent evaluated exactly.
const EXPONENT_CAP: u64 = 1 << 16;

/// An upper bound that may be too large to write out.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Bound {
    Exact(BigUint),
    /// Exceeds `2^EXPONENT_CAP`.
    Capped,
}

impl Bound {
    /// Whether `n` does not exceed the bound.
    pub fn admits(&self, n: &BigUint) -> bool {
        match self {
            Bound::Exact(b) => n <= b,
            Bound::Capped => n.bits() <= EXPONENT_CAP,
        }
    }

    pub fn mul(&self, k: &BigUint) -> Bound {
        match self {
            Bound::Exact(b) => Bound::Exact(b * k),
            Bound::Capped => Bound::Capped,
        }
    }

    pub fn is_capped(&self) -> bool {
        matches!(self, Bound::Capped)
    }
}

impl std::fmt::Display for Bound {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Bound::Exact(b) if b.bits() <= 256 => write!(f, "{b}"),
            Bound::Exact(b) => write!(f, "~2^{}", b.bits() - 1),
            Bound::Capped => write!(f, ">2^{EXPONENT_CAP}"),
        }
    }
}

/// `tower(a, 0) = a`, `tower(a, b + 1) = a · 2^tower(a, b)`.
pub fn tower(a: u64, b: usize) -> Bound {
    let mut t = BigUint::from(a);
    for _ in 0..b {
        let Some(e) = t.to_u64().filter(|e| *e <= EXPONENT_CAP) else {
            return Bound::Capped;
        };
        t = BigUint::from(a) * (BigUint::one() << e);
    }
    Bound::Exact(t)
}

/// `C_k = tower(m·l, k) / m` (integer division), the bound on the number
/// of distinct k-trees over `l` states and `m` agents.
pub fn tower_bound(m_count: u64, l: u64, k: usize) -> Bound {
    match tower(m_count * l, k) {
        Bound::Exact(t) => Bound::Exact(t / BigUint::from(m_count)),
        Bound::Capped => Bound::Capped,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::ktree::{initial_ktree, InfoState, KTree};
    use crate::model::parse_model;

    #[test]
    fn towers() {
        assert_eq!(tower(6, 0), Bound::Exact(BigUint::from(6u32)));
        assert_eq!(tower(2, 1), Bound::Exact(BigUint::from(8u32)));
        assert_eq!(tower_bound(1, 2, 1), Bound::Exact(BigUint::from(8u32)));
        assert_eq!(tower_bound(2, 3, 1), Bound::Exact(BigUint::from(192u32)));
        assert!(tower(5, 3).is_capped());
        assert!(tower(5, 3).admits(&BigUint::from(u64::MAX)));
    }

    fn fig2_augmented() -> (Model, AugmentedModel<InfoState>) {
        let m = parse_model(fixtures::FIG2).unwrap();
        let pairs = [(AgentId(0), ObsId(0)), (AgentId(0), ObsId(1))];
        let start = InfoState::initial(&m, m.initial_state(), ObsId(0));
        let am = AugmentedModel::build(&m, start, m.initial_obs().clone(), &pairs, 1000).unwrap();
        (m, am)
    }

    #[test]
    fn fig2_six_nodes() {
        let (m, am) = fig2_augmented();
        assert_eq!(am.len(), 6);
        assert_eq!(am.num_t_edges(), 9);
        let o1 = ObsTuple(vec![ObsId(0)]);
        let o2 = ObsTuple(vec![ObsId(1)]);
        assert_eq!(am.component_of(&o1, 1).unwrap().nodes.len(), 4);
        assert_eq!(am.component_of(&o2, 1).unwrap().nodes.len(), 2);
        assert!(am.component_of(&o2, 0).is_err());
        let dot = am.to_dot(&m, &|_| vec![]);
        assert_eq!(dot.matches("subgraph").count(), 2);
        assert!(dot.contains("s1{s1 s2} | o1"));
    }

    #[test]
    fn level_zero_mirrors_model() {
        let m = parse_model(fixtures::FIG1).unwrap();
        let start = initial_ktree(&m, 0);
        let am: AugmentedModel<KTree> = AugmentedModel::build(&m, start, m.initial_obs().clone(), &[], 1000).unwrap();
        // s0 and everything reachable from it
        assert_eq!(am.len(), 7);
        assert_eq!(am.num_t_edges(), m.num_transitions());
        assert_eq!(am.components().len(), 1);
    }

    #[test]
    fn budget_is_enforced() {
        let m = parse_model(fixtures::FIG1).unwrap();
        let start = initial_ktree(&m, 1);
        let r = AugmentedModel::build(&m, start, m.initial_obs().clone(), &[], 3);
        assert!(matches!(r, Err(AugmentError::Budget { budget: 3, .. })));
    }

    #[test]
    fn node_ids_are_stable_and_distinct() {
        let (m, am) = fig2_augmented();
        let (_, again) = fig2_augmented();
        let ids: Vec<String> = (0..am.len()).map(|v| am.node_id(&m, v)).collect();
        let again: Vec<String> = (0..again.len()).map(|v| again.node_id(&m, v)).collect();
        assert_eq!(ids, again);
        let mut sorted = ids.clone();
        sorted.sort();
        sorted.dedup();
        assert_eq!(sorted.len(), ids.len());
    }
}
