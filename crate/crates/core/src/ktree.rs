//! Finite epistemic states: k-trees and (for one agent) information sets,
//! with their transition and observation-change updates.

use std::collections::BTreeSet;
use std::fmt::{Debug, Write as _};
use std::hash::Hash;

use thiserror::Error;

use crate::model::{AgentId, Model, ObsId, ObsTuple, StateId};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum UpdateError {
    /// The update produced an empty set of possibilities; this cannot
    /// happen along a real history.
    #[error("update to state `{state}` leaves agent `{agent}` with no possible state")]
    EmptyForest { state: String, agent: String },
    #[error("state `{to}` is not a successor of `{from}`")]
    NotASuccessor { from: String, to: String },
    #[error("record does not stop at the history (entry at time {time}, history length {len})")]
    RecordTooLong { time: usize, len: usize },
}

/// Depth-`k` knowledge tree: the current state and, per agent, the set of
/// depth-`k-1` trees that agent considers possible. Forests are sorted and
/// duplicate-free, so structural equality is semantic equality.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct KTree {
    root: StateId,
    forests: Vec<Vec<KTree>>,
    depth: usize,
}

impl KTree {
    pub fn leaf(root: StateId, agents: usize) -> KTree {
        KTree { root, forests: vec![Vec::new(); agents], depth: 0 }
    }

    /// Builds a tree from unsorted forests; every subtree must have depth
    /// `depth - 1`.
    pub fn new(root: StateId, forests: Vec<Vec<KTree>>, depth: usize) -> KTree {
        let forests = forests
            .into_iter()
            .map(|mut f| {
                debug_assert!(f.iter().all(|t| t.depth + 1 == depth));
                f.sort();
                f.dedup();
                f
            })
            .collect();
        KTree { root, forests, depth }
    }

    pub fn root(&self) -> StateId {
        self.root
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn num_agents(&self) -> usize {
        self.forests.len()
    }

    /// `KT(a)`: the forest of `agent`.
    pub fn forest(&self, agent: AgentId) -> &[KTree] {
        &self.forests[agent.index()]
    }

    /// The tree cut down to depth `d <= self.depth()`.
    pub fn truncate(&self, d: usize) -> KTree {
        if d == 0 {
            return KTree::leaf(self.root, self.forests.len());
        }
        KTree::new(
            self.root,
            self.forests.iter().map(|f| f.iter().map(|t| t.truncate(d - 1)).collect()).collect(),
            d,
        )
    }

    /// Checks uniform depth, canonical ordering and self-membership.
    pub fn is_well_formed(&self) -> bool {
        if self.depth == 0 {
            return self.forests.iter().all(Vec::is_empty);
        }
        let me = self.truncate(self.depth - 1);
        self.forests.iter().all(|f| {
            f.windows(2).all(|w| w[0] < w[1])
                && f.iter().all(|t| t.depth + 1 == self.depth && t.is_well_formed())
                && f.binary_search(&me).is_ok()
        })
    }

    /// The state and forest roots of a one-agent depth-1 tree.
    pub fn to_info(&self) -> Option<InfoState> {
        (self.depth == 1 && self.forests.len() == 1)
            .then(|| InfoState::new(self.root, self.forests[0].iter().map(|t| t.root).collect()))
    }

    /// Compact single-line rendering, e.g. `s2{a:[s1 s2] b:[s2]}`.
    pub fn render(&self, m: &Model) -> String {
        let mut out = String::new();
        self.render_into(m, &mut out);
        out
    }

    fn render_into(&self, m: &Model, out: &mut String) {
        out.push_str(m.state_name(self.root));
        if self.depth == 0 {
            return;
        }
        out.push('{');
        for (i, f) in self.forests.iter().enumerate() {
            if i > 0 {
                out.push(' ');
            }
            let _ = write!(out, "{}:[", m.agent_name(AgentId::from(i)));
            for (j, t) in f.iter().enumerate() {
                if j > 0 {
                    out.push(' ');
                }
                t.render_into(m, out);
            }
            out.push(']');
        }
        out.push('}');
    }

    /// Multi-line rendering with one subtree per line.
    pub fn render_indented(&self, m: &Model) -> String {
        fn go(t: &KTree, m: &Model, indent: usize, out: &mut String) {
            let _ = writeln!(out, "{:indent$}{}", "", m.state_name(t.root));
            for (i, f) in t.forests.iter().enumerate() {
                if t.depth == 0 {
                    break;
                }
                let _ = writeln!(out, "{:w$}{}:", "", m.agent_name(AgentId::from(i)), w = indent + 2);
                for sub in f {
                    go(sub, m, indent + 4, out);
                }
            }
        }
        let mut out = String::new();
        go(self, m, 0, &mut out);
        out
    }
}

/// Current state together with the set of states the single agent
/// considers possible.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct InfoState {
    pub current: StateId,
    pub iset: BTreeSet<StateId>,
}

impl InfoState {
    pub fn new(current: StateId, iset: BTreeSet<StateId>) -> InfoState {
        InfoState { current, iset }
    }

    /// `([s]_o, s)`, the information after the one-state history `s`.
    pub fn initial(m: &Model, s: StateId, o: ObsId) -> InfoState {
        InfoState::new(s, m.eq_class(o, s).iter().copied().collect())
    }
}

/// `U_T(I, s', o) = T(I) ∩ [s']_o`.
pub fn ut(i: &InfoState, next: StateId, o: ObsId, m: &Model) -> Result<InfoState, UpdateError> {
    let iset: BTreeSet<StateId> =
        m.successors_of_set(&i.iset).into_iter().filter(|t| m.equiv(o, *t, next)).collect();
    if iset.is_empty() {
        return Err(UpdateError::EmptyForest {
            state: m.state_name(next).to_string(),
            agent: m.agent_name(AgentId(0)).to_string(),
        });
    }
    Ok(InfoState::new(next, iset))
}

/// `U_Δ(I, s, o') = I ∩ [s]_{o'}`.
pub fn ud(i: &InfoState, o: ObsId, m: &Model) -> InfoState {
    InfoState::new(i.current, i.iset.iter().copied().filter(|t| m.equiv(o, *t, i.current)).collect())
}

/// `U_T^k`: the k-tree after moving to `next` under observations `ov`.
pub fn utk(t: &KTree, next: StateId, ov: &ObsTuple, m: &Model) -> Result<KTree, UpdateError> {
    if t.depth == 0 {
        return Ok(KTree::leaf(next, t.forests.len()));
    }
    let mut forests = Vec::with_capacity(t.forests.len());
    for (i, f) in t.forests.iter().enumerate() {
        let o = ov.0[i];
        let mut nf = Vec::new();
        for u in f {
            for &s2 in m.successors(u.root) {
                if m.equiv(o, s2, next) {
                    nf.push(utk(u, s2, ov, m)?);
                }
            }
        }
        if nf.is_empty() {
            return Err(UpdateError::EmptyForest {
                state: m.state_name(next).to_string(),
                agent: m.agent_name(AgentId::from(i)).to_string(),
            });
        }
        forests.push(nf);
    }
    Ok(KTree::new(next, forests, t.depth))
}

/// `U_Δ^k`: the k-tree after `agent` switches to observation `o`.
pub fn udk(t: &KTree, o: ObsId, agent: AgentId, m: &Model) -> KTree {
    fn go(t: &KTree, o: ObsId, agent: AgentId, m: &Model) -> KTree {
        if t.depth == 0 {
            return t.clone();
        }
        let forests = t
            .forests
            .iter()
            .enumerate()
            .map(|(i, f)| {
                f.iter()
                    .filter(|u| i != agent.index() || m.equiv(o, u.root, t.root))
                    .map(|u| go(u, o, agent, m))
                    .collect()
            })
            .collect();
        KTree::new(t.root, forests, t.depth)
    }
    go(t, o, agent, m)
}

/// `KT^k(s, ε)` when every agent uses observation `ov`.
pub fn tree_at(m: &Model, s: StateId, ov: &ObsTuple, k: usize) -> KTree {
    if k == 0 {
        return KTree::leaf(s, m.num_agents());
    }
    let forests = (0..m.num_agents())
        .map(|i| m.eq_class(ov.0[i], s).iter().map(|&t| tree_at(m, t, ov, k - 1)).collect())
        .collect();
    KTree::new(s, forests, k)
}

/// The depth-`k` tree of the initial one-state history.
pub fn initial_ktree(m: &Model, k: usize) -> KTree {
    tree_at(m, m.initial_state(), m.initial_obs(), k)
}

/// Observation-record entries in application order: `(time, agent, obs)`.
pub type Changes = [(usize, AgentId, ObsId)];

fn check_changes(history: &[StateId], changes: &Changes) -> Result<(), UpdateError> {
    match changes.iter().find(|c| c.0 >= history.len()) {
        Some(c) => Err(UpdateError::RecordTooLong { time: c.0, len: history.len() }),
        None => Ok(()),
    }
}

/// Replays a history and its observation changes through `advance` and
/// `refine`, returning the final epistemic state and observation tuple.
pub fn replay<E: EpistemicState>(
    m: &Model,
    start: E,
    history: &[StateId],
    changes: &Changes,
) -> Result<(E, ObsTuple), UpdateError> {
    check_changes(history, changes)?;
    let mut ov = m.initial_obs().clone();
    let mut e = start;
    for (n, &s) in history.iter().enumerate() {
        if n > 0 {
            let prev = history[n - 1];
            if !m.has_transition(prev, s) {
                return Err(UpdateError::NotASuccessor {
                    from: m.state_name(prev).to_string(),
                    to: m.state_name(s).to_string(),
                });
            }
            e = e.advance(s, &ov, m)?;
        }
        for &(_, a, o) in changes.iter().filter(|c| c.0 == n) {
            e = e.refine(a, o, m);
            ov = ov.with(a, o);
        }
    }
    Ok((e, ov))
}

/// `KT^k(h, r)` computed by updates.
pub fn replay_tree(m: &Model, history: &[StateId], changes: &Changes, k: usize) -> Result<(KTree, ObsTuple), UpdateError> {
    let start = tree_at(m, history[0], m.initial_obs(), k);
    replay(m, start, history, changes)
}

/// `(last h, IS(h, r))` computed by updates; single-agent models only.
pub fn replay_info(m: &Model, history: &[StateId], changes: &Changes) -> Result<(InfoState, ObsTuple), UpdateError> {
    let start = InfoState::initial(m, history[0], m.initial_obs().get(AgentId(0)));
    replay(m, start, history, changes)
}

/// A finite epistemic state that can label the nodes of an augmented model.
pub trait EpistemicState: Clone + Eq + Hash + Ord + Debug {
    fn root(&self) -> StateId;
    /// Level in the augmented model.
    fn depth(&self) -> usize;
    fn advance(&self, next: StateId, ov: &ObsTuple, m: &Model) -> Result<Self, UpdateError>;
    fn refine(&self, agent: AgentId, o: ObsId, m: &Model) -> Self;
    /// The states `agent` considers possible, as nodes of the same kind.
    fn considered(&self, agent: AgentId) -> Vec<Self>;
    fn render(&self, m: &Model) -> String;
}

impl EpistemicState for KTree {
    fn root(&self) -> StateId {
        self.root
    }

    fn depth(&self) -> usize {
        self.depth
    }

    fn advance(&self, next: StateId, ov: &ObsTuple, m: &Model) -> Result<Self, UpdateError> {
        utk(self, next, ov, m)
    }

    fn refine(&self, agent: AgentId, o: ObsId, m: &Model) -> Self {
        udk(self, o, agent, m)
    }

    fn considered(&self, agent: AgentId) -> Vec<Self> {
        self.forest(agent).to_vec()
    }

    fn render(&self, m: &Model) -> String {
        KTree::render(self, m)
    }
}

/// With one agent, knowledge at every nesting depth is determined by the
/// information set: the agent considers `(s', I)` possible for each `s' ∈ I`.
impl EpistemicState for InfoState {
    fn root(&self) -> StateId {
        self.current
    }

    fn depth(&self) -> usize {
        1
    }

    fn advance(&self, next: StateId, ov: &ObsTuple, m: &Model) -> Result<Self, UpdateError> {
        ut(self, next, ov.0[0], m)
    }

    fn refine(&self, _agent: AgentId, o: ObsId, m: &Model) -> Self {
        ud(self, o, m)
    }

    fn considered(&self, _agent: AgentId) -> Vec<Self> {
        self.iset.iter().map(|&s| InfoState::new(s, self.iset.clone())).collect()
    }

    fn render(&self, m: &Model) -> String {
        let members: Vec<&str> = self.iset.iter().map(|s| m.state_name(*s)).collect();
        format!("{}{{{}}}", m.state_name(self.current), members.join(" "))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::model::parse_model;

    fn set(m: &Model, names: &[&str]) -> BTreeSet<StateId> {
        names.iter().map(|n| m.state_by_name(n).unwrap()).collect()
    }

    fn info(m: &Model, cur: &str, names: &[&str]) -> InfoState {
        InfoState::new(m.state_by_name(cur).unwrap(), set(m, names))
    }

    #[test]
    fn ut_examples() {
        let m = parse_model(fixtures::FIG2).unwrap();
        let o1 = m.obs_by_name("o1").unwrap();
        let s1 = m.state_by_name("s1").unwrap();
        assert_eq!(ut(&info(&m, "s1", &["s1"]), s1, o1, &m).unwrap(), info(&m, "s1", &["s1", "s2"]));

        let m = parse_model(fixtures::FIG1).unwrap();
        let o1 = m.obs_by_name("o1").unwrap();
        let s2 = m.state_by_name("s2").unwrap();
        assert_eq!(ut(&info(&m, "s0", &["s0"]), s2, o1, &m).unwrap(), info(&m, "s2", &["s1", "s2"]));
    }

    #[test]
    fn ud_examples() {
        let m = parse_model(fixtures::FIG1).unwrap();
        let o2 = m.obs_by_name("o2").unwrap();
        let x = info(&m, "s5", &["s4", "s5"]);
        assert_eq!(ud(&x, o2, &m), info(&m, "s5", &["s5"]));
        assert_eq!(ud(&ud(&x, o2, &m), o2, &m), ud(&x, o2, &m));

        let m4 = parse_model(fixtures::FIG4).unwrap();
        let o2 = m4.obs_by_name("o2").unwrap();
        let x = info(&m4, "s5", &["s4", "s5"]);
        assert_eq!(ud(&x, o2, &m4), x);
    }

    #[test]
    fn initial_trees() {
        let m = parse_model(fixtures::FIG2).unwrap();
        let t = initial_ktree(&m, 1);
        assert_eq!(t.to_info().unwrap(), info(&m, "s1", &["s1", "s2"]));
        let m1 = parse_model(fixtures::FIG1).unwrap();
        assert_eq!(initial_ktree(&m1, 1).to_info().unwrap(), info(&m1, "s0", &["s0"]));
        assert_eq!(initial_ktree(&m1, 0), KTree::leaf(m1.initial_state(), 1));
    }

    #[test]
    fn depth_zero_updates() {
        let m = parse_model(fixtures::FIG2).unwrap();
        let s1 = m.state_by_name("s1").unwrap();
        let s2 = m.state_by_name("s2").unwrap();
        let t = KTree::leaf(s1, 1);
        assert_eq!(utk(&t, s2, m.initial_obs(), &m).unwrap(), KTree::leaf(s2, 1));
        assert_eq!(udk(&t, ObsId(1), AgentId(0), &m), t);
    }

    #[test]
    fn fig1_replay() {
        let m = parse_model(fixtures::FIG1).unwrap();
        let h: Vec<StateId> = ["s0", "s2", "s5"].iter().map(|n| m.state_by_name(n).unwrap()).collect();
        let (i, _) = replay_info(&m, &h, &[]).unwrap();
        assert_eq!(i, info(&m, "s5", &["s4", "s5"]));
        let o2 = m.obs_by_name("o2").unwrap();
        let (i, ov) = replay_info(&m, &h, &[(2, AgentId(0), o2)]).unwrap();
        assert_eq!(i, info(&m, "s5", &["s5"]));
        assert_eq!(ov.0, vec![o2]);
        let (t, _) = replay_tree(&m, &h, &[(2, AgentId(0), o2)], 2).unwrap();
        assert!(t.is_well_formed());
        assert_eq!(t.to_info(), None);
        assert_eq!(t.truncate(1).to_info().unwrap(), i);
    }

    #[test]
    fn record_must_stop_at_history() {
        let m = parse_model(fixtures::FIG2).unwrap();
        let h = [m.initial_state()];
        assert!(matches!(replay_info(&m, &h, &[(1, AgentId(0), ObsId(0))]), Err(UpdateError::RecordTooLong { .. })));
    }

    #[test]
    fn rendering() {
        let m = parse_model(fixtures::FIG2).unwrap();
        let t = initial_ktree(&m, 2);
        assert_eq!(KTree::render(&t, &m), "s1{a:[s1{a:[s1 s2]} s2{a:[s1 s2]}]}");
        assert!(t.render_indented(&m).lines().count() > 3);
        let i = InfoState::initial(&m, m.initial_state(), ObsId(0));
        assert_eq!(EpistemicState::render(&i, &m), "s1{s1 s2}");
    }
}
