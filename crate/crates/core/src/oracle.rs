//! Brute-force reference semantics over explicit histories.
//!
//! Everything here works straight from the definitions: equivalent
//! histories are enumerated level by level and knowledge is read off them.
//! Nothing in this module calls the update functions of [`crate::ktree`],
//! so it can serve as an independent check on them.

use std::collections::{BTreeSet, HashMap};
use std::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::ktree::KTree;
use crate::logic::Formula;
use crate::model::{AgentId, Model, ObsId, ObsTuple, StateId};

/// `(observation, time)` entries in the order they were taken.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ObservationRecord(pub Vec<(ObsId, usize)>);

impl ObservationRecord {
    /// Whether no entry has a time after `n`.
    pub fn stops_at(&self, n: usize) -> bool {
        self.0.iter().all(|&(_, t)| t <= n)
    }
}

/// One record per agent.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RecordTuple(pub Vec<ObservationRecord>);

impl RecordTuple {
    pub fn empty(agents: usize) -> RecordTuple {
        RecordTuple(vec![ObservationRecord::default(); agents])
    }

    /// `r⃗ · (o, time)_agent`.
    pub fn appended(&self, agent: AgentId, o: ObsId, time: usize) -> RecordTuple {
        let mut r = self.clone();
        r.0[agent.index()].0.push((o, time));
        r
    }

    pub fn stops_at(&self, n: usize) -> bool {
        self.0.iter().all(|r| r.stops_at(n))
    }

    pub fn num_changes(&self) -> usize {
        self.0.iter().map(|r| r.0.len()).sum()
    }

    /// Entries as `(time, agent, obs)`, ordered by time, then agent, then
    /// record order.
    pub fn changes(&self) -> Vec<(usize, AgentId, ObsId)> {
        let mut out: Vec<(usize, AgentId, ObsId)> = self
            .0
            .iter()
            .enumerate()
            .flat_map(|(a, r)| r.0.iter().map(move |&(o, t)| (t, AgentId::from(a), o)))
            .collect();
        out.sort_by_key(|c| (c.0, c.1));
        out
    }
}

/// A nonempty finite sequence of states following transitions.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct History(pub Vec<StateId>);

impl History {
    pub fn new(m: &Model, states: Vec<StateId>) -> Result<History, OracleError> {
        if states.is_empty() {
            return Err(OracleError::EmptyHistory);
        }
        if let Some(w) = states.windows(2).find(|w| !m.has_transition(w[0], w[1])) {
            return Err(OracleError::NotAHistory {
                from: m.state_name(w[0]).to_string(),
                to: m.state_name(w[1]).to_string(),
            });
        }
        Ok(History(states))
    }

    pub fn last(&self) -> StateId {
        *self.0.last().expect("histories are nonempty")
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum OracleError {
    #[error("history is empty")]
    EmptyHistory,
    #[error("`{from} -> {to}` is not a transition")]
    NotAHistory { from: String, to: String },
    #[error("record does not stop at a history of length {0}")]
    RecordTooLong(usize),
    #[error("information sets are defined for single-agent models only")]
    MultiAgent,
}

/// `ol_a(r⃗, n)`: the observations used by `agent` at time `n`.
pub fn obslist(rt: &RecordTuple, agent: AgentId, n: usize, m: &Model) -> Vec<ObsId> {
    let rec = &rt.0[agent.index()].0;
    let at = |t: usize| rec.iter().filter(move |e| e.1 == t).map(|e| e.0);
    let mut ol: Vec<ObsId> = std::iter::once(m.initial_obs().get(agent)).chain(at(0)).collect();
    for t in 1..=n {
        let last = *ol.last().expect("never empty");
        ol = std::iter::once(last).chain(at(t)).collect();
    }
    ol
}

/// `o⃗(h, r⃗)`: each agent's last observation after a history of length `len`.
pub fn lastobs(rt: &RecordTuple, len: usize, m: &Model) -> Result<ObsTuple, OracleError> {
    if len == 0 {
        return Err(OracleError::EmptyHistory);
    }
    if !rt.stops_at(len - 1) {
        return Err(OracleError::RecordTooLong(len));
    }
    Ok(ObsTuple(
        m.agent_ids().map(|a| *obslist(rt, a, len - 1, m).last().expect("never empty")).collect(),
    ))
}

/// All histories of the same length as `h` that `agent` cannot tell apart
/// from `h` under the record tuple, starting anywhere.
pub fn equiv_histories(m: &Model, h: &History, rt: &RecordTuple, agent: AgentId) -> Vec<History> {
    let used: Vec<Vec<ObsId>> = (0..h.len()).map(|i| obslist(rt, agent, i, m)).collect();
    let ok = |i: usize, t: StateId| used[i].iter().all(|&o| m.equiv(o, t, h.0[i]));
    let mut level: Vec<Vec<StateId>> = m.state_ids().filter(|&t| ok(0, t)).map(|t| vec![t]).collect();
    for i in 1..h.len() {
        let mut next = Vec::new();
        for p in &level {
            for &t in m.successors(*p.last().expect("nonempty")) {
                if ok(i, t) {
                    let mut q = p.clone();
                    q.push(t);
                    next.push(q);
                }
            }
        }
        level = next;
    }
    level.into_iter().map(History).collect()
}

/// `IS(h, r)`: states possible after `h`; single-agent models only.
pub fn info_set_enum(m: &Model, h: &History, rt: &RecordTuple) -> Result<BTreeSet<StateId>, OracleError> {
    if m.num_agents() != 1 {
        return Err(OracleError::MultiAgent);
    }
    if !rt.stops_at(h.len() - 1) {
        return Err(OracleError::RecordTooLong(h.len()));
    }
    Ok(equiv_histories(m, h, rt, AgentId(0)).iter().map(History::last).collect())
}

/// `KT^k(h, r⃗)` by recursion over equivalent histories.
pub fn ktree_enum(m: &Model, h: &History, rt: &RecordTuple, k: usize) -> KTree {
    fn go(m: &Model, h: &History, rt: &RecordTuple, k: usize, memo: &mut HashMap<(History, usize), KTree>) -> KTree {
        if k == 0 {
            return KTree::leaf(h.last(), m.num_agents());
        }
        if let Some(t) = memo.get(&(h.clone(), k)) {
            return t.clone();
        }
        let forests = m
            .agent_ids()
            .map(|a| equiv_histories(m, h, rt, a).iter().map(|h2| go(m, h2, rt, k - 1, memo)).collect())
            .collect();
        let t = KTree::new(h.last(), forests, k);
        memo.insert((h.clone(), k), t.clone());
        t
    }
    go(m, h, rt, k, &mut HashMap::new())
}

/// Three-valued verdict with Kleene connectives.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Verdict3 {
    Holds,
    Fails,
    Unknown,
}

impl Verdict3 {
    pub fn from_bool(b: bool) -> Verdict3 {
        if b {
            Verdict3::Holds
        } else {
            Verdict3::Fails
        }
    }

    pub fn definite(self) -> Option<bool> {
        match self {
            Verdict3::Holds => Some(true),
            Verdict3::Fails => Some(false),
            Verdict3::Unknown => None,
        }
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(self) -> Verdict3 {
        match self {
            Verdict3::Holds => Verdict3::Fails,
            Verdict3::Fails => Verdict3::Holds,
            Verdict3::Unknown => Verdict3::Unknown,
        }
    }

    pub fn and(self, other: Verdict3) -> Verdict3 {
        match (self, other) {
            (Verdict3::Fails, _) | (_, Verdict3::Fails) => Verdict3::Fails,
            (Verdict3::Holds, Verdict3::Holds) => Verdict3::Holds,
            _ => Verdict3::Unknown,
        }
    }

    pub fn or(self, other: Verdict3) -> Verdict3 {
        self.not().and(other.not()).not()
    }
}

impl fmt::Display for Verdict3 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict3::Holds => "HOLDS",
            Verdict3::Fails => "FAILS",
            Verdict3::Unknown => "UNKNOWN",
        })
    }
}

/// Evaluates `f` at `(h, rt)`, looking at most `horizon` steps past `h`.
///
/// Path quantifiers range over the finite extensions of the current
/// history up to one common deadline, `|h| - 1 + horizon`; nested
/// quantifiers share it. A definite answer holds for every infinite
/// continuation.
pub fn natural_eval_bounded(m: &Model, h: &History, rt: &RecordTuple, f: &Formula, horizon: usize) -> Verdict3 {
    assert!(rt.stops_at(h.len() - 1), "record must stop at the history");
    let mut ev = Evaluator { m, deadline: h.len() - 1 + horizon, memo: HashMap::new(), equiv: HashMap::new() };
    ev.state(f, &h.0, rt)
}

type MemoKey = (usize, Vec<StateId>, RecordTuple);

struct Evaluator<'a> {
    m: &'a Model,
    deadline: usize,
    memo: HashMap<MemoKey, Verdict3>,
    equiv: HashMap<(Vec<StateId>, RecordTuple, AgentId), Vec<History>>,
}

impl Evaluator<'_> {
    fn state(&mut self, f: &Formula, h: &[StateId], rt: &RecordTuple) -> Verdict3 {
        use Formula::*;
        match f {
            True => return Verdict3::Holds,
            False => return Verdict3::Fails,
            Atom(p) => return Verdict3::from_bool(self.m.holds(*h.last().expect("nonempty"), p)),
            Not(a) => return self.state(a, h, rt).not(),
            _ => {}
        }
        let key = (f as *const Formula as usize, h.to_vec(), rt.clone());
        if let Some(v) = self.memo.get(&key) {
            return *v;
        }
        let v = match f {
            And(a, b) => {
                let x = self.state(a, h, rt);
                if x == Verdict3::Fails {
                    x
                } else {
                    x.and(self.state(b, h, rt))
                }
            }
            Or(a, b) => {
                let x = self.state(a, h, rt);
                if x == Verdict3::Holds {
                    x
                } else {
                    x.or(self.state(b, h, rt))
                }
            }
            Implies(a, b) => {
                let x = self.state(a, h, rt).not();
                if x == Verdict3::Holds {
                    x
                } else {
                    x.or(self.state(b, h, rt))
                }
            }
            All(psi) => {
                let n = h.len() - 1;
                let mut acc = Verdict3::Holds;
                for path in self.extensions(h) {
                    acc = acc.and(self.path(psi, &path, n, rt));
                    if acc == Verdict3::Fails {
                        break;
                    }
                }
                acc
            }
            Knows(a, phi) => {
                let ck = (h.to_vec(), rt.clone(), *a);
                let others = match self.equiv.get(&ck) {
                    Some(v) => v.clone(),
                    None => {
                        let v = equiv_histories(self.m, &History(h.to_vec()), rt, *a);
                        self.equiv.insert(ck, v.clone());
                        v
                    }
                };
                let mut acc = Verdict3::Holds;
                for h2 in &others {
                    acc = acc.and(self.state(phi, &h2.0, rt));
                    if acc == Verdict3::Fails {
                        break;
                    }
                }
                acc
            }
            SetObs(a, o, phi) => {
                let rt2 = rt.appended(*a, *o, h.len() - 1);
                self.state(phi, h, &rt2)
            }
            Next(_) | Until(..) | Finally(_) | Globally(_) => {
                unreachable!("temporal operator in history position")
            }
            True | False | Atom(_) | Not(_) => unreachable!(),
        };
        self.memo.insert(key, v);
        v
    }

    /// All extensions of `h` to `deadline + 1` states.
    fn extensions(&self, h: &[StateId]) -> Vec<Vec<StateId>> {
        let mut level = vec![h.to_vec()];
        while level[0].len() <= self.deadline {
            let mut next = Vec::new();
            for p in &level {
                for &t in self.m.successors(*p.last().expect("nonempty")) {
                    let mut q = p.clone();
                    q.push(t);
                    next.push(q);
                }
            }
            level = next;
        }
        level
    }

    fn path(&mut self, f: &Formula, pi: &[StateId], n: usize, rt: &RecordTuple) -> Verdict3 {
        use Formula::*;
        match f {
            Not(a) => self.path(a, pi, n, rt).not(),
            And(a, b) => self.path(a, pi, n, rt).and(self.path(b, pi, n, rt)),
            Or(a, b) => self.path(a, pi, n, rt).or(self.path(b, pi, n, rt)),
            Implies(a, b) => self.path(a, pi, n, rt).not().or(self.path(b, pi, n, rt)),
            Next(a) => {
                if n + 1 > self.deadline {
                    Verdict3::Unknown
                } else {
                    self.path(a, pi, n + 1, rt)
                }
            }
            Until(a, b) => self.until(Some(a), b, pi, n, rt),
            Finally(b) => self.until(None, b, pi, n, rt),
            Globally(a) => {
                let mut v = Verdict3::Unknown;
                for i in (n..=self.deadline).rev() {
                    v = self.path(a, pi, i, rt).and(v);
                }
                v
            }
            _ => self.state(f, &pi[..=n], rt),
        }
    }

    fn until(&mut self, a: Option<&Formula>, b: &Formula, pi: &[StateId], n: usize, rt: &RecordTuple) -> Verdict3 {
        let mut v = Verdict3::Unknown;
        for i in (n..=self.deadline).rev() {
            let hold = match a {
                Some(a) => self.path(a, pi, i, rt),
                None => Verdict3::Holds,
            };
            v = self.path(b, pi, i, rt).or(hold.and(v));
        }
        v
    }
}

/// Every history of exactly `len` states, from any start state.
pub fn all_histories(m: &Model, len: usize) -> Vec<History> {
    if len == 0 {
        return Vec::new();
    }
    let mut level: Vec<Vec<StateId>> = m.state_ids().map(|s| vec![s]).collect();
    for _ in 1..len {
        level = level
            .iter()
            .flat_map(|p| {
                m.successors(*p.last().expect("nonempty")).iter().map(move |&t| {
                    let mut q = p.clone();
                    q.push(t);
                    q
                })
            })
            .collect();
    }
    level.into_iter().map(History).collect()
}

/// Every record tuple that stops at time `last` and has at most
/// `max_changes` entries in total. Entries of one agent come in
/// non-decreasing time order.
pub fn all_records(m: &Model, last: usize, max_changes: usize) -> Vec<RecordTuple> {
    let entries: Vec<(usize, AgentId, ObsId)> = (0..=last)
        .flat_map(|t| m.agent_ids().flat_map(move |a| m.obs_ids().map(move |o| (t, a, o))))
        .collect();
    let mut out = Vec::new();
    fn go(
        entries: &[(usize, AgentId, ObsId)],
        cur: RecordTuple,
        left: usize,
        out: &mut Vec<RecordTuple>,
    ) {
        out.push(cur.clone());
        if left == 0 {
            return;
        }
        for &(t, a, o) in entries {
            let rec = &cur.0[a.index()].0;
            if rec.last().is_some_and(|&(_, t0)| t0 > t) {
                continue;
            }
            go(entries, cur.appended(a, o, t), left - 1, out);
        }
    }
    go(&entries, RecordTuple::empty(m.num_agents()), max_changes, &mut out);
    out.sort();
    out.dedup();
    out
}
