//! Random instances and independent reference evaluators for the
//! integration suites.
#![allow(dead_code)]

use std::collections::BTreeSet;

use dynobs::ctlstar::LabeledStructure;
use dynobs::model::{ModelDef, StateId};
use dynobs::{AgentId, Formula, Model, ObsId};
use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::Rng;

pub struct ModelShape {
    pub states: usize,
    pub observations: usize,
    pub agents: usize,
    pub atoms: usize,
    pub max_branch: usize,
}

impl ModelShape {
    pub fn mono(states: usize, observations: usize) -> ModelShape {
        ModelShape { states, observations, agents: 1, atoms: 2, max_branch: 2 }
    }
}

/// A random left-total model; sizes are upper bounds, at least one of each.
pub fn random_model(rng: &mut StdRng, shape: &ModelShape) -> Model {
    let n = rng.gen_range(1..=shape.states);
    let nobs = rng.gen_range(1..=shape.observations);
    random_model_exact(rng, n, nobs, shape.agents, shape.atoms, shape.max_branch)
}

pub fn random_model_exact(
    rng: &mut StdRng,
    n: usize,
    nobs: usize,
    agents: usize,
    natoms: usize,
    max_branch: usize,
) -> Model {
    let states: Vec<String> = (0..n).map(|i| format!("s{i}")).collect();
    let observations: Vec<String> = (0..nobs).map(|i| format!("o{i}")).collect();
    let agent_names: Vec<String> = (0..agents).map(|i| ["a", "b", "c"][i].to_string()).collect();
    let atoms: Vec<String> = (0..natoms).map(|i| ["p", "q", "r"][i].to_string()).collect();
    let mut transitions = Vec::new();
    for s in &states {
        let k = rng.gen_range(1..=max_branch.min(n));
        let mut targets: Vec<&String> = states.iter().collect();
        targets.shuffle(rng);
        for t in targets.into_iter().take(k) {
            transitions.push((s.clone(), t.clone()));
        }
    }
    let labels = states
        .iter()
        .map(|s| (s.clone(), atoms.iter().filter(|_| rng.gen_bool(0.5)).cloned().collect()))
        .collect();
    let partitions = observations
        .iter()
        .map(|o| {
            let nblocks = rng.gen_range(1..=n);
            let mut blocks = vec![Vec::new(); nblocks];
            for s in &states {
                blocks[rng.gen_range(0..nblocks)].push(s.clone());
            }
            (o.clone(), blocks.into_iter().filter(|b| !b.is_empty()).collect())
        })
        .collect();
    let def = ModelDef {
        initial_state: states[rng.gen_range(0..n)].clone(),
        initial_obs: agent_names.iter().map(|a| (a.clone(), observations[rng.gen_range(0..nobs)].clone())).collect(),
        agents: agent_names,
        observations,
        atoms,
        states,
        labels,
        transitions,
        partitions,
    };
    Model::from_def(&def).expect("generated model is valid")
}

pub struct FormulaShape {
    pub max_size: usize,
    pub max_kdepth: usize,
    pub deltas: bool,
}

/// A random history formula with at most `max_size` nodes.
pub fn random_formula(rng: &mut StdRng, m: &Model, shape: &FormulaShape) -> Formula {
    let size = rng.gen_range(1..=shape.max_size);
    history(rng, m, size, shape.max_kdepth, shape.deltas)
}

fn leaf(rng: &mut StdRng, m: &Model) -> Formula {
    match rng.gen_range(0..10) {
        0 => Formula::True,
        1 => Formula::False,
        _ => Formula::atom(m.atoms()[rng.gen_range(0..m.atoms().len())].clone()),
    }
}

fn history(rng: &mut StdRng, m: &Model, size: usize, kd: usize, deltas: bool) -> Formula {
    if size <= 1 {
        return leaf(rng, m);
    }
    let agent = AgentId::from(rng.gen_range(0..m.num_agents()));
    let obs = ObsId::from(rng.gen_range(0..m.num_observations()));
    loop {
        match rng.gen_range(0..9) {
            0 => return Formula::not(history(rng, m, size - 1, kd, deltas)),
            1 | 2 if size >= 3 => {
                let l = rng.gen_range(1..size - 1);
                let a = history(rng, m, l, kd, deltas);
                let b = history(rng, m, size - 1 - l, kd, deltas);
                return match rng.gen_range(0..3) {
                    0 => Formula::and(a, b),
                    1 => Formula::or(a, b),
                    _ => Formula::implies(a, b),
                };
            }
            3 | 4 => {
                let p = path(rng, m, size - 1, kd, deltas);
                return if rng.gen_bool(0.5) { Formula::all(p) } else { Formula::exists(p) };
            }
            5 | 6 if kd > 0 => return Formula::knows(agent, history(rng, m, size - 1, kd - 1, deltas)),
            7 | 8 if deltas => return Formula::set_obs(agent, obs, history(rng, m, size - 1, kd, deltas)),
            _ => {}
        }
    }
}

fn path(rng: &mut StdRng, m: &Model, size: usize, kd: usize, deltas: bool) -> Formula {
    if size <= 1 {
        return leaf(rng, m);
    }
    match rng.gen_range(0..8) {
        0 => Formula::next(path(rng, m, size - 1, kd, deltas)),
        1 => Formula::finally(path(rng, m, size - 1, kd, deltas)),
        2 => Formula::globally(path(rng, m, size - 1, kd, deltas)),
        3 => Formula::not(path(rng, m, size - 1, kd, deltas)),
        4 | 5 if size >= 3 => {
            let l = rng.gen_range(1..size - 1);
            let a = path(rng, m, l, kd, deltas);
            let b = path(rng, m, size - 1 - l, kd, deltas);
            match rng.gen_range(0..3) {
                0 => Formula::until(a, b),
                1 => Formula::and(a, b),
                _ => Formula::or(a, b),
            }
        }
        _ => history(rng, m, size, kd, deltas),
    }
}

/// A random walk of `len` states from a random start.
pub fn random_history(rng: &mut StdRng, m: &Model, len: usize) -> Vec<StateId> {
    let mut h = vec![StateId::from(rng.gen_range(0..m.num_states()))];
    while h.len() < len {
        let succ = m.successors(*h.last().unwrap());
        h.push(succ[rng.gen_range(0..succ.len())]);
    }
    h
}

// ---------------------------------------------------------------------------
// Word-level LTL reference: direct fixpoint evaluation on lasso positions.

/// Random LTL path formula over `atoms` with at most `size` nodes.
pub fn random_ltl(rng: &mut StdRng, atoms: &[&str], size: usize) -> Formula {
    if size <= 1 {
        return match rng.gen_range(0..8) {
            0 => Formula::True,
            1 => Formula::False,
            _ => Formula::atom(atoms[rng.gen_range(0..atoms.len())]),
        };
    }
    match rng.gen_range(0..9) {
        0 => Formula::not(random_ltl(rng, atoms, size - 1)),
        1 => Formula::next(random_ltl(rng, atoms, size - 1)),
        2 => Formula::finally(random_ltl(rng, atoms, size - 1)),
        3 => Formula::globally(random_ltl(rng, atoms, size - 1)),
        _ if size >= 3 => {
            let l = rng.gen_range(1..size - 1);
            let a = random_ltl(rng, atoms, l);
            let b = random_ltl(rng, atoms, size - 1 - l);
            match rng.gen_range(0..4) {
                0 => Formula::until(a, b),
                1 => Formula::and(a, b),
                2 => Formula::or(a, b),
                _ => Formula::implies(a, b),
            }
        }
        _ => Formula::not(random_ltl(rng, atoms, size - 1)),
    }
}

pub fn random_word(rng: &mut StdRng, atoms: &[&str], len: usize) -> Vec<BTreeSet<String>> {
    (0..len)
        .map(|_| atoms.iter().filter(|_| rng.gen_bool(0.5)).map(|a| a.to_string()).collect())
        .collect()
}

/// Truth of `f` at every position of `prefix · cycle^ω`.
pub fn ltl_eval(f: &Formula, prefix: &[BTreeSet<String>], cycle: &[BTreeSet<String>]) -> Vec<bool> {
    let word: Vec<&BTreeSet<String>> = prefix.iter().chain(cycle).collect();
    let n = word.len();
    let next = |i: usize| if i + 1 < n { i + 1 } else { prefix.len() };
    fn go(f: &Formula, word: &[&BTreeSet<String>], next: &dyn Fn(usize) -> usize) -> Vec<bool> {
        let n = word.len();
        match f {
            Formula::True => vec![true; n],
            Formula::False => vec![false; n],
            Formula::Atom(p) => word.iter().map(|s| s.contains(p)).collect(),
            Formula::Not(a) => go(a, word, next).into_iter().map(|x| !x).collect(),
            Formula::And(a, b) => zip(go(a, word, next), go(b, word, next), |x, y| x && y),
            Formula::Or(a, b) => zip(go(a, word, next), go(b, word, next), |x, y| x || y),
            Formula::Implies(a, b) => zip(go(a, word, next), go(b, word, next), |x, y| !x || y),
            Formula::Next(a) => {
                let v = go(a, word, next);
                (0..n).map(|i| v[next(i)]).collect()
            }
            Formula::Until(a, b) => until(&go(a, word, next), &go(b, word, next), next),
            Formula::Finally(b) => until(&vec![true; n], &go(b, word, next), next),
            Formula::Globally(a) => {
                let na: Vec<bool> = go(a, word, next).into_iter().map(|x| !x).collect();
                until(&vec![true; n], &na, next).into_iter().map(|x| !x).collect()
            }
            _ => panic!("not an LTL formula"),
        }
    }
    fn zip(a: Vec<bool>, b: Vec<bool>, op: fn(bool, bool) -> bool) -> Vec<bool> {
        a.into_iter().zip(b).map(|(x, y)| op(x, y)).collect()
    }
    fn until(a: &[bool], b: &[bool], next: &dyn Fn(usize) -> usize) -> Vec<bool> {
        let mut v = b.to_vec();
        loop {
            let w: Vec<bool> = (0..v.len()).map(|i| b[i] || (a[i] && v[next(i)])).collect();
            if w == v {
                return v;
            }
            v = w;
        }
    }
    go(f, &word, &next)
}

// ---------------------------------------------------------------------------
// CTL reference: textbook fixpoints on explicit graphs.

pub fn random_structure(rng: &mut StdRng, n: usize, atoms: &[&str]) -> LabeledStructure {
    let succ = (0..n)
        .map(|_| {
            let k = rng.gen_range(1..=3.min(n));
            let mut t: Vec<usize> = (0..n).collect();
            t.shuffle(rng);
            t.truncate(k);
            t.sort();
            t
        })
        .collect();
    let mut ls = LabeledStructure::new(succ);
    for a in atoms {
        ls.set_prop(*a, (0..n).map(|_| rng.gen_bool(0.4)).collect());
    }
    ls
}

pub fn ex(ls: &LabeledStructure, a: &[bool]) -> Vec<bool> {
    ls.succ.iter().map(|s| s.iter().any(|&t| a[t])).collect()
}

/// `E (a U b)` as a least fixpoint.
pub fn eu(ls: &LabeledStructure, a: &[bool], b: &[bool]) -> Vec<bool> {
    let mut v = b.to_vec();
    loop {
        let x = ex(ls, &v);
        let w: Vec<bool> = (0..v.len()).map(|i| b[i] || (a[i] && x[i])).collect();
        if w == v {
            return v;
        }
        v = w;
    }
}

/// `E G a` as a greatest fixpoint.
pub fn eg(ls: &LabeledStructure, a: &[bool]) -> Vec<bool> {
    let mut v = a.to_vec();
    loop {
        let x = ex(ls, &v);
        let w: Vec<bool> = (0..v.len()).map(|i| a[i] && x[i]).collect();
        if w == v {
            return v;
        }
        v = w;
    }
}

pub fn not(a: &[bool]) -> Vec<bool> {
    a.iter().map(|x| !x).collect()
}
