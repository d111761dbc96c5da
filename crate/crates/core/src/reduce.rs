//! Compiling observation change away.
//!
//! The reduced model has one copy of every state per observation tuple,
//! jumps between copies of the same state, and a single fixed observation
//! per agent that compares states of one copy by that copy's observation.
//! Formulas are translated relative to the current copy, so that switching
//! observation becomes a step into another copy.

use std::collections::{BTreeMap, HashSet};

use thiserror::Error;

use crate::checker::{check_static, CheckError, CheckRun};
use crate::logic::Formula;
use crate::model::{Model, ModelDef, ModelError, ObsTuple, StateId};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ReduceError {
    #[error("generated name `{0}` collides with an existing identifier")]
    Collision(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Check(#[from] CheckError),
}

impl ReduceError {
    pub fn code(&self) -> &'static str {
        match self {
            ReduceError::Collision(_) => "E_REDUCE_COLLISION",
            ReduceError::Model(e) => e.code(),
            ReduceError::Check(e) => e.code(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct ReducedInstance {
    pub model: Model,
    /// Every observation tuple, in the order copies were laid out.
    pub copies: Vec<ObsTuple>,
    copy_atoms: BTreeMap<ObsTuple, String>,
    states_per_copy: usize,
}

impl ReducedInstance {
    /// The atom true exactly on the copy for `ov`.
    pub fn copy_atom(&self, ov: &ObsTuple) -> &str {
        &self.copy_atoms[ov]
    }

    /// The copy of `s` for `ov`.
    pub fn copy_index(&self, s: StateId, ov: &ObsTuple) -> StateId {
        let c = self.copies.iter().position(|x| x == ov).expect("every tuple has a copy");
        StateId::from(c * self.states_per_copy + s.index())
    }
}

fn all_tuples(m: &Model) -> Vec<ObsTuple> {
    let mut out = vec![Vec::new()];
    for _ in 0..m.num_agents() {
        out = out
            .into_iter()
            .flat_map(|t| {
                m.obs_ids().map(move |o| {
                    let mut t = t.clone();
                    t.push(o);
                    t
                })
            })
            .collect();
    }
    out.into_iter().map(ObsTuple).collect()
}

fn suffix(m: &Model, ov: &ObsTuple) -> String {
    ov.0.iter().map(|o| m.obs_name(*o)).collect::<Vec<_>>().join("@")
}

/// Builds the static-observation model.
pub fn reduce_model(m: &Model) -> Result<ReducedInstance, ReduceError> {
    let copies = all_tuples(m);
    let n = m.num_states();
    let state_name = |s: StateId, ov: &ObsTuple| format!("{}@{}", m.state_name(s), suffix(m, ov));

    let mut states = Vec::with_capacity(n * copies.len());
    for ov in &copies {
        for s in m.state_ids() {
            states.push(state_name(s, ov));
        }
    }
    let mut seen = HashSet::new();
    if let Some(dup) = states.iter().find(|s| !seen.insert(s.as_str())) {
        return Err(ReduceError::Collision(dup.clone()));
    }

    let copy_atoms: BTreeMap<ObsTuple, String> =
        copies.iter().map(|ov| (ov.clone(), format!("@obs_{}", suffix(m, ov)))).collect();
    let mut atoms = m.atoms().to_vec();
    for a in copy_atoms.values() {
        if m.has_atom(a) {
            return Err(ReduceError::Collision(a.clone()));
        }
        atoms.push(a.clone());
    }

    let observations: Vec<String> = m.agents().iter().map(|a| format!("@by_{a}")).collect();

    let mut labels = Vec::new();
    let mut transitions = Vec::new();
    for ov in &copies {
        for s in m.state_ids() {
            let name = state_name(s, ov);
            let mut l: Vec<String> = m.valuation(s).map(str::to_string).collect();
            l.push(copy_atoms[ov].clone());
            labels.push((name.clone(), l));
            for &t in m.successors(s) {
                transitions.push((name.clone(), state_name(t, ov)));
            }
            for other in copies.iter().filter(|o| *o != ov) {
                transitions.push((name.clone(), state_name(s, other)));
            }
        }
    }

    let partitions = m
        .agent_ids()
        .map(|a| {
            let blocks = copies
                .iter()
                .flat_map(|ov| {
                    m.partition(ov.get(a))
                        .iter()
                        .filter(|b| b.len() > 1)
                        .map(|b| b.iter().map(|&s| state_name(s, ov)).collect::<Vec<_>>())
                        .collect::<Vec<_>>()
                })
                .collect();
            (observations[a.index()].clone(), blocks)
        })
        .collect();

    let def = ModelDef {
        agents: m.agents().to_vec(),
        observations: observations.clone(),
        atoms,
        states,
        initial_state: state_name(m.initial_state(), m.initial_obs()),
        initial_obs: m.agents().iter().cloned().zip(observations).collect(),
        labels,
        transitions,
        partitions,
    };
    Ok(ReducedInstance { model: Model::from_def(&def)?, copies, copy_atoms, states_per_copy: n })
}

/// `tr_ov(f)`: the `D`-free formula for the reduced model, relative to copy `ov`.
pub fn translate(f: &Formula, ov: &ObsTuple, ri: &ReducedInstance) -> Formula {
    match f {
        Formula::SetObs(a, o, phi) => {
            if ov.get(*a) == *o {
                translate(phi, ov, ri)
            } else {
                let target = ov.with(*a, *o);
                Formula::all(Formula::next(Formula::implies(
                    Formula::atom(ri.copy_atom(&target)),
                    translate(phi, &target, ri),
                )))
            }
        }
        Formula::All(psi) => Formula::all(Formula::implies(
            Formula::globally(Formula::atom(ri.copy_atom(ov))),
            translate(psi, ov, ri),
        )),
        _ => f.map_children(|c| translate(c, ov, ri)),
    }
}

/// The reduced instance for `(m, f)`: model and translated formula.
pub fn reduce(m: &Model, f: &Formula) -> Result<(ReducedInstance, Formula), ReduceError> {
    let ri = reduce_model(m)?;
    let g = translate(f, m.initial_obs(), &ri);
    Ok((ri, g))
}

/// Decides `M ⊨ f` by checking the translated formula on the reduced model.
pub fn check_via_reduction(m: &Model, f: &Formula) -> Result<bool, ReduceError> {
    Ok(check_via_reduction_run(m, f)?.1.verdict)
}

pub fn check_via_reduction_run(m: &Model, f: &Formula) -> Result<(ReducedInstance, CheckRun), ReduceError> {
    let (ri, g) = reduce(m, f)?;
    let run = check_static(&ri.model, &g)?;
    Ok((ri, run))
}
