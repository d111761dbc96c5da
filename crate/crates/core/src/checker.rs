//! The direct decision procedure.
//!
//! Knowledge depth `k` fixes the epistemic states: information sets for a
//! single agent, k-trees otherwise. The augmented model is built from the
//! initial point, then `K`/`D` subformulas are eliminated innermost first:
//! the argument is labelled by the CTL* checker, the subformula's nodes
//! are marked with a fresh atom, and the atom replaces it. The residual
//! CTL* formula decides the verdict at the initial node.

use std::collections::{BTreeMap, HashMap};
use std::time::Instant;

use serde::Serialize;
use thiserror::Error;

use crate::augment::{budget_from_env, AugmentError, AugmentedModel};
use crate::ctlstar::{label_states, CtlError, LabeledStructure};
use crate::ktree::{self, initial_ktree, EpistemicState, InfoState, KTree, UpdateError};
use crate::logic::{self, delta_pairs, innermost_epistemic, knowledge_depth, Formula, FormulaError};
use crate::model::{AgentId, Model, ObsId, ObsTuple, StateId};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CheckError {
    #[error(transparent)]
    Augment(#[from] AugmentError),
    #[error(transparent)]
    Ctl(#[from] CtlError),
    #[error(transparent)]
    Formula(#[from] FormulaError),
    #[error(transparent)]
    Update(#[from] UpdateError),
    #[error("formula contains an observation change; the static checker accepts only D-free formulas")]
    DeltaInStatic,
    #[error("formula is not a well-formed history formula")]
    IllFormed,
}

impl CheckError {
    pub fn code(&self) -> &'static str {
        match self {
            CheckError::Augment(e) => e.code(),
            CheckError::Ctl(_) => "E_CTL",
            CheckError::Formula(e) => e.code(),
            CheckError::Update(_) => "E_UPDATE",
            CheckError::DeltaInStatic => "E_DELTA_IN_STATIC",
            CheckError::IllFormed => "E_ILL_FORMED",
        }
    }
}

#[derive(Clone, Debug)]
pub struct CheckOptions {
    /// Use k-trees even for a single agent.
    pub force_ktree: bool,
    pub budget: usize,
}

impl Default for CheckOptions {
    fn default() -> Self {
        CheckOptions { force_ktree: false, budget: budget_from_env() }
    }
}

/// The augmented model in either representation.
#[derive(Clone, Debug)]
pub enum Augmented {
    Info(AugmentedModel<InfoState>),
    Tree(AugmentedModel<KTree>),
}

macro_rules! dispatch {
    ($self:expr, $am:ident => $body:expr) => {
        match $self {
            Augmented::Info($am) => $body,
            Augmented::Tree($am) => $body,
        }
    };
}

impl Augmented {
    pub fn len(&self) -> usize {
        dispatch!(self, am => am.len())
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn initial(&self) -> usize {
        dispatch!(self, am => am.initial())
    }

    pub fn level(&self, v: usize) -> usize {
        dispatch!(self, am => am.level(v))
    }

    pub fn level_sizes(&self) -> BTreeMap<usize, usize> {
        dispatch!(self, am => am.level_sizes())
    }

    pub fn num_components(&self) -> usize {
        dispatch!(self, am => am.components().len())
    }

    pub fn num_t_edges(&self) -> usize {
        dispatch!(self, am => am.num_t_edges())
    }

    pub fn t_succ(&self) -> &[Vec<usize>] {
        dispatch!(self, am => am.t_succ())
    }

    pub fn root(&self, v: usize) -> StateId {
        dispatch!(self, am => am.node(v).0.root())
    }

    pub fn obs(&self, v: usize) -> &ObsTuple {
        dispatch!(self, am => &am.node(v).1)
    }

    pub fn links(&self, v: usize, a: AgentId) -> &[usize] {
        dispatch!(self, am => am.links(v, a))
    }

    pub fn delta_target(&self, v: usize, a: AgentId, o: ObsId) -> Option<usize> {
        dispatch!(self, am => am.delta_target(v, a, o))
    }

    pub fn render_node(&self, m: &Model, v: usize) -> String {
        dispatch!(self, am => am.node(v).0.render(m))
    }

    pub fn node_id(&self, m: &Model, v: usize) -> String {
        dispatch!(self, am => am.node_id(m, v))
    }

    pub fn to_dot(&self, m: &Model, extra: &dyn Fn(usize) -> Vec<String>) -> String {
        dispatch!(self, am => am.to_dot(m, extra))
    }

    pub fn engine_name(&self) -> &'static str {
        match self {
            Augmented::Info(_) => "infoset",
            Augmented::Tree(_) => "ktree",
        }
    }

    pub fn as_info(&self) -> Option<&AugmentedModel<InfoState>> {
        match self {
            Augmented::Info(am) => Some(am),
            Augmented::Tree(_) => None,
        }
    }

    pub fn as_tree(&self) -> Option<&AugmentedModel<KTree>> {
        match self {
            Augmented::Tree(am) => Some(am),
            Augmented::Info(_) => None,
        }
    }
}

/// One elimination step.
#[derive(Clone, Debug, Serialize)]
pub struct Elimination {
    /// The eliminated subformula with earlier fresh atoms expanded.
    pub subformula: String,
    /// The subformula as it appeared at this step.
    pub reduced: String,
    /// Fresh atom now standing for the subformula.
    pub atom: String,
    /// Atom holding the labelling of the argument.
    pub argument_atom: String,
    pub knowledge_depth: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct NodeReport {
    pub id: String,
    pub level: usize,
    pub state: String,
    pub obs: String,
    pub labels: Vec<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct Timing {
    pub build_ms: f64,
    pub label_ms: f64,
    pub total_ms: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct Report {
    pub verdict: &'static str,
    pub formula: String,
    pub engine: &'static str,
    pub knowledge_depth: usize,
    pub levels: BTreeMap<String, usize>,
    pub nodes: usize,
    pub components: usize,
    pub t_edges: usize,
    pub passes: usize,
    pub eliminated: Vec<Elimination>,
    pub residual: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub node_labels: Option<Vec<NodeReport>>,
    pub timing: Timing,
}

/// Largest structure whose per-node labels go into a report.
pub const REPORT_NODE_LIMIT: usize = 10_000;

/// Everything produced by one run of the direct procedure.
#[derive(Clone, Debug)]
pub struct CheckRun {
    pub verdict: bool,
    pub formula: Formula,
    pub residual: Formula,
    pub eliminated: Vec<Elimination>,
    pub augmented: Augmented,
    /// The transition graph with every model atom and fresh atom.
    pub labels: LabeledStructure,
    /// Fresh atoms in creation order.
    pub fresh_atoms: Vec<String>,
    pub knowledge_depth: usize,
    pub timing: Timing,
}

impl CheckRun {
    /// Atoms true at node `v`: model atoms in declaration order, then fresh
    /// atoms in creation order.
    pub fn labels_of(&self, m: &Model, v: usize) -> Vec<String> {
        m.atoms()
            .iter()
            .chain(&self.fresh_atoms)
            .filter(|a| self.labels.has(a, v))
            .cloned()
            .collect()
    }

    pub fn has_label(&self, v: usize, atom: &str) -> bool {
        self.labels.has(atom, v)
    }

    /// The elimination row whose expanded subformula prints as `text`.
    pub fn elimination(&self, text: &str) -> Option<&Elimination> {
        self.eliminated.iter().find(|e| e.subformula == text)
    }

    pub fn report(&self, m: &Model, with_nodes: bool) -> Report {
        let node_labels = (with_nodes && self.augmented.len() <= REPORT_NODE_LIMIT).then(|| {
            (0..self.augmented.len())
                .map(|v| NodeReport {
                    id: self.augmented.node_id(m, v),
                    level: self.augmented.level(v),
                    state: self.augmented.render_node(m, v),
                    obs: crate::augment::render_obs(m, self.augmented.obs(v)),
                    labels: self.labels_of(m, v),
                })
                .collect()
        });
        Report {
            verdict: if self.verdict { "HOLDS" } else { "FAILS" },
            formula: self.formula.display(m).to_string(),
            engine: self.augmented.engine_name(),
            knowledge_depth: self.knowledge_depth,
            levels: self.augmented.level_sizes().into_iter().map(|(k, v)| (k.to_string(), v)).collect(),
            nodes: self.augmented.len(),
            components: self.augmented.num_components(),
            t_edges: self.augmented.num_t_edges(),
            passes: self.eliminated.len() + 1,
            eliminated: self.eliminated.clone(),
            residual: self.residual.display(m).to_string(),
            node_labels,
            timing: self.timing.clone(),
        }
    }
}

pub fn check(m: &Model, f: &Formula) -> Result<CheckRun, CheckError> {
    check_with(m, f, &CheckOptions::default())
}

/// Decides `M ⊨ f` at the initial state with an empty record.
pub fn check_with(m: &Model, f: &Formula, opts: &CheckOptions) -> Result<CheckRun, CheckError> {
    let s = m.initial_state();
    check_history(m, &[s], &[], f, opts)
}

/// Like [`check`] for `D`-free formulas.
pub fn check_static(m: &Model, f: &Formula) -> Result<CheckRun, CheckError> {
    if f.has_delta() {
        return Err(CheckError::DeltaInStatic);
    }
    check(m, f)
}

/// Whether the single-agent information-set representation is used.
pub fn uses_infosets(m: &Model, k: usize, opts: &CheckOptions) -> bool {
    m.num_agents() == 1 && k >= 1 && !opts.force_ktree
}

/// Decides `f` at the point reached by `history` under the record given
/// as `(time, agent, obs)` changes.
pub fn check_history(
    m: &Model,
    history: &[StateId],
    changes: &ktree::Changes,
    f: &Formula,
    opts: &CheckOptions,
) -> Result<CheckRun, CheckError> {
    if !logic::is_history_formula(f) {
        return Err(CheckError::IllFormed);
    }
    let started = Instant::now();
    let k = knowledge_depth(f);
    let pairs: Vec<(AgentId, ObsId)> = delta_pairs(f).into_iter().collect();
    let augmented = if uses_infosets(m, k, opts) {
        let (e, ov) = ktree::replay_info(m, history, changes)?;
        Augmented::Info(AugmentedModel::build(m, e, ov, &pairs, opts.budget)?)
    } else {
        let (e, ov) = if history.len() == 1 && changes.is_empty() && history[0] == m.initial_state() {
            (initial_ktree(m, k), m.initial_obs().clone())
        } else {
            ktree::replay_tree(m, history, changes, k)?
        };
        Augmented::Tree(AugmentedModel::build(m, e, ov, &pairs, opts.budget)?)
    };
    let build_ms = started.elapsed().as_secs_f64() * 1e3;
    let label_start = Instant::now();
    let mut run = eliminate(m, f, augmented, k)?;
    run.timing = Timing {
        build_ms,
        label_ms: label_start.elapsed().as_secs_f64() * 1e3,
        total_ms: started.elapsed().as_secs_f64() * 1e3,
    };
    Ok(run)
}

fn fresh_name(prefix: &str, counter: &mut usize, m: &Model, taken: &HashMap<String, Formula>) -> String {
    loop {
        let name = format!("@{prefix}{counter}");
        *counter += 1;
        if !m.has_atom(&name) && !taken.contains_key(&name) {
            return name;
        }
    }
}

fn expand(f: &Formula, meaning: &HashMap<String, Formula>) -> Formula {
    match f {
        Formula::Atom(a) => match meaning.get(a) {
            Some(g) => expand(g, meaning),
            None => f.clone(),
        },
        _ => f.map_children(|c| expand(c, meaning)),
    }
}

fn eliminate(m: &Model, f: &Formula, augmented: Augmented, k: usize) -> Result<CheckRun, CheckError> {
    let n = augmented.len();
    let mut ls = LabeledStructure::new(augmented.t_succ().to_vec());
    for p in m.atoms() {
        let v: Vec<bool> = (0..n).map(|v| m.holds(augmented.root(v), p)).collect();
        ls.set_prop(p.clone(), v);
    }
    let mut meaning: HashMap<String, Formula> = HashMap::new();
    let mut fresh_atoms = Vec::new();
    let mut eliminated = Vec::new();
    let mut counter = 0;
    let mut current = f.clone();

    while let Some(sub) = innermost_epistemic(&current).cloned() {
        let (arg, mark): (&Formula, Box<dyn Fn(usize, &[bool]) -> bool>) = match &sub {
            Formula::Knows(a, arg) => {
                let a = *a;
                let am = &augmented;
                (arg, Box::new(move |v, lab: &[bool]| am.links(v, a).iter().all(|&w| lab[w])))
            }
            Formula::SetObs(a, o, arg) => {
                let (a, o) = (*a, *o);
                let am = &augmented;
                (
                    arg,
                    Box::new(move |v, lab: &[bool]| lab[am.delta_target(v, a, o).expect("jump built for every pair")]),
                )
            }
            _ => unreachable!("innermost_epistemic returns K or D"),
        };
        let lab = label_states(&ls, arg)?;
        let argument_atom = match arg {
            Formula::Atom(a) => a.clone(),
            _ => {
                let name = fresh_name("arg", &mut counter, m, &meaning);
                meaning.insert(name.clone(), arg.clone());
                fresh_atoms.push(name.clone());
                ls.set_prop(name.clone(), lab.clone());
                name
            }
        };
        let marks: Vec<bool> = (0..n).map(|v| mark(v, &lab)).collect();
        drop(mark);
        let atom = fresh_name("sub", &mut counter, m, &meaning);
        let (next, _) = logic::substitute(&current, &sub, &atom)?;
        let full = expand(&sub, &meaning);
        eliminated.push(Elimination {
            subformula: full.display(m).to_string(),
            reduced: sub.display(m).to_string(),
            atom: atom.clone(),
            argument_atom,
            knowledge_depth: knowledge_depth(&full),
        });
        meaning.insert(atom.clone(), sub.clone());
        fresh_atoms.push(atom.clone());
        ls.set_prop(atom, marks);
        current = next;
    }

    let result = label_states(&ls, &current)?;
    let verdict = result[augmented.initial()];
    Ok(CheckRun {
        verdict,
        formula: f.clone(),
        residual: current,
        eliminated,
        augmented,
        labels: ls,
        fresh_atoms,
        knowledge_depth: k,
        timing: Timing { build_ms: 0.0, label_ms: 0.0, total_ms: 0.0 },
    })
}
