//! Multi-agent Kripke structures with observation relations.
//!
//! A [`Model`] is always valid: it can only be obtained through
//! [`Model::from_def`] or [`parse_model`], both of which reject anything
//! that [`validate`] flags. Observation relations are given as partition
//! blocks; states missing from every block of an observation are
//! singleton classes.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt::{self, Write as _};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lexer::{self, Pos, Spanned, Tok};

macro_rules! id_type {
    ($(#[$m:meta])* $name:ident) => {
        $(#[$m])*
        #[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        pub struct $name(pub u32);

        impl $name {
            pub fn index(self) -> usize {
                self.0 as usize
            }
        }

        impl From<usize> for $name {
            fn from(i: usize) -> Self {
                $name(i as u32)
            }
        }
    };
}

id_type!(
    /// Index of a state in [`Model::states`].
    StateId
);
id_type!(
    /// Index of an observation in [`Model::observations`].
    ObsId
);
id_type!(
    /// Index of an agent in [`Model::agents`].
    AgentId
);

/// One observation per agent, indexed by [`AgentId`].
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ObsTuple(pub Vec<ObsId>);

impl ObsTuple {
    pub fn get(&self, agent: AgentId) -> ObsId {
        self.0[agent.index()]
    }

    /// The tuple with `agent`'s coordinate replaced by `obs`.
    pub fn with(&self, agent: AgentId, obs: ObsId) -> ObsTuple {
        let mut v = self.0.clone();
        v[agent.index()] = obs;
        ObsTuple(v)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Unvalidated, name-based description of a model.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelDef {
    pub agents: Vec<String>,
    pub observations: Vec<String>,
    pub atoms: Vec<String>,
    pub states: Vec<String>,
    pub initial_state: String,
    /// `(agent, observation)` pairs.
    pub initial_obs: Vec<(String, String)>,
    /// `(state, atoms)` pairs; a state may appear several times.
    pub labels: Vec<(String, Vec<String>)>,
    pub transitions: Vec<(String, String)>,
    /// `(observation, blocks)`.
    pub partitions: Vec<(String, Vec<Vec<String>>)>,
}

/// A single invariant violation found by [`validate`].
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub code: &'static str,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.code, self.message)
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ModelError {
    #[error("{pos}: syntax error: {message}")]
    Syntax { pos: Pos, message: String },
    #[error("{pos}: duplicate {kind} `{name}`")]
    Duplicate { pos: Pos, kind: &'static str, name: String },
    #[error("{pos}: unknown {kind} `{name}`")]
    Unknown { pos: Pos, kind: &'static str, name: String },
    #[error("{pos}: state `{state}` appears in two blocks of observation `{obs}`")]
    OverlappingBlocks { pos: Pos, obs: String, state: String },
    #[error("invalid model: {}", join_violations(.0))]
    Invalid(Vec<Violation>),
    #[error("unknown {kind} `{name}`")]
    Lookup { kind: &'static str, name: String },
}

fn join_violations(v: &[Violation]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join("; ")
}

impl ModelError {
    /// Stable machine-readable code.
    pub fn code(&self) -> &'static str {
        match self {
            ModelError::Syntax { .. } => "E_MODEL_SYNTAX",
            ModelError::Duplicate { .. } => "E_MODEL_DUPLICATE",
            ModelError::Unknown { .. } => "E_MODEL_UNKNOWN",
            ModelError::OverlappingBlocks { .. } => "E_MODEL_OVERLAP",
            ModelError::Invalid(v) => v.first().map(|x| x.code).unwrap_or("E_MODEL_INVALID"),
            ModelError::Lookup { .. } => "E_MODEL_LOOKUP",
        }
    }
}

/// Returns every invariant violation of `def`; empty iff the model is valid.
fn symbol_table<'a>(
    names: &'a [String],
    kind: &'static str,
    push: &mut dyn FnMut(&'static str, String),
) -> HashSet<&'a str> {
    let mut seen = HashSet::new();
    for n in names {
        if !lexer::is_identifier(n) {
            push("V_BAD_IDENT", format!("{kind} name `{n}` is not an identifier"));
        }
        if !seen.insert(n.as_str()) {
            push("V_DUPLICATE", format!("duplicate {kind} `{n}`"));
        }
    }
    seen
}

pub fn validate(def: &ModelDef) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut push = |code: &'static str, message: String| out.push(Violation { code, message });

    let agents = symbol_table(&def.agents, "agent", &mut push);
    let observations = symbol_table(&def.observations, "observation", &mut push);
    let atoms = symbol_table(&def.atoms, "atom", &mut push);
    let states = symbol_table(&def.states, "state", &mut push);

    if def.agents.is_empty() {
        push("V_NO_AGENTS", "at least one agent is required".into());
    }
    if def.observations.is_empty() {
        push("V_NO_OBSERVATIONS", "at least one observation is required".into());
    }
    if def.states.is_empty() {
        push("V_NO_STATES", "at least one state is required".into());
    }
    if !states.contains(def.initial_state.as_str()) {
        push("V_BAD_INIT", format!("initial state `{}` is not declared", def.initial_state));
    }

    let mut assigned = HashSet::new();
    for (agent, obs) in &def.initial_obs {
        if !agents.contains(agent.as_str()) {
            push("V_UNKNOWN_AGENT", format!("initial observation for undeclared agent `{agent}`"));
        }
        if !observations.contains(obs.as_str()) {
            push("V_UNKNOWN_OBS", format!("initial observation `{obs}` of agent `{agent}` is not declared"));
        }
        if !assigned.insert(agent.as_str()) {
            push("V_DUPLICATE", format!("agent `{agent}` has two initial observations"));
        }
    }
    for agent in &def.agents {
        if !assigned.contains(agent.as_str()) {
            push("V_MISSING_INITOBS", format!("agent `{agent}` has no initial observation"));
        }
    }

    for (state, labs) in &def.labels {
        if !states.contains(state.as_str()) {
            push("V_UNKNOWN_STATE", format!("label on undeclared state `{state}`"));
        }
        for a in labs {
            if !atoms.contains(a.as_str()) {
                push("V_UNKNOWN_ATOM", format!("undeclared atom `{a}` on state `{state}`"));
            }
        }
    }

    let mut has_succ = HashSet::new();
    for (from, to) in &def.transitions {
        for s in [from, to] {
            if !states.contains(s.as_str()) {
                push("V_UNKNOWN_STATE", format!("transition mentions undeclared state `{s}`"));
            }
        }
        has_succ.insert(from.as_str());
    }
    for s in &def.states {
        if !has_succ.contains(s.as_str()) {
            push("V_NOT_LEFT_TOTAL", format!("not left-total: state `{s}` has no successor"));
        }
    }

    let mut seen_obs = HashSet::new();
    for (obs, blocks) in &def.partitions {
        if !observations.contains(obs.as_str()) {
            push("V_UNKNOWN_OBS", format!("partition for undeclared observation `{obs}`"));
        }
        if !seen_obs.insert(obs.as_str()) {
            push("V_DUPLICATE", format!("observation `{obs}` has two partition sections"));
        }
        let mut covered = HashSet::new();
        for block in blocks {
            for s in block {
                if !states.contains(s.as_str()) {
                    push("V_UNKNOWN_STATE", format!("observation `{obs}` mentions undeclared state `{s}`"));
                }
                if !covered.insert(s.as_str()) {
                    push("V_NOT_PARTITION", format!("state `{s}` is in two blocks of observation `{obs}`"));
                }
            }
        }
    }
    out
}

/// A validated, immutable model.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Model {
    agents: Vec<String>,
    observations: Vec<String>,
    atoms: Vec<String>,
    states: Vec<String>,
    succ: Vec<Vec<StateId>>,
    labels: Vec<BTreeSet<usize>>,
    /// `class_of[obs][state]` = block number.
    class_of: Vec<Vec<u32>>,
    /// `blocks[obs][block]` = sorted members.
    blocks: Vec<Vec<Vec<StateId>>>,
    initial_state: StateId,
    initial_obs: ObsTuple,
    atom_index: HashMap<String, usize>,
}

fn index_of(names: &[String]) -> HashMap<&str, usize> {
    names.iter().enumerate().map(|(i, n)| (n.as_str(), i)).collect()
}

impl Model {
    /// Builds a model, rejecting any definition with violations.
    pub fn from_def(def: &ModelDef) -> Result<Model, ModelError> {
        let violations = validate(def);
        if !violations.is_empty() {
            return Err(ModelError::Invalid(violations));
        }
        let agent_ix = index_of(&def.agents);
        let obs_ix = index_of(&def.observations);
        let atom_ix = index_of(&def.atoms);
        let state_ix = index_of(&def.states);
        let n = def.states.len();

        let mut succ: Vec<BTreeSet<StateId>> = vec![BTreeSet::new(); n];
        for (from, to) in &def.transitions {
            succ[state_ix[from.as_str()]].insert(StateId::from(state_ix[to.as_str()]));
        }
        let mut labels = vec![BTreeSet::new(); n];
        for (s, labs) in &def.labels {
            for a in labs {
                labels[state_ix[s.as_str()]].insert(atom_ix[a.as_str()]);
            }
        }

        let mut class_of = Vec::with_capacity(def.observations.len());
        let mut blocks = Vec::with_capacity(def.observations.len());
        for obs in &def.observations {
            let mut cls = vec![u32::MAX; n];
            let mut bl: Vec<Vec<StateId>> = Vec::new();
            if let Some((_, given)) = def.partitions.iter().find(|(o, _)| o == obs) {
                for block in given.iter().filter(|b| !b.is_empty()) {
                    let mut members: Vec<StateId> =
                        block.iter().map(|s| StateId::from(state_ix[s.as_str()])).collect();
                    members.sort();
                    for m in &members {
                        cls[m.index()] = bl.len() as u32;
                    }
                    bl.push(members);
                }
            }
            for (s, c) in cls.iter().enumerate() {
                if *c == u32::MAX {
                    bl.push(vec![StateId::from(s)]);
                }
            }
            // Blocks are ordered by least member, independent of input order.
            bl.sort();
            for (i, block) in bl.iter().enumerate() {
                for m in block {
                    cls[m.index()] = i as u32;
                }
            }
            class_of.push(cls);
            blocks.push(bl);
        }

        let mut initial_obs = vec![ObsId(0); def.agents.len()];
        for (a, o) in &def.initial_obs {
            initial_obs[agent_ix[a.as_str()]] = ObsId::from(obs_ix[o.as_str()]);
        }

        Ok(Model {
            agents: def.agents.clone(),
            observations: def.observations.clone(),
            atoms: def.atoms.clone(),
            states: def.states.clone(),
            succ: succ.into_iter().map(|s| s.into_iter().collect()).collect(),
            labels,
            class_of,
            blocks,
            initial_state: StateId::from(state_ix[def.initial_state.as_str()]),
            initial_obs: ObsTuple(initial_obs),
            atom_index: def.atoms.iter().enumerate().map(|(i, a)| (a.clone(), i)).collect(),
        })
    }

    /// Name-based description; `Model::from_def(&m.to_def()) == Ok(m)`.
    pub fn to_def(&self) -> ModelDef {
        let name = |s: &StateId| self.states[s.index()].clone();
        ModelDef {
            agents: self.agents.clone(),
            observations: self.observations.clone(),
            atoms: self.atoms.clone(),
            states: self.states.clone(),
            initial_state: name(&self.initial_state),
            initial_obs: self
                .agents
                .iter()
                .zip(&self.initial_obs.0)
                .map(|(a, o)| (a.clone(), self.observations[o.index()].clone()))
                .collect(),
            labels: self
                .labels
                .iter()
                .enumerate()
                .filter(|(_, l)| !l.is_empty())
                .map(|(s, l)| (self.states[s].clone(), l.iter().map(|a| self.atoms[*a].clone()).collect()))
                .collect(),
            transitions: self
                .succ
                .iter()
                .enumerate()
                .flat_map(|(s, succ)| succ.iter().map(move |t| (s, *t)))
                .map(|(s, t)| (self.states[s].clone(), name(&t)))
                .collect(),
            partitions: self
                .observations
                .iter()
                .enumerate()
                .map(|(o, obs)| {
                    let blocks = self.blocks[o]
                        .iter()
                        .filter(|b| b.len() > 1)
                        .map(|b| b.iter().map(name).collect())
                        .collect();
                    (obs.clone(), blocks)
                })
                .collect(),
        }
    }

    pub fn agents(&self) -> &[String] {
        &self.agents
    }

    pub fn observations(&self) -> &[String] {
        &self.observations
    }

    pub fn atoms(&self) -> &[String] {
        &self.atoms
    }

    pub fn states(&self) -> &[String] {
        &self.states
    }

    pub fn num_states(&self) -> usize {
        self.states.len()
    }

    pub fn num_agents(&self) -> usize {
        self.agents.len()
    }

    pub fn num_observations(&self) -> usize {
        self.observations.len()
    }

    pub fn state_ids(&self) -> impl Iterator<Item = StateId> + '_ {
        (0..self.states.len()).map(StateId::from)
    }

    pub fn agent_ids(&self) -> impl Iterator<Item = AgentId> + '_ {
        (0..self.agents.len()).map(AgentId::from)
    }

    pub fn obs_ids(&self) -> impl Iterator<Item = ObsId> + '_ {
        (0..self.observations.len()).map(ObsId::from)
    }

    pub fn initial_state(&self) -> StateId {
        self.initial_state
    }

    pub fn initial_obs(&self) -> &ObsTuple {
        &self.initial_obs
    }

    pub fn state_name(&self, s: StateId) -> &str {
        &self.states[s.index()]
    }

    pub fn obs_name(&self, o: ObsId) -> &str {
        &self.observations[o.index()]
    }

    pub fn agent_name(&self, a: AgentId) -> &str {
        &self.agents[a.index()]
    }

    fn lookup(names: &[String], kind: &'static str, name: &str) -> Result<u32, ModelError> {
        names
            .iter()
            .position(|n| n == name)
            .map(|i| i as u32)
            .ok_or_else(|| ModelError::Lookup { kind, name: name.to_string() })
    }

    pub fn state_by_name(&self, name: &str) -> Result<StateId, ModelError> {
        Self::lookup(&self.states, "state", name).map(StateId)
    }

    pub fn obs_by_name(&self, name: &str) -> Result<ObsId, ModelError> {
        Self::lookup(&self.observations, "observation", name).map(ObsId)
    }

    pub fn agent_by_name(&self, name: &str) -> Result<AgentId, ModelError> {
        Self::lookup(&self.agents, "agent", name).map(AgentId)
    }

    pub fn has_atom(&self, name: &str) -> bool {
        self.atom_index.contains_key(name)
    }

    /// Whether atom `name` holds in `s`; undeclared atoms never hold.
    pub fn holds(&self, s: StateId, name: &str) -> bool {
        self.atom_index.get(name).is_some_and(|i| self.labels[s.index()].contains(i))
    }

    /// Atoms true in `s`, in declaration order.
    pub fn valuation(&self, s: StateId) -> impl Iterator<Item = &str> + '_ {
        self.labels[s.index()].iter().map(|i| self.atoms[*i].as_str())
    }

    /// Sorted successor list; never empty.
    pub fn successors(&self, s: StateId) -> &[StateId] {
        &self.succ[s.index()]
    }

    /// `T(I)`: the union of the successors of every member of `set`.
    pub fn successors_of_set<'a>(&self, set: impl IntoIterator<Item = &'a StateId>) -> BTreeSet<StateId> {
        set.into_iter().flat_map(|s| self.succ[s.index()].iter().copied()).collect()
    }

    pub fn has_transition(&self, from: StateId, to: StateId) -> bool {
        self.succ[from.index()].binary_search(&to).is_ok()
    }

    pub fn num_transitions(&self) -> usize {
        self.succ.iter().map(Vec::len).sum()
    }

    /// `s ∼_o t`.
    pub fn equiv(&self, o: ObsId, s: StateId, t: StateId) -> bool {
        let cls = &self.class_of[o.index()];
        cls[s.index()] == cls[t.index()]
    }

    /// `[s]_o`, sorted.
    pub fn eq_class(&self, o: ObsId, s: StateId) -> &[StateId] {
        let c = self.class_of[o.index()][s.index()];
        &self.blocks[o.index()][c as usize]
    }

    /// Block number of `s` under `o`; equal numbers iff equivalent.
    pub fn class_index(&self, o: ObsId, s: StateId) -> u32 {
        self.class_of[o.index()][s.index()]
    }

    /// All blocks of `o`, including singletons.
    pub fn partition(&self, o: ObsId) -> &[Vec<StateId>] {
        &self.blocks[o.index()]
    }

    /// The unique agent, if there is exactly one.
    pub fn sole_agent(&self) -> Option<AgentId> {
        (self.agents.len() == 1).then_some(AgentId(0))
    }

    /// Serializes into the model-file grammar accepted by [`parse_model`].
    pub fn to_text(&self) -> String {
        write_model_text(&self.to_def())
    }
}

impl fmt::Display for Model {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_text())
    }
}

/// Renders a definition in the model-file grammar.
pub fn write_model_text(def: &ModelDef) -> String {
    let mut out = String::new();
    let list = |xs: &[String]| xs.join(" ");
    let _ = writeln!(out, "agents: {} ;", list(&def.agents));
    let _ = writeln!(out, "observations: {} ;", list(&def.observations));
    let _ = writeln!(out, "atoms: {} ;", list(&def.atoms));
    let _ = writeln!(out, "states: {} ;", list(&def.states));
    let _ = writeln!(out, "init: {} ;", def.initial_state);
    let pairs: Vec<String> = def.initial_obs.iter().map(|(a, o)| format!("{a} = {o}")).collect();
    let _ = writeln!(out, "initobs: {} ;", pairs.join("  "));
    for (s, labs) in &def.labels {
        let _ = writeln!(out, "label {s} : {} ;", list(labs));
    }
    let trans: Vec<String> = def.transitions.iter().map(|(a, b)| format!("{a} -> {b}")).collect();
    let _ = writeln!(out, "trans: {} ;", trans.join("  "));
    for (o, blocks) in &def.partitions {
        let bl: Vec<String> = blocks.iter().map(|b| format!("{{ {} }}", list(b))).collect();
        let _ = writeln!(out, "obs {o} : {} ;", bl.join(" "));
    }
    out
}

/// Parses and validates a model file.
pub fn parse_model(text: &str) -> Result<Model, ModelError> {
    Model::from_def(&parse_model_def(text)?)
}

/// Parses a model file without the semantic checks of [`validate`]
/// (left-totality, missing initial observations). Lexical, duplicate and
/// unknown-identifier errors are still reported with their position.
pub fn parse_model_def(text: &str) -> Result<ModelDef, ModelError> {
    let toks = lexer::tokenize(text).map_err(|(pos, message)| ModelError::Syntax { pos, message })?;
    let end = toks.last().map(|t| Pos { line: t.pos.line, col: t.pos.col + 1 }).unwrap_or(Pos { line: 1, col: 1 });
    ModelParser { toks, at: 0, end, def: ModelDef::default(), declared: Declared::default() }.run()
}

#[derive(Default)]
struct Declared {
    agents: bool,
    agent_set: HashSet<String>,
    obs: HashSet<String>,
    atoms: HashSet<String>,
    states: HashSet<String>,
    init: bool,
    initobs: bool,
}

struct ModelParser {
    toks: Vec<Spanned>,
    at: usize,
    end: Pos,
    def: ModelDef,
    declared: Declared,
}

impl ModelParser {
    fn peek(&self) -> Option<&Spanned> {
        self.toks.get(self.at)
    }

    fn pos(&self) -> Pos {
        self.peek().map(|t| t.pos).unwrap_or(self.end)
    }

    fn syntax<T>(&self, message: impl Into<String>) -> Result<T, ModelError> {
        Err(ModelError::Syntax { pos: self.pos(), message: message.into() })
    }

    fn expect(&mut self, tok: Tok) -> Result<(), ModelError> {
        match self.peek() {
            Some(t) if t.tok == tok => {
                self.at += 1;
                Ok(())
            }
            Some(t) => {
                let msg = format!("expected {tok}, found {}", t.tok);
                self.syntax(msg)
            }
            None => self.syntax(format!("expected {tok}, found end of input")),
        }
    }

    fn ident(&mut self) -> Result<(String, Pos), ModelError> {
        match self.peek() {
            Some(Spanned { tok: Tok::Ident(s), pos }) => {
                let r = (s.clone(), *pos);
                self.at += 1;
                Ok(r)
            }
            Some(t) => {
                let msg = format!("expected identifier, found {}", t.tok);
                self.syntax(msg)
            }
            None => self.syntax("expected identifier, found end of input"),
        }
    }

    fn at_semi(&self) -> bool {
        matches!(self.peek(), Some(t) if t.tok == Tok::Semi)
    }

    /// Identifiers up to the closing `;`.
    fn ident_list(&mut self) -> Result<Vec<(String, Pos)>, ModelError> {
        let mut out = Vec::new();
        while !self.at_semi() {
            out.push(self.ident()?);
        }
        self.expect(Tok::Semi)?;
        Ok(out)
    }

    fn declare(
        &mut self,
        kind: &'static str,
        items: Vec<(String, Pos)>,
    ) -> Result<Vec<String>, ModelError> {
        let set = match kind {
            "agent" => &mut self.declared.agent_set,
            "observation" => &mut self.declared.obs,
            "atom" => &mut self.declared.atoms,
            _ => &mut self.declared.states,
        };
        let mut names = Vec::new();
        for (name, pos) in items {
            if !set.insert(name.clone()) {
                return Err(ModelError::Duplicate { pos, kind, name });
            }
            names.push(name);
        }
        Ok(names)
    }

    fn known(&self, kind: &'static str, name: &str, pos: Pos) -> Result<(), ModelError> {
        let set = match kind {
            "agent" => &self.declared.agent_set,
            "observation" => &self.declared.obs,
            "atom" => &self.declared.atoms,
            _ => &self.declared.states,
        };
        if set.contains(name) {
            Ok(())
        } else {
            Err(ModelError::Unknown { pos, kind, name: name.to_string() })
        }
    }

    fn run(mut self) -> Result<ModelDef, ModelError> {
        while let Some(t) = self.peek() {
            let pos = t.pos;
            let (keyword, _) = self.ident()?;
            match keyword.as_str() {
                "agents" => {
                    self.section_once(self.declared.agents, pos, "agents")?;
                    self.expect(Tok::Colon)?;
                    let items = self.ident_list()?;
                    self.def.agents = self.declare("agent", items)?;
                    self.declared.agents = true;
                }
                "observations" => {
                    self.section_once(!self.def.observations.is_empty(), pos, "observations")?;
                    self.expect(Tok::Colon)?;
                    let items = self.ident_list()?;
                    self.def.observations = self.declare("observation", items)?;
                }
                "atoms" => {
                    self.section_once(!self.def.atoms.is_empty(), pos, "atoms")?;
                    self.expect(Tok::Colon)?;
                    let items = self.ident_list()?;
                    self.def.atoms = self.declare("atom", items)?;
                }
                "states" => {
                    self.section_once(!self.def.states.is_empty(), pos, "states")?;
                    self.expect(Tok::Colon)?;
                    let items = self.ident_list()?;
                    self.def.states = self.declare("state", items)?;
                }
                "init" => {
                    self.section_once(self.declared.init, pos, "init")?;
                    self.expect(Tok::Colon)?;
                    let (s, spos) = self.ident()?;
                    self.known("state", &s, spos)?;
                    self.expect(Tok::Semi)?;
                    self.def.initial_state = s;
                    self.declared.init = true;
                }
                "initobs" => {
                    self.section_once(self.declared.initobs, pos, "initobs")?;
                    self.expect(Tok::Colon)?;
                    self.initobs()?;
                    self.declared.initobs = true;
                }
                "label" => {
                    let (s, spos) = self.ident()?;
                    self.known("state", &s, spos)?;
                    self.expect(Tok::Colon)?;
                    let mut atoms = Vec::new();
                    for (a, apos) in self.ident_list()? {
                        self.known("atom", &a, apos)?;
                        atoms.push(a);
                    }
                    self.def.labels.push((s, atoms));
                }
                "trans" => {
                    self.expect(Tok::Colon)?;
                    while !self.at_semi() {
                        let (a, apos) = self.ident()?;
                        self.known("state", &a, apos)?;
                        self.expect(Tok::Arrow)?;
                        let (b, bpos) = self.ident()?;
                        self.known("state", &b, bpos)?;
                        self.def.transitions.push((a, b));
                    }
                    self.expect(Tok::Semi)?;
                }
                "obs" => {
                    let (o, opos) = self.ident()?;
                    self.known("observation", &o, opos)?;
                    if self.def.partitions.iter().any(|(x, _)| *x == o) {
                        return Err(ModelError::Duplicate { pos: opos, kind: "partition section", name: o });
                    }
                    self.expect(Tok::Colon)?;
                    let mut blocks = Vec::new();
                    let mut seen = HashSet::new();
                    while !self.at_semi() {
                        self.expect(Tok::LBrace)?;
                        let mut block = Vec::new();
                        while !matches!(self.peek(), Some(t) if t.tok == Tok::RBrace) {
                            let (s, spos) = self.ident()?;
                            self.known("state", &s, spos)?;
                            if !seen.insert(s.clone()) {
                                return Err(ModelError::OverlappingBlocks { pos: spos, obs: o, state: s });
                            }
                            block.push(s);
                        }
                        self.expect(Tok::RBrace)?;
                        blocks.push(block);
                    }
                    self.expect(Tok::Semi)?;
                    self.def.partitions.push((o, blocks));
                }
                other => {
                    return Err(ModelError::Syntax { pos, message: format!("unknown section `{other}`") });
                }
            }
        }
        if !self.declared.agents {
            self.def.agents = vec!["a".to_string()];
            if let Some(pair) = self.def.initial_obs.first_mut() {
                pair.0 = "a".to_string();
            }
        }
        Ok(self.def)
    }

    fn section_once(&self, already: bool, pos: Pos, name: &'static str) -> Result<(), ModelError> {
        if already {
            Err(ModelError::Duplicate { pos, kind: "section", name: name.to_string() })
        } else {
            Ok(())
        }
    }

    fn initobs(&mut self) -> Result<(), ModelError> {
        // Mono shorthand: `initobs: o1 ;`
        let is_pair = matches!(self.toks.get(self.at + 1), Some(t) if t.tok == Tok::Eq);
        if !is_pair {
            let (o, opos) = self.ident()?;
            self.known("observation", &o, opos)?;
            self.expect(Tok::Semi)?;
            let agent = match self.def.agents.as_slice() {
                [] if !self.declared.agents => "a".to_string(),
                [only] => only.clone(),
                _ => {
                    return Err(ModelError::Syntax {
                        pos: opos,
                        message: "`initobs: <obs> ;` is only allowed with a single agent".into(),
                    })
                }
            };
            self.def.initial_obs.push((agent, o));
            return Ok(());
        }
        if !self.declared.agents {
            return self.syntax("`initobs` with agent assignments requires a preceding `agents:` section");
        }
        while !self.at_semi() {
            let (a, apos) = self.ident()?;
            self.known("agent", &a, apos)?;
            self.expect(Tok::Eq)?;
            let (o, opos) = self.ident()?;
            self.known("observation", &o, opos)?;
            if self.def.initial_obs.iter().any(|(x, _)| *x == a) {
                return Err(ModelError::Duplicate { pos: apos, kind: "initial observation for agent", name: a });
            }
            self.def.initial_obs.push((a, o));
        }
        self.expect(Tok::Semi)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    fn ids(m: &Model, names: &[&str]) -> Vec<StateId> {
        names.iter().map(|n| m.state_by_name(n).unwrap()).collect()
    }

    #[test]
    fn fig2_shape() {
        let m = parse_model(fixtures::FIG2).unwrap();
        assert_eq!(m.num_states(), 2);
        assert_eq!(m.num_transitions(), 3);
        let s1 = m.state_by_name("s1").unwrap();
        assert_eq!(m.successors(s1), ids(&m, &["s1", "s2"]).as_slice());
        let o2 = m.obs_by_name("o2").unwrap();
        assert_eq!(m.eq_class(o2, s1), &[s1]);
    }

    #[test]
    fn fig1_shape_and_classes() {
        let m = parse_model(fixtures::FIG1).unwrap();
        assert_eq!(m.num_states(), 7);
        assert_eq!(m.num_transitions(), 9);
        let o1 = m.obs_by_name("o1").unwrap();
        let s5 = m.state_by_name("s5").unwrap();
        assert_eq!(m.eq_class(o1, s5), ids(&m, &["s4", "s5", "s6"]).as_slice());
        let s4 = m.state_by_name("s4").unwrap();
        assert_eq!(m.successors(s4), &[s4]);
        let lifted = m.successors_of_set(&ids(&m, &["s1", "s2"]));
        assert_eq!(lifted, ids(&m, &["s4", "s5"]).into_iter().collect());
        assert!(validate(&m.to_def()).is_empty());
    }

    #[test]
    fn not_left_total() {
        let err = parse_model("observations: o ; states: a b ; init: a ; initobs: o ; trans: a -> b ;").unwrap_err();
        assert_eq!(err.code(), "V_NOT_LEFT_TOTAL");
        assert!(err.to_string().contains("not left-total"));
    }

    #[test]
    fn omitted_states_are_singletons() {
        let text = "observations: o1 ; states: s1 s2 s3 ; init: s1 ; initobs: o1 ;\
                    trans: s1 -> s2 s2 -> s3 s3 -> s1 ; obs o1 : { s1 s2 } ;";
        let def = parse_model_def(text).unwrap();
        assert!(validate(&def).is_empty());
        let m = Model::from_def(&def).unwrap();
        let o1 = ObsId(0);
        let s3 = m.state_by_name("s3").unwrap();
        assert_eq!(m.eq_class(o1, s3), &[s3]);
    }

    #[test]
    fn dangling_initial_observation() {
        let mut def = parse_model_def(fixtures::FIG1).unwrap();
        def.initial_obs = vec![("a".into(), "o9".into())];
        let v = validate(&def);
        assert_eq!(v.len(), 1, "{v:?}");
        assert_eq!(v[0].code, "V_UNKNOWN_OBS");
    }

    #[test]
    fn parse_errors_carry_positions() {
        let e = parse_model("states: a a ;").unwrap_err();
        assert!(matches!(e, ModelError::Duplicate { pos: Pos { line: 1, col: 11 }, .. }), "{e:?}");
        let e = parse_model("states: a ;\ninit: b ;").unwrap_err();
        assert!(matches!(e, ModelError::Unknown { pos: Pos { line: 2, col: 7 }, .. }), "{e:?}");
        let e = parse_model("observations: o ; states: a b ; obs o : { a } { a b } ;").unwrap_err();
        assert!(matches!(e, ModelError::OverlappingBlocks { .. }), "{e:?}");
        let e = parse_model("states a ;").unwrap_err();
        assert!(matches!(e, ModelError::Syntax { .. }), "{e:?}");
    }

    #[test]
    fn mono_shorthand_creates_agent_a() {
        let m = parse_model(fixtures::FIG2).unwrap();
        assert_eq!(m.agents(), &["a".to_string()]);
        assert_eq!(m.initial_obs().get(AgentId(0)), m.obs_by_name("o1").unwrap());
    }

    #[test]
    fn multi_agent_requires_pairs() {
        let text = "agents: a b ; observations: o ; states: s ; init: s ; initobs: o ; trans: s -> s ;";
        assert!(matches!(parse_model(text), Err(ModelError::Syntax { .. })));
    }
}
