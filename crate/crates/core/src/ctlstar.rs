//! CTL* model checking on finite labelled graphs.
//!
//! `E ψ` is decided by replacing the maximal state subformulas of `ψ` with
//! fresh atoms, translating the rest into a generalized Büchi automaton
//! with a tableau construction, and searching the product with the graph
//! for a reachable nontrivial SCC that meets every acceptance set.

use std::collections::{BTreeSet, HashMap};
use std::rc::Rc;

use thiserror::Error;

use crate::logic::Formula;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CtlError {
    #[error("epistemic operator reached the CTL* layer")]
    Epistemic,
    #[error("temporal operator in state position")]
    Temporal,
    #[error("path formula may only contain atoms, Boolean and temporal operators")]
    NotPathFormula,
    #[error("node {0} has no successor")]
    NotLeftTotal(usize),
}

/// A finite graph with named Boolean node labels.
#[derive(Clone, Debug, Default)]
pub struct LabeledStructure {
    pub succ: Vec<Vec<usize>>,
    pub props: HashMap<String, Vec<bool>>,
}

impl LabeledStructure {
    pub fn new(succ: Vec<Vec<usize>>) -> LabeledStructure {
        LabeledStructure { succ, props: HashMap::new() }
    }

    pub fn len(&self) -> usize {
        self.succ.len()
    }

    pub fn is_empty(&self) -> bool {
        self.succ.is_empty()
    }

    pub fn set_prop(&mut self, name: impl Into<String>, values: Vec<bool>) {
        assert_eq!(values.len(), self.succ.len());
        self.props.insert(name.into(), values);
    }

    /// Whether node `n` carries `name`; unknown names are false everywhere.
    pub fn has(&self, name: &str, n: usize) -> bool {
        self.props.get(name).is_some_and(|v| v[n])
    }

    pub fn check_left_total(&self) -> Result<(), CtlError> {
        match self.succ.iter().position(Vec::is_empty) {
            Some(n) => Err(CtlError::NotLeftTotal(n)),
            None => Ok(()),
        }
    }

    /// The lasso word `prefix · cycle^ω` as a structure whose node 0 starts it.
    pub fn lasso(prefix: &[BTreeSet<String>], cycle: &[BTreeSet<String>]) -> LabeledStructure {
        assert!(!cycle.is_empty());
        let word: Vec<&BTreeSet<String>> = prefix.iter().chain(cycle).collect();
        let n = word.len();
        let succ = (0..n).map(|i| vec![if i + 1 < n { i + 1 } else { prefix.len() }]).collect();
        let mut ls = LabeledStructure::new(succ);
        let names: BTreeSet<&String> = word.iter().flat_map(|s| s.iter()).collect();
        for name in names {
            ls.set_prop(name.clone(), word.iter().map(|s| s.contains(name)).collect());
        }
        ls
    }
}

/// Negation normal form LTL over indexed atoms.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Ltl {
    True,
    False,
    /// Atom index and polarity.
    Lit(usize, bool),
    And(Box<Ltl>, Box<Ltl>),
    Or(Box<Ltl>, Box<Ltl>),
    Next(Box<Ltl>),
    Until(Box<Ltl>, Box<Ltl>),
    Release(Box<Ltl>, Box<Ltl>),
}

/// A state-labelled generalized Büchi automaton: a run reads the letter at
/// each position in the state it visits there, and that letter must
/// satisfy the state's literals.
#[derive(Clone, Debug)]
pub struct PathAutomaton {
    pub atoms: Vec<String>,
    /// Per state: atom indices that must be true, and that must be false.
    pub literals: Vec<(Vec<usize>, Vec<usize>)>,
    pub succ: Vec<Vec<usize>>,
    pub initial: Vec<usize>,
    /// Each set lists, per state, whether it belongs to the set.
    pub acceptance: Vec<Vec<bool>>,
}

impl PathAutomaton {
    pub fn num_states(&self) -> usize {
        self.succ.len()
    }

    /// An equivalent automaton with at most one acceptance set.
    pub fn degeneralize(&self) -> PathAutomaton {
        let k = self.acceptance.len();
        if k <= 1 {
            return self.clone();
        }
        let n = self.num_states();
        let id = |q: usize, i: usize| q * k + i;
        let mut literals = Vec::with_capacity(n * k);
        let mut succ = Vec::with_capacity(n * k);
        let mut accept = Vec::with_capacity(n * k);
        for q in 0..n {
            for i in 0..k {
                literals.push(self.literals[q].clone());
                let j = if self.acceptance[i][q] { (i + 1) % k } else { i };
                succ.push(self.succ[q].iter().map(|&r| id(r, j)).collect());
                accept.push(i == 0 && self.acceptance[0][q]);
            }
        }
        PathAutomaton {
            atoms: self.atoms.clone(),
            literals,
            succ,
            initial: self.initial.iter().map(|&q| id(q, 0)).collect(),
            acceptance: vec![accept],
        }
    }

    /// Whether the automaton accepts `prefix · cycle^ω`.
    pub fn accepts_lasso(&self, prefix: &[BTreeSet<String>], cycle: &[BTreeSet<String>]) -> bool {
        product_nonempty(&LabeledStructure::lasso(prefix, cycle), 0, self)
    }
}

/// Negation normal form of a path formula whose atoms are collected into
/// `atoms`; `None` on state-only operators.
fn to_ltl(f: &Formula, neg: bool, atoms: &mut Vec<String>) -> Option<Ltl> {
    use Formula as F;
    let b = Box::new;
    Some(match f {
        F::True => if neg { Ltl::False } else { Ltl::True },
        F::False => if neg { Ltl::True } else { Ltl::False },
        F::Atom(p) => {
            let i = match atoms.iter().position(|a| a == p) {
                Some(i) => i,
                None => {
                    atoms.push(p.clone());
                    atoms.len() - 1
                }
            };
            Ltl::Lit(i, !neg)
        }
        F::Not(a) => to_ltl(a, !neg, atoms)?,
        F::And(x, y) | F::Or(x, y) => {
            let (x, y) = (b(to_ltl(x, neg, atoms)?), b(to_ltl(y, neg, atoms)?));
            if matches!(f, F::And(..)) != neg {
                Ltl::And(x, y)
            } else {
                Ltl::Or(x, y)
            }
        }
        F::Implies(x, y) => {
            let (x, y) = (b(to_ltl(x, !neg, atoms)?), b(to_ltl(y, neg, atoms)?));
            if neg {
                Ltl::And(x, y)
            } else {
                Ltl::Or(x, y)
            }
        }
        F::Next(a) => Ltl::Next(b(to_ltl(a, neg, atoms)?)),
        F::Until(x, y) => {
            let (x, y) = (b(to_ltl(x, neg, atoms)?), b(to_ltl(y, neg, atoms)?));
            if neg {
                Ltl::Release(x, y)
            } else {
                Ltl::Until(x, y)
            }
        }
        F::Finally(a) => {
            let a = b(to_ltl(a, neg, atoms)?);
            if neg {
                Ltl::Release(b(Ltl::False), a)
            } else {
                Ltl::Until(b(Ltl::True), a)
            }
        }
        F::Globally(a) => {
            let a = b(to_ltl(a, neg, atoms)?);
            if neg {
                Ltl::Until(b(Ltl::True), a)
            } else {
                Ltl::Release(b(Ltl::False), a)
            }
        }
        F::All(_) | F::Knows(..) | F::SetObs(..) => return None,
    })
}

/// Compiles an LTL path formula (atoms, Boolean and temporal operators
/// only) into an automaton for its models.
pub fn compile_path_formula(f: &Formula) -> Result<PathAutomaton, CtlError> {
    let mut atoms = Vec::new();
    let ltl = to_ltl(f, false, &mut atoms).ok_or(CtlError::NotPathFormula)?;
    Ok(compile_ltl(&ltl, atoms))
}

const INIT: usize = usize::MAX;

#[derive(Clone)]
struct TNode {
    incoming: BTreeSet<usize>,
    new: BTreeSet<usize>,
    old: BTreeSet<usize>,
    next: BTreeSet<usize>,
}

#[derive(Default)]
struct Interner {
    forms: Vec<Ltl>,
    index: HashMap<Ltl, usize>,
}

impl Interner {
    fn id(&mut self, f: &Ltl) -> usize {
        if let Some(&i) = self.index.get(f) {
            return i;
        }
        self.forms.push(f.clone());
        self.index.insert(f.clone(), self.forms.len() - 1);
        self.forms.len() - 1
    }
}

/// Tableau construction in the style of Gerth, Peled, Vardi and Wolper.
pub fn compile_ltl(f: &Ltl, atoms: Vec<String>) -> PathAutomaton {
    let mut tab = Interner::default();
    let root = tab.id(f);
    let mut stack = vec![TNode {
        incoming: BTreeSet::from([INIT]),
        new: BTreeSet::from([root]),
        old: BTreeSet::new(),
        next: BTreeSet::new(),
    }];
    let mut done: Vec<TNode> = Vec::new();
    let mut seen: HashMap<(BTreeSet<usize>, BTreeSet<usize>), usize> = HashMap::new();

    'nodes: while let Some(mut q) = stack.pop() {
        loop {
            let Some(eta) = q.new.pop_first() else {
                let key = (q.old.clone(), q.next.clone());
                if let Some(&r) = seen.get(&key) {
                    done[r].incoming.extend(q.incoming);
                } else {
                    let idx = done.len();
                    seen.insert(key, idx);
                    stack.push(TNode {
                        incoming: BTreeSet::from([idx]),
                        new: q.next.clone(),
                        old: BTreeSet::new(),
                        next: BTreeSet::new(),
                    });
                    done.push(q);
                }
                continue 'nodes;
            };
            if q.old.contains(&eta) {
                continue;
            }
            let form = tab.forms[eta].clone();
            match &form {
                Ltl::False => continue 'nodes,
                Ltl::True => {
                    q.old.insert(eta);
                }
                Ltl::Lit(a, pos) => {
                    if let Some(c) = tab.index.get(&Ltl::Lit(*a, !pos)) {
                        if q.old.contains(c) {
                            continue 'nodes;
                        }
                    }
                    q.old.insert(eta);
                }
                Ltl::And(x, y) => {
                    q.old.insert(eta);
                    for c in [tab.id(x), tab.id(y)] {
                        if !q.old.contains(&c) {
                            q.new.insert(c);
                        }
                    }
                }
                Ltl::Next(x) => {
                    q.old.insert(eta);
                    q.next.insert(tab.id(x));
                }
                Ltl::Or(x, y) | Ltl::Until(x, y) | Ltl::Release(x, y) => {
                    let (x, y) = (tab.id(x), tab.id(y));
                    let (new1, next1, new2): (Vec<usize>, Option<usize>, Vec<usize>) = match form {
                        Ltl::Or(..) => (vec![x], None, vec![y]),
                        Ltl::Until(..) => (vec![x], Some(eta), vec![y]),
                        _ => (vec![y], Some(eta), vec![x, y]),
                    };
                    q.old.insert(eta);
                    let mut q2 = q.clone();
                    for c in new2 {
                        if !q2.old.contains(&c) {
                            q2.new.insert(c);
                        }
                    }
                    stack.push(q2);
                    for c in new1 {
                        if !q.old.contains(&c) {
                            q.new.insert(c);
                        }
                    }
                    q.next.extend(next1);
                }
            }
        }
    }

    let n = done.len();
    let mut succ = vec![Vec::new(); n];
    let mut initial = Vec::new();
    for (j, node) in done.iter().enumerate() {
        for &i in &node.incoming {
            if i == INIT {
                initial.push(j);
            } else {
                succ[i].push(j);
            }
        }
    }
    for s in &mut succ {
        s.sort_unstable();
    }
    let literals = done
        .iter()
        .map(|node| {
            let mut pos = Vec::new();
            let mut neg = Vec::new();
            for &i in &node.old {
                if let Ltl::Lit(a, p) = tab.forms[i] {
                    if p {
                        pos.push(a);
                    } else {
                        neg.push(a);
                    }
                }
            }
            (pos, neg)
        })
        .collect();
    let acceptance = (0..tab.forms.len())
        .filter_map(|u| match &tab.forms[u] {
            Ltl::Until(_, y) => {
                let y = tab.index[y.as_ref()];
                Some(done.iter().map(|node| !node.old.contains(&u) || node.old.contains(&y)).collect())
            }
            _ => None,
        })
        .collect();
    PathAutomaton { atoms, literals, succ, initial, acceptance }
}

/// For every node, whether some infinite path from it is accepted.
/// `atom_values[i][n]` is the value of automaton atom `i` at node `n`.
fn accepting_starts(succ: &[Vec<usize>], atom_values: &[&[bool]], aut: &PathAutomaton) -> Vec<bool> {
    let nn = succ.len();
    let nq = aut.num_states();
    let valid = |n: usize, q: usize| {
        let (pos, neg) = &aut.literals[q];
        pos.iter().all(|&a| atom_values[a][n]) && neg.iter().all(|&a| !atom_values[a][n])
    };
    let id = |n: usize, q: usize| n * nq + q;
    let total = nn * nq;
    let mut ok = vec![false; total];
    for n in 0..nn {
        for q in 0..nq {
            ok[id(n, q)] = valid(n, q);
        }
    }
    // Explicit product adjacency.
    let mut adj: Vec<Vec<u32>> = vec![Vec::new(); total];
    for n in 0..nn {
        for q in 0..nq {
            let v = id(n, q);
            if !ok[v] {
                continue;
            }
            for &n2 in &succ[n] {
                for &q2 in &aut.succ[q] {
                    let w = id(n2, q2);
                    if ok[w] {
                        adj[v].push(w as u32);
                    }
                }
            }
        }
    }

    let comp = tarjan(&adj, &ok);
    let ncomp = comp.iter().filter(|c| **c != u32::MAX).map(|c| *c as usize + 1).max().unwrap_or(0);
    let mut size = vec![0usize; ncomp];
    let mut looped = vec![false; ncomp];
    let mut hits = vec![vec![false; aut.acceptance.len()]; ncomp];
    for v in 0..total {
        if !ok[v] {
            continue;
        }
        let c = comp[v] as usize;
        size[c] += 1;
        if adj[v].iter().any(|&w| w as usize == v) {
            looped[c] = true;
        }
        let q = v % nq;
        for (i, set) in aut.acceptance.iter().enumerate() {
            if set[q] {
                hits[c][i] = true;
            }
        }
    }
    let accepting: Vec<bool> =
        (0..ncomp).map(|c| (size[c] > 1 || looped[c]) && hits[c].iter().all(|h| *h)).collect();

    // Backward reachability from accepting components.
    let mut radj: Vec<Vec<u32>> = vec![Vec::new(); total];
    for v in 0..total {
        for &w in &adj[v] {
            radj[w as usize].push(v as u32);
        }
    }
    let mut good = vec![false; total];
    let mut stack: Vec<usize> = (0..total).filter(|&v| ok[v] && accepting[comp[v] as usize]).collect();
    for &v in &stack {
        good[v] = true;
    }
    while let Some(v) = stack.pop() {
        for &u in &radj[v] {
            let u = u as usize;
            if !good[u] {
                good[u] = true;
                stack.push(u);
            }
        }
    }
    (0..nn).map(|n| aut.initial.iter().any(|&q| good[id(n, q)])).collect()
}

/// Iterative Tarjan; returns a component number per vertex (`u32::MAX`
/// for vertices outside `live`).
fn tarjan(adj: &[Vec<u32>], live: &[bool]) -> Vec<u32> {
    let n = adj.len();
    const UNSEEN: u32 = u32::MAX;
    let mut index = vec![UNSEEN; n];
    let mut low = vec![0u32; n];
    let mut on_stack = vec![false; n];
    let mut comp = vec![u32::MAX; n];
    let mut stack: Vec<u32> = Vec::new();
    let mut call: Vec<(u32, usize)> = Vec::new();
    let mut counter = 0u32;
    let mut ncomp = 0u32;
    for root in 0..n {
        if !live[root] || index[root] != UNSEEN {
            continue;
        }
        call.push((root as u32, 0));
        index[root] = counter;
        low[root] = counter;
        counter += 1;
        stack.push(root as u32);
        on_stack[root] = true;
        while let Some(&mut (v, ref mut i)) = call.last_mut() {
            let v = v as usize;
            if *i < adj[v].len() {
                let w = adj[v][*i] as usize;
                *i += 1;
                if index[w] == UNSEEN {
                    index[w] = counter;
                    low[w] = counter;
                    counter += 1;
                    stack.push(w as u32);
                    on_stack[w] = true;
                    call.push((w as u32, 0));
                } else if on_stack[w] {
                    low[v] = low[v].min(index[w]);
                }
            } else {
                call.pop();
                if let Some(&(p, _)) = call.last() {
                    let p = p as usize;
                    low[p] = low[p].min(low[v]);
                }
                if low[v] == index[v] {
                    loop {
                        let w = stack.pop().expect("tarjan stack") as usize;
                        on_stack[w] = false;
                        comp[w] = ncomp;
                        if w == v {
                            break;
                        }
                    }
                    ncomp += 1;
                }
            }
        }
    }
    comp
}

/// Whether some infinite path of `ls` from `start` is accepted by `aut`.
pub fn product_nonempty(ls: &LabeledStructure, start: usize, aut: &PathAutomaton) -> bool {
    let all_false = vec![false; ls.len()];
    let values: Vec<&[bool]> =
        aut.atoms.iter().map(|a| ls.props.get(a).map(|v| v.as_slice()).unwrap_or(&all_false)).collect();
    accepting_starts(&ls.succ, &values, aut)[start]
}

/// The set of nodes satisfying the state formula `f`, as a membership vector.
pub fn label_states(ls: &LabeledStructure, f: &Formula) -> Result<Vec<bool>, CtlError> {
    ls.check_left_total()?;
    let mut l = Labeler { ls, cache: HashMap::new() };
    Ok(l.state(f)?.as_ref().clone())
}

struct Labeler<'a> {
    ls: &'a LabeledStructure,
    cache: HashMap<Formula, Rc<Vec<bool>>>,
}

impl Labeler<'_> {
    fn state(&mut self, f: &Formula) -> Result<Rc<Vec<bool>>, CtlError> {
        use Formula as F;
        if let Some(v) = self.cache.get(f) {
            return Ok(v.clone());
        }
        let n = self.ls.len();
        let zip = |a: &[bool], b: &[bool], op: fn(bool, bool) -> bool| -> Vec<bool> {
            a.iter().zip(b).map(|(x, y)| op(*x, *y)).collect()
        };
        let v: Vec<bool> = match f {
            F::True => vec![true; n],
            F::False => vec![false; n],
            F::Atom(p) => self.ls.props.get(p).cloned().unwrap_or_else(|| vec![false; n]),
            F::Not(a) => self.state(a)?.iter().map(|x| !x).collect(),
            F::And(a, b) => zip(&self.state(a)?, &self.state(b)?, |x, y| x && y),
            F::Or(a, b) => zip(&self.state(a)?, &self.state(b)?, |x, y| x || y),
            F::Implies(a, b) => zip(&self.state(a)?, &self.state(b)?, |x, y| !x || y),
            F::All(psi) => self.exists(psi, true)?.iter().map(|x| !x).collect(),
            F::Knows(..) | F::SetObs(..) => return Err(CtlError::Epistemic),
            F::Next(_) | F::Until(..) | F::Finally(_) | F::Globally(_) => return Err(CtlError::Temporal),
        };
        let v = Rc::new(v);
        self.cache.insert(f.clone(), v.clone());
        Ok(v)
    }

    /// Nodes with a path satisfying `psi` (or `!psi` when `negate`).
    fn exists(&mut self, psi: &Formula, negate: bool) -> Result<Vec<bool>, CtlError> {
        let mut subs: Vec<Formula> = Vec::new();
        let abstracted = self.abstract_state_parts(psi, &mut subs)?;
        let mut atoms = Vec::new();
        let ltl = to_ltl(&abstracted, negate, &mut atoms).expect("state parts abstracted");
        let values: Vec<Rc<Vec<bool>>> = atoms
            .iter()
            .map(|a| {
                let f = match a.strip_prefix('\u{0}') {
                    Some(i) => subs[i.parse::<usize>().expect("index")].clone(),
                    None => Formula::Atom(a.clone()),
                };
                self.state(&f)
            })
            .collect::<Result<_, _>>()?;
        let aut = compile_ltl(&ltl, atoms);
        let slices: Vec<&[bool]> = values.iter().map(|v| v.as_slice()).collect();
        Ok(accepting_starts(&self.ls.succ, &slices, &aut))
    }

    /// Replaces maximal state subformulas by placeholder atoms whose names
    /// cannot clash with identifiers.
    fn abstract_state_parts(&mut self, f: &Formula, subs: &mut Vec<Formula>) -> Result<Formula, CtlError> {
        use Formula as F;
        Ok(match f {
            F::All(_) | F::Knows(..) | F::SetObs(..) => {
                if matches!(f, F::Knows(..) | F::SetObs(..)) {
                    return Err(CtlError::Epistemic);
                }
                let i = match subs.iter().position(|s| s == f) {
                    Some(i) => i,
                    None => {
                        subs.push(f.clone());
                        subs.len() - 1
                    }
                };
                F::Atom(format!("\u{0}{i}"))
            }
            F::True | F::False | F::Atom(_) => f.clone(),
            _ => {
                let mut err = None;
                let out = f.map_children(|c| match self.abstract_state_parts(c, subs) {
                    Ok(x) => x,
                    Err(e) => {
                        err = Some(e);
                        F::True
                    }
                });
                if let Some(e) = err {
                    return Err(e);
                }
                out
            }
        })
    }
}
