//! Formula syntax: AST, parser, printer and structural utilities.
//!
//! History formulas are evaluated at a point (history plus record), path
//! formulas along a path. Temporal operators may only appear under a path
//! quantifier; `K` and `D` take history formulas. `E ψ` has no node of its
//! own and is stored as `!A!ψ`.

use std::collections::BTreeSet;
use std::fmt;

use thiserror::Error;

use crate::lexer::{self, Pos, Spanned, Tok};
use crate::model::{AgentId, Model, ObsId};

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Formula {
    True,
    False,
    Atom(String),
    Not(Box<Formula>),
    And(Box<Formula>, Box<Formula>),
    Or(Box<Formula>, Box<Formula>),
    Implies(Box<Formula>, Box<Formula>),
    All(Box<Formula>),
    Next(Box<Formula>),
    Until(Box<Formula>, Box<Formula>),
    Finally(Box<Formula>),
    Globally(Box<Formula>),
    Knows(AgentId, Box<Formula>),
    SetObs(AgentId, ObsId, Box<Formula>),
}

use Formula::*;

impl Formula {
    pub fn atom(name: impl Into<String>) -> Formula {
        Atom(name.into())
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(f: Formula) -> Formula {
        Not(Box::new(f))
    }

    pub fn and(a: Formula, b: Formula) -> Formula {
        And(Box::new(a), Box::new(b))
    }

    pub fn or(a: Formula, b: Formula) -> Formula {
        Or(Box::new(a), Box::new(b))
    }

    pub fn implies(a: Formula, b: Formula) -> Formula {
        Implies(Box::new(a), Box::new(b))
    }

    pub fn all(f: Formula) -> Formula {
        All(Box::new(f))
    }

    /// `E ψ`, encoded as `!A!ψ`.
    pub fn exists(f: Formula) -> Formula {
        Formula::not(Formula::all(Formula::not(f)))
    }

    pub fn next(f: Formula) -> Formula {
        Next(Box::new(f))
    }

    pub fn until(a: Formula, b: Formula) -> Formula {
        Until(Box::new(a), Box::new(b))
    }

    pub fn finally(f: Formula) -> Formula {
        Finally(Box::new(f))
    }

    pub fn globally(f: Formula) -> Formula {
        Globally(Box::new(f))
    }

    pub fn knows(a: AgentId, f: Formula) -> Formula {
        Knows(a, Box::new(f))
    }

    pub fn set_obs(a: AgentId, o: ObsId, f: Formula) -> Formula {
        SetObs(a, o, Box::new(f))
    }

    /// The argument of `E`, if `self` is `!A!ψ`.
    pub fn as_exists(&self) -> Option<&Formula> {
        match self {
            Not(inner) => match inner.as_ref() {
                All(p) => match p.as_ref() {
                    Not(psi) => Some(psi),
                    _ => None,
                },
                _ => None,
            },
            _ => None,
        }
    }

    pub fn children(&self) -> Vec<&Formula> {
        match self {
            True | False | Atom(_) => vec![],
            Not(a) | All(a) | Next(a) | Finally(a) | Globally(a) | Knows(_, a) | SetObs(_, _, a) => vec![a],
            And(a, b) | Or(a, b) | Implies(a, b) | Until(a, b) => vec![a, b],
        }
    }

    /// Rebuilds the node with each child replaced by `f(child)`.
    pub fn map_children(&self, mut f: impl FnMut(&Formula) -> Formula) -> Formula {
        let mut b = |x: &Formula| Box::new(f(x));
        match self {
            True | False | Atom(_) => self.clone(),
            Not(a) => Not(b(a)),
            All(a) => All(b(a)),
            Next(a) => Next(b(a)),
            Finally(a) => Finally(b(a)),
            Globally(a) => Globally(b(a)),
            Knows(ag, a) => Knows(*ag, b(a)),
            SetObs(ag, o, a) => SetObs(*ag, *o, b(a)),
            And(x, y) => {
                let x = b(x);
                And(x, b(y))
            }
            Or(x, y) => {
                let x = b(x);
                Or(x, b(y))
            }
            Implies(x, y) => {
                let x = b(x);
                Implies(x, b(y))
            }
            Until(x, y) => {
                let x = b(x);
                Until(x, b(y))
            }
        }
    }

    /// Number of AST nodes.
    pub fn size(&self) -> usize {
        1 + self.children().into_iter().map(Formula::size).sum::<usize>()
    }

    /// Whether the formula mentions no `K` and no `D`.
    pub fn is_epistemic_free(&self) -> bool {
        match self {
            Knows(..) | SetObs(..) => false,
            _ => self.children().into_iter().all(Formula::is_epistemic_free),
        }
    }

    pub fn has_delta(&self) -> bool {
        match self {
            SetObs(..) => true,
            _ => self.children().into_iter().any(Formula::has_delta),
        }
    }

    pub fn count_epistemic(&self) -> usize {
        let own = usize::from(matches!(self, Knows(..) | SetObs(..)));
        own + self.children().into_iter().map(Formula::count_epistemic).sum::<usize>()
    }

    /// Renders against `model` in the concrete grammar.
    pub fn display<'a>(&'a self, model: &'a Model) -> Display<'a> {
        Display { f: self, model }
    }
}

/// Maximum nesting of `K`; `D`, path quantifiers and temporal operators
/// add nothing.
pub fn knowledge_depth(f: &Formula) -> usize {
    let below = f.children().into_iter().map(knowledge_depth).max().unwrap_or(0);
    match f {
        Knows(..) => below + 1,
        _ => below,
    }
}

/// Replaces every occurrence of `target` in `f` by the atom `name`, and
/// returns the number of replacements. Fails if `f` already uses `name`.
pub fn substitute(f: &Formula, target: &Formula, name: &str) -> Result<(Formula, usize), FormulaError> {
    if atoms(f).contains(name) {
        return Err(FormulaError::AtomCollision(name.to_string()));
    }
    fn go(f: &Formula, target: &Formula, name: &str, n: &mut usize) -> Formula {
        if f == target {
            *n += 1;
            return Atom(name.to_string());
        }
        f.map_children(|c| go(c, target, name, n))
    }
    let mut n = 0;
    let out = go(f, target, name, &mut n);
    Ok((out, n))
}

/// The leftmost-innermost `K`/`D` subformula whose argument is free of
/// `K` and `D`; `None` iff `f` is epistemic-free.
pub fn innermost_epistemic(f: &Formula) -> Option<&Formula> {
    for c in f.children() {
        if let Some(found) = innermost_epistemic(c) {
            return Some(found);
        }
    }
    matches!(f, Knows(..) | SetObs(..)).then_some(f)
}

/// Deletes every `D` operator, keeping its argument.
pub fn strip_deltas(f: &Formula) -> Formula {
    match f {
        SetObs(_, _, a) => strip_deltas(a),
        _ => f.map_children(strip_deltas),
    }
}

/// The `(agent, observation)` pairs of all `D` nodes.
pub fn delta_pairs(f: &Formula) -> BTreeSet<(AgentId, ObsId)> {
    fn go(f: &Formula, out: &mut BTreeSet<(AgentId, ObsId)>) {
        if let SetObs(a, o, _) = f {
            out.insert((*a, *o));
        }
        for c in f.children() {
            go(c, out);
        }
    }
    let mut out = BTreeSet::new();
    go(f, &mut out);
    out
}

pub fn atoms(f: &Formula) -> BTreeSet<String> {
    fn go(f: &Formula, out: &mut BTreeSet<String>) {
        if let Atom(a) = f {
            out.insert(a.clone());
        }
        for c in f.children() {
            go(c, out);
        }
    }
    let mut out = BTreeSet::new();
    go(f, &mut out);
    out
}

/// Whether `f` is a well-formed history formula.
pub fn is_history_formula(f: &Formula) -> bool {
    fn go(f: &Formula, path: bool) -> bool {
        match f {
            True | False | Atom(_) => true,
            Not(a) => go(a, path),
            And(a, b) | Or(a, b) | Implies(a, b) => go(a, path) && go(b, path),
            All(a) => go(a, true),
            Knows(_, a) | SetObs(_, _, a) => go(a, false),
            Next(a) | Finally(a) | Globally(a) => path && go(a, true),
            Until(a, b) => path && go(a, true) && go(b, true),
        }
    }
    go(f, false)
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FormulaError {
    #[error("{pos}: syntax error: {message}")]
    Syntax { pos: Pos, message: String },
    #[error("{pos}: temporal operator `{op}` outside path context")]
    Stratification { pos: Pos, op: String },
    #[error("{pos}: unknown {kind} `{name}`")]
    Unknown { pos: Pos, kind: &'static str, name: String },
    #[error("{pos}: `{op}` without an agent is ambiguous on a model with several agents")]
    Ambiguous { pos: Pos, op: &'static str },
    #[error("atom `{0}` already occurs in the formula")]
    AtomCollision(String),
}

impl FormulaError {
    pub fn code(&self) -> &'static str {
        match self {
            FormulaError::Syntax { .. } => "E_FORMULA_SYNTAX",
            FormulaError::Stratification { .. } => "E_FORMULA_STRATIFICATION",
            FormulaError::Unknown { .. } => "E_FORMULA_UNKNOWN",
            FormulaError::Ambiguous { .. } => "E_FORMULA_AMBIGUOUS",
            FormulaError::AtomCollision(_) => "E_ATOM_COLLISION",
        }
    }
}

// ---------------------------------------------------------------------------
// Parsing

#[derive(Debug)]
enum Ast {
    True,
    False,
    Atom(String, Pos),
    Unary(UOp, Pos, Box<Ast>),
    Binary(BOp, Box<Ast>, Box<Ast>),
    Knows(Option<(String, Pos)>, Pos, Box<Ast>),
    SetObs(Option<(String, Pos)>, (String, Pos), Pos, Box<Ast>),
}

#[derive(Debug, Clone, Copy)]
enum UOp {
    Not,
    All,
    Exists,
    Next,
    Finally,
    Globally,
}

#[derive(Debug, Clone, Copy)]
enum BOp {
    And,
    Or,
    Implies,
    Until(Pos),
}

const KEYWORDS: &[&str] = &["A", "E", "X", "F", "G", "U", "K", "D", "true", "false"];

/// Parses a history formula, resolving names against `model`.
pub fn parse_formula(text: &str, model: &Model) -> Result<Formula, FormulaError> {
    let toks = lexer::tokenize(text).map_err(|(pos, message)| FormulaError::Syntax { pos, message })?;
    let end = toks.last().map(|t| Pos { line: t.pos.line, col: t.pos.col + 1 }).unwrap_or(Pos { line: 1, col: 1 });
    let mut p = FormulaParser { toks, at: 0, end };
    let ast = p.implication()?;
    if let Some(t) = p.toks.get(p.at) {
        return Err(FormulaError::Syntax { pos: t.pos, message: format!("unexpected {}", t.tok) });
    }
    stratify(&ast, false)?;
    lower(&ast, model)
}

struct FormulaParser {
    toks: Vec<Spanned>,
    at: usize,
    end: Pos,
}

impl FormulaParser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.at).map(|t| &t.tok)
    }

    fn pos(&self) -> Pos {
        self.toks.get(self.at).map(|t| t.pos).unwrap_or(self.end)
    }

    fn is_keyword(&self, kw: &str) -> bool {
        matches!(self.peek(), Some(Tok::Ident(s)) if s == kw)
    }

    fn error<T>(&self, message: impl Into<String>) -> Result<T, FormulaError> {
        Err(FormulaError::Syntax { pos: self.pos(), message: message.into() })
    }

    fn expect(&mut self, tok: Tok) -> Result<(), FormulaError> {
        match self.peek() {
            Some(t) if *t == tok => {
                self.at += 1;
                Ok(())
            }
            Some(t) => {
                let m = format!("expected {tok}, found {t}");
                self.error(m)
            }
            None => self.error(format!("expected {tok}, found end of input")),
        }
    }

    fn name(&mut self) -> Result<(String, Pos), FormulaError> {
        let pos = self.pos();
        match self.peek() {
            Some(Tok::Ident(s)) if !KEYWORDS.contains(&s.as_str()) => {
                let s = s.clone();
                self.at += 1;
                Ok((s, pos))
            }
            Some(t) => {
                let m = format!("expected a name, found {t}");
                self.error(m)
            }
            None => self.error("expected a name, found end of input"),
        }
    }

    fn implication(&mut self) -> Result<Ast, FormulaError> {
        let lhs = self.disjunction()?;
        if self.peek() == Some(&Tok::Arrow) {
            self.at += 1;
            let rhs = self.implication()?;
            return Ok(Ast::Binary(BOp::Implies, Box::new(lhs), Box::new(rhs)));
        }
        Ok(lhs)
    }

    fn disjunction(&mut self) -> Result<Ast, FormulaError> {
        let mut lhs = self.conjunction()?;
        while self.peek() == Some(&Tok::Pipe) {
            self.at += 1;
            let rhs = self.conjunction()?;
            lhs = Ast::Binary(BOp::Or, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn conjunction(&mut self) -> Result<Ast, FormulaError> {
        let mut lhs = self.until()?;
        while self.peek() == Some(&Tok::Amp) {
            self.at += 1;
            let rhs = self.until()?;
            lhs = Ast::Binary(BOp::And, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn until(&mut self) -> Result<Ast, FormulaError> {
        let lhs = self.unary()?;
        if self.is_keyword("U") {
            let pos = self.pos();
            self.at += 1;
            let rhs = self.until()?;
            return Ok(Ast::Binary(BOp::Until(pos), Box::new(lhs), Box::new(rhs)));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Ast, FormulaError> {
        let pos = self.pos();
        let op = match self.peek() {
            Some(Tok::Bang) => Some(UOp::Not),
            Some(Tok::Ident(s)) => match s.as_str() {
                "A" => Some(UOp::All),
                "E" => Some(UOp::Exists),
                "X" => Some(UOp::Next),
                "F" => Some(UOp::Finally),
                "G" => Some(UOp::Globally),
                _ => None,
            },
            _ => None,
        };
        if let Some(op) = op {
            self.at += 1;
            let arg = self.unary()?;
            return Ok(Ast::Unary(op, pos, Box::new(arg)));
        }
        if self.is_keyword("K") {
            self.at += 1;
            let agent = if self.peek() == Some(&Tok::LBracket) {
                self.at += 1;
                let a = self.name()?;
                self.expect(Tok::RBracket)?;
                Some(a)
            } else {
                None
            };
            let arg = self.unary()?;
            return Ok(Ast::Knows(agent, pos, Box::new(arg)));
        }
        if self.is_keyword("D") {
            self.at += 1;
            self.expect(Tok::LBracket)?;
            let first = self.name()?;
            let (agent, obs) = if self.peek() == Some(&Tok::Comma) {
                self.at += 1;
                (Some(first), self.name()?)
            } else {
                (None, first)
            };
            self.expect(Tok::RBracket)?;
            let arg = self.unary()?;
            return Ok(Ast::SetObs(agent, obs, pos, Box::new(arg)));
        }
        self.primary()
    }

    fn primary(&mut self) -> Result<Ast, FormulaError> {
        if self.peek() == Some(&Tok::LParen) {
            self.at += 1;
            let inner = self.implication()?;
            self.expect(Tok::RParen)?;
            return Ok(inner);
        }
        if self.is_keyword("true") {
            self.at += 1;
            return Ok(Ast::True);
        }
        if self.is_keyword("false") {
            self.at += 1;
            return Ok(Ast::False);
        }
        let (name, pos) = self.name()?;
        Ok(Ast::Atom(name, pos))
    }
}

fn stratify(ast: &Ast, path: bool) -> Result<(), FormulaError> {
    let temporal = |pos: Pos, op: &str| Err(FormulaError::Stratification { pos, op: op.to_string() });
    match ast {
        Ast::True | Ast::False | Ast::Atom(..) => Ok(()),
        Ast::Unary(UOp::Not, _, a) => stratify(a, path),
        Ast::Unary(UOp::All | UOp::Exists, _, a) => stratify(a, true),
        Ast::Unary(op, pos, a) => {
            if !path {
                let name = match op {
                    UOp::Next => "X",
                    UOp::Finally => "F",
                    _ => "G",
                };
                return temporal(*pos, name);
            }
            stratify(a, true)
        }
        Ast::Binary(BOp::Until(pos), a, b) => {
            if !path {
                return temporal(*pos, "U");
            }
            stratify(a, true)?;
            stratify(b, true)
        }
        Ast::Binary(_, a, b) => {
            stratify(a, path)?;
            stratify(b, path)
        }
        Ast::Knows(_, _, a) | Ast::SetObs(_, _, _, a) => stratify(a, false),
    }
}

fn lower(ast: &Ast, model: &Model) -> Result<Formula, FormulaError> {
    let unknown = |kind: &'static str, (name, pos): &(String, Pos)| FormulaError::Unknown {
        pos: *pos,
        kind,
        name: name.clone(),
    };
    let agent = |a: &Option<(String, Pos)>, pos: Pos, op: &'static str| match a {
        Some(named) => model.agent_by_name(&named.0).map_err(|_| unknown("agent", named)),
        None => model.sole_agent().ok_or(FormulaError::Ambiguous { pos, op }),
    };
    let b = |a: &Ast| lower(a, model).map(Box::new);
    Ok(match ast {
        Ast::True => True,
        Ast::False => False,
        Ast::Atom(name, pos) => {
            if !model.has_atom(name) {
                return Err(unknown("atom", &(name.clone(), *pos)));
            }
            Atom(name.clone())
        }
        Ast::Unary(op, _, a) => {
            let a = b(a)?;
            match op {
                UOp::Not => Not(a),
                UOp::All => All(a),
                UOp::Exists => Formula::exists(*a),
                UOp::Next => Next(a),
                UOp::Finally => Finally(a),
                UOp::Globally => Globally(a),
            }
        }
        Ast::Binary(op, x, y) => {
            let (x, y) = (b(x)?, b(y)?);
            match op {
                BOp::And => And(x, y),
                BOp::Or => Or(x, y),
                BOp::Implies => Implies(x, y),
                BOp::Until(_) => Until(x, y),
            }
        }
        Ast::Knows(a, pos, arg) => Knows(agent(a, *pos, "K")?, b(arg)?),
        Ast::SetObs(a, obs, pos, arg) => {
            let ag = agent(a, *pos, "D")?;
            let o = model.obs_by_name(&obs.0).map_err(|_| unknown("observation", obs))?;
            SetObs(ag, o, b(arg)?)
        }
    })
}

// ---------------------------------------------------------------------------
// Printing

pub struct Display<'a> {
    f: &'a Formula,
    model: &'a Model,
}

const P_IMP: u8 = 0;
const P_OR: u8 = 1;
const P_AND: u8 = 2;
const P_UNTIL: u8 = 3;
const P_UNARY: u8 = 4;

fn precedence(f: &Formula) -> u8 {
    match f {
        Implies(..) => P_IMP,
        Or(..) => P_OR,
        And(..) => P_AND,
        Until(..) => P_UNTIL,
        _ => P_UNARY,
    }
}

impl Display<'_> {
    fn write(&self, f: &Formula, min: u8, out: &mut fmt::Formatter<'_>) -> fmt::Result {
        if precedence(f) < min {
            out.write_str("(")?;
            self.write(f, P_IMP, out)?;
            return out.write_str(")");
        }
        let m = self.model;
        let agent_prefix = |a: &AgentId| {
            if m.num_agents() > 1 {
                format!("{},", m.agent_name(*a))
            } else {
                String::new()
            }
        };
        if let Some(psi) = f.as_exists() {
            out.write_str("E ")?;
            return self.write(psi, P_UNARY, out);
        }
        match f {
            True => out.write_str("true"),
            False => out.write_str("false"),
            Atom(a) => out.write_str(a),
            Not(a) => {
                out.write_str("!")?;
                self.write(a, P_UNARY, out)
            }
            All(a) | Next(a) | Finally(a) | Globally(a) => {
                let op = match f {
                    All(_) => "A",
                    Next(_) => "X",
                    Finally(_) => "F",
                    _ => "G",
                };
                write!(out, "{op} ")?;
                self.write(a, P_UNARY, out)
            }
            Knows(ag, a) => {
                if m.num_agents() > 1 {
                    write!(out, "K[{}] ", m.agent_name(*ag))?;
                } else {
                    out.write_str("K ")?;
                }
                self.write(a, P_UNARY, out)
            }
            SetObs(ag, o, a) => {
                write!(out, "D[{}{}] ", agent_prefix(ag), m.obs_name(*o))?;
                self.write(a, P_UNARY, out)
            }
            Implies(a, b) => {
                self.write(a, P_OR, out)?;
                out.write_str(" -> ")?;
                self.write(b, P_IMP, out)
            }
            Or(a, b) => {
                self.write(a, P_OR, out)?;
                out.write_str(" | ")?;
                self.write(b, P_AND, out)
            }
            And(a, b) => {
                self.write(a, P_AND, out)?;
                out.write_str(" & ")?;
                self.write(b, P_UNTIL, out)
            }
            Until(a, b) => {
                self.write(a, P_UNARY, out)?;
                out.write_str(" U ")?;
                self.write(b, P_UNTIL, out)
            }
        }
    }
}

impl fmt::Display for Display<'_> {
    fn fmt(&self, out: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.write(self.f, P_IMP, out)
    }
}
