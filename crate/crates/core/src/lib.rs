//! Explicit-state model checking for temporal-epistemic logic with
//! dynamic observation change under synchronous perfect recall.
//!
//! Two decision engines are provided: [`checker::check`] works on the
//! augmented model of epistemic states, and [`reduce::check_via_reduction`]
//! compiles observation change away first. [`oracle`] is a bounded
//! brute-force evaluator of the history semantics used to cross-check both.

mod lexer;

pub mod augment;
pub mod checker;
pub mod ctlstar;
pub mod fixtures;
pub mod ktree;
pub mod logic;
pub mod model;
pub mod oracle;
pub mod reduce;

pub use lexer::Pos;
pub use logic::{parse_formula, Formula, FormulaError};
pub use model::{parse_model, AgentId, Model, ModelDef, ModelError, ObsId, ObsTuple, StateId};
