//! PDDL subset: STRIPS with typing, equality, negative preconditions and
//! action costs. Anything else is rejected with [`PddlError::UnsupportedFeature`].

mod domain;
mod ground;
mod printer;
mod problem;
pub mod sexpr;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use domain::parse_domain;
pub use ground::{ground, ground_with_limit, DEFAULT_GROUND_LIMIT};
pub use printer::{domain_to_pddl, problem_to_pddl};
pub use problem::parse_problem;
use sexpr::Pos;

pub const ROOT_TYPE: &str = "object";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PddlError {
    #[error("syntax error at {line}:{col}: expected {expected}")]
    Syntax { line: usize, col: usize, expected: String },
    #[error("unsupported feature `{construct}` at {line}:{col}")]
    UnsupportedFeature { construct: String, line: usize, col: usize },
    #[error("undeclared predicate `{name}` at {line}:{col}")]
    UndeclaredPredicate { name: String, line: usize, col: usize },
    #[error("undeclared object `{name}` at {line}:{col}")]
    UndeclaredObject { name: String, line: usize, col: usize },
    #[error("undeclared type `{name}` at {line}:{col}")]
    UndeclaredType { name: String, line: usize, col: usize },
    #[error("undeclared variable `{name}` at {line}:{col}")]
    UndeclaredVariable { name: String, line: usize, col: usize },
    #[error("`{name}` expects {expected} arguments but got {found} at {line}:{col}")]
    ArityMismatch { name: String, expected: usize, found: usize, line: usize, col: usize },
    #[error("argument `{arg}` of `{name}` has type `{found}`, not compatible with `{expected}` at {line}:{col}")]
    TypeMismatch { name: String, arg: String, expected: String, found: String, line: usize, col: usize },
    #[error("duplicate declaration of `{name}` at {line}:{col}")]
    Duplicate { name: String, line: usize, col: usize },
    #[error("problem refers to domain `{found}` but domain is `{expected}`")]
    DomainMismatch { expected: String, found: String },
    #[error("missing numeric value for `{0}`")]
    MissingFluent(String),
    #[error("invalid ground task: {0}")]
    InvalidTask(String),
    #[error("grounding exceeds capacity: {what} = {count} > {limit}")]
    CapacityExceeded { what: &'static str, count: u128, limit: usize },
}

impl PddlError {
    pub(crate) fn syntax(pos: Pos, expected: &str) -> Self {
        PddlError::Syntax { line: pos.line, col: pos.col, expected: expected.to_string() }
    }

    pub(crate) fn unsupported(construct: &str, pos: Pos) -> Self {
        PddlError::UnsupportedFeature { construct: construct.to_string(), line: pos.line, col: pos.col }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TypedName {
    pub name: String,
    pub ty: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PredicateDef {
    pub name: String,
    pub params: Vec<TypedName>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Term {
    Var(String),
    Const(String),
}

impl Term {
    pub fn name(&self) -> &str {
        match self {
            Term::Var(s) | Term::Const(s) => s,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AtomExpr {
    pub predicate: String,
    pub args: Vec<Term>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Literal {
    Pos(AtomExpr),
    Neg(AtomExpr),
    Eq(Term, Term),
    NotEq(Term, Term),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum CostExpr {
    Const(f64),
    Fluent(AtomExpr),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionSchema {
    pub name: String,
    pub params: Vec<TypedName>,
    pub precondition: Vec<Literal>,
    pub add: Vec<AtomExpr>,
    pub del: Vec<AtomExpr>,
    /// `None` means unit cost.
    pub cost: Option<CostExpr>,
}

/// A parsed and validated domain: predicates `P` and parametrized actions `A`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainDef {
    pub name: String,
    pub requirements: Vec<String>,
    /// Declared types with their parent, in declaration order.
    pub types: Vec<(String, String)>,
    pub constants: Vec<TypedName>,
    pub predicates: Vec<PredicateDef>,
    pub functions: Vec<PredicateDef>,
    pub actions: Vec<ActionSchema>,
}

impl DomainDef {
    pub fn predicate(&self, name: &str) -> Option<&PredicateDef> {
        self.predicates.iter().find(|p| p.name == name)
    }

    pub fn function(&self, name: &str) -> Option<&PredicateDef> {
        self.functions.iter().find(|p| p.name == name)
    }

    pub fn has_type(&self, ty: &str) -> bool {
        ty == ROOT_TYPE || self.types.iter().any(|(t, _)| t == ty)
    }

    pub fn parent_type(&self, ty: &str) -> Option<&str> {
        self.types.iter().find(|(t, _)| t == ty).map(|(_, p)| p.as_str())
    }

    /// Whether `sub` equals `sup` or descends from it.
    pub fn is_subtype(&self, sub: &str, sup: &str) -> bool {
        let mut cur = sub;
        // bounded walk: guards against cyclic declarations
        for _ in 0..=self.types.len() + 1 {
            if cur == sup {
                return true;
            }
            match self.parent_type(cur) {
                Some(p) if p != cur => cur = p,
                _ => return sup == ROOT_TYPE,
            }
        }
        false
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct GroundAtom {
    pub predicate: String,
    pub args: Vec<String>,
}

impl GroundAtom {
    pub fn new(predicate: &str, args: &[&str]) -> Self {
        GroundAtom { predicate: predicate.to_string(), args: args.iter().map(|s| s.to_string()).collect() }
    }
}

impl fmt::Display for GroundAtom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}", self.predicate)?;
        for a in &self.args {
            write!(f, " {a}")?;
        }
        write!(f, ")")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroundLiteral {
    pub atom: GroundAtom,
    pub positive: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Metric {
    MinimizeTotalCost,
}

/// A parsed problem: objects `O`, initial state `I`, goal `G`, and the metric
/// selecting the cost function `c`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemDef {
    pub name: String,
    pub domain_name: String,
    pub objects: Vec<TypedName>,
    pub init: Vec<GroundAtom>,
    pub numeric_init: Vec<(GroundAtom, f64)>,
    pub goal: Vec<GroundLiteral>,
    /// `None` means plan length.
    pub metric: Option<Metric>,
}
