//! The expert tier: typed action schemas with pre/postconditions, action
//! variables with failure priors, and declarative belief-update programs.

mod ground;
mod lexer;
mod parser;
mod printer;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bssr::Literal;

pub use ground::{bind_call, ground_action, ActionCall, ArgSpec};
pub use parser::parse_model;
pub use printer::print_model;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("{line}:{col}: syntax error: {msg}")]
    Syntax {
        line: usize,
        col: usize,
        msg: String,
    },
    #[error("{line}:{col}: {msg}")]
    Invalid {
        line: usize,
        col: usize,
        msg: String,
    },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GroundError {
    #[error("unknown action `{0}`")]
    UnknownAction(String),
    #[error("unknown object `{0}`")]
    UnknownObject(String),
    #[error(
        "argument `{arg}` of {action}: expected {expected}, got object `{object}` of type {found}"
    )]
    TypeMismatch {
        action: String,
        arg: String,
        expected: String,
        found: String,
        object: String,
    },
    #[error("{action}: too many arguments")]
    TooManyArguments { action: String },
    #[error("{action}: unknown parameter `{param}`")]
    UnknownParameter { action: String, param: String },
    #[error("{action}: argument `{param}` missing")]
    MissingArgument { action: String, param: String },
    #[error("{action}: cannot infer `{param}`: no `{predicate}` literal is believed true")]
    Unresolvable {
        action: String,
        param: String,
        predicate: String,
    },
    #[error("{action}: cannot infer `{param}`: candidates {candidates:?}")]
    Ambiguous {
        action: String,
        param: String,
        candidates: Vec<String>,
    },
    #[error("function `{function}` undefined on `{object}`")]
    FunctionUndefined { function: String, object: String },
    #[error("{action}: literal {literal} assigned twice")]
    DuplicateTarget { action: String, literal: String },
}

/// A term in a literal template.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Term {
    Var(String),
    Const(String),
    Apply(String, Box<Term>),
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Var(v) => write!(f, "?{v}"),
            Term::Const(c) => write!(f, "{c:?}"),
            Term::Apply(func, t) => write!(f, "({func} {t})"),
        }
    }
}

/// `(pred term...)` or `(not (pred term...))`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LiteralTemplate {
    pub predicate: String,
    pub args: Vec<Term>,
    pub positive: bool,
}

/// A literal reference inside a belief-update program, `pred[term, ...]`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LitRef {
    pub predicate: String,
    pub args: Vec<Term>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum BoolExpr {
    Const(bool),
    /// An action variable declared in `:vars`.
    Var(String),
    /// The literal's value before the action.
    Prior(LitRef),
    /// The literal's value assigned earlier in the same program (`lit'`).
    Next(LitRef),
    Not(Box<BoolExpr>),
    And(Vec<BoolExpr>),
    Or(Vec<BoolExpr>),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum UpdateStmt {
    Assign {
        target: LitRef,
        expr: BoolExpr,
    },
    /// Expands once per object of `ty` that is distinct from every bound
    /// parameter and whose target literal is already defined in the world.
    ForAll {
        var: String,
        ty: String,
        target: LitRef,
        expr: BoolExpr,
    },
}

/// An action variable; true with probability `1 - alpha`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActionVarDecl {
    pub name: String,
    pub alpha: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BeliefUpdateProgram {
    /// The first variable is the action's success variable.
    pub vars: Vec<ActionVarDecl>,
    pub statements: Vec<UpdateStmt>,
    /// Used instead of `statements` when a `@current` parameter has no
    /// candidate in the world.
    pub fallback: Option<Vec<UpdateStmt>>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ParamMode {
    Explicit,
    /// Inferred once from the unique ML-true literal of the predicate and
    /// frozen into the call.
    Implicit(String),
    /// Re-inferred every time the call is grounded.
    Current(String),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Parameter {
    pub name: String,
    pub ty: String,
    pub mode: ParamMode,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActionSchema {
    pub name: String,
    pub parameters: Vec<Parameter>,
    pub precondition: Vec<LiteralTemplate>,
    pub postcondition: Vec<LiteralTemplate>,
    pub belief_update: BeliefUpdateProgram,
    /// Failure-report label to the literal values it evidences.
    pub failure_evidence: BTreeMap<String, Vec<LiteralTemplate>>,
    /// Text shown to a human; actions without one are autonomous.
    pub prompt: Option<String>,
}

impl ActionSchema {
    pub fn param(&self, name: &str) -> Option<&Parameter> {
        self.parameters.iter().find(|p| p.name == name)
    }

    pub fn is_interaction(&self) -> bool {
        self.prompt.is_some()
    }

    /// Label used when a failure is reported without a declared label.
    pub fn default_failure_label(&self) -> Option<&str> {
        if self.failure_evidence.contains_key("cannot") {
            Some("cannot")
        } else {
            self.failure_evidence.keys().next().map(String::as_str)
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FunctionDecl {
    pub name: String,
    pub arg_type: String,
    pub result_type: String,
    pub mapping: BTreeMap<String, String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PredicateDecl {
    pub name: String,
    pub arg_types: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RobotModel {
    pub domain: String,
    pub types: BTreeSet<String>,
    pub objects: BTreeMap<String, String>,
    pub predicates: BTreeMap<String, PredicateDecl>,
    pub functions: BTreeMap<String, FunctionDecl>,
    pub params: BTreeMap<String, f64>,
    pub actions: BTreeMap<String, ActionSchema>,
}

impl RobotModel {
    pub fn action(&self, name: &str) -> Option<&ActionSchema> {
        self.actions.get(name)
    }

    pub fn alpha(&self, name: &str) -> Option<f64> {
        self.params.get(name).copied()
    }

    /// Returns a copy with some α parameters replaced.
    pub fn with_params(&self, overrides: &BTreeMap<String, f64>) -> Result<RobotModel, String> {
        let mut m = self.clone();
        for (k, v) in overrides {
            if !m.params.contains_key(k) {
                return Err(format!("unknown parameter `{k}`"));
            }
            if !(0.0..=1.0).contains(v) {
                return Err(format!("parameter `{k}` = {v} outside [0, 1]"));
            }
            m.params.insert(k.clone(), *v);
        }
        Ok(m)
    }

    pub fn objects_of_type<'a>(&'a self, ty: &'a str) -> impl Iterator<Item = &'a String> + 'a {
        self.objects
            .iter()
            .filter(move |(_, t)| t.as_str() == ty)
            .map(|(o, _)| o)
    }
}

/// A fully ground update expression. `Var` indexes `GroundAction::vars`,
/// `Next` indexes an earlier entry of `GroundAction::statements`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum GroundExpr {
    Const(bool),
    Var(usize),
    Prior(Literal),
    Next(usize),
    Not(Box<GroundExpr>),
    And(Vec<GroundExpr>),
    Or(Vec<GroundExpr>),
}

impl GroundExpr {
    pub fn eval(&self, vars: &[bool], prior: &dyn Fn(&Literal) -> bool, next: &[bool]) -> bool {
        match self {
            GroundExpr::Const(b) => *b,
            GroundExpr::Var(i) => vars[*i],
            GroundExpr::Prior(l) => prior(l),
            GroundExpr::Next(i) => next[*i],
            GroundExpr::Not(e) => !e.eval(vars, prior, next),
            GroundExpr::And(es) => es.iter().all(|e| e.eval(vars, prior, next)),
            GroundExpr::Or(es) => es.iter().any(|e| e.eval(vars, prior, next)),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroundStatement {
    pub target: Literal,
    pub expr: GroundExpr,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroundVar {
    pub name: String,
    pub alpha: f64,
}

/// An action with every parameter bound and every function evaluated.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroundAction {
    pub schema: String,
    /// (parameter, object) in declaration order.
    pub args: Vec<(String, String)>,
    pub precondition: Vec<(Literal, bool)>,
    pub postcondition: Vec<(Literal, bool)>,
    pub vars: Vec<GroundVar>,
    pub statements: Vec<GroundStatement>,
}

impl GroundAction {
    /// Inline `Next` references so the expression mentions only priors and
    /// action variables.
    pub fn expand(&self, expr: &GroundExpr) -> GroundExpr {
        match expr {
            GroundExpr::Next(i) => self.expand(&self.statements[*i].expr),
            GroundExpr::Not(e) => GroundExpr::Not(Box::new(self.expand(e))),
            GroundExpr::And(es) => GroundExpr::And(es.iter().map(|e| self.expand(e)).collect()),
            GroundExpr::Or(es) => GroundExpr::Or(es.iter().map(|e| self.expand(e)).collect()),
            other => other.clone(),
        }
    }

    /// Literals this action assigns.
    pub fn targets(&self) -> impl Iterator<Item = &Literal> {
        self.statements.iter().map(|s| &s.target)
    }

    /// STRIPS-level effect with every action variable true.
    pub fn apply_nominal(&self, world: &mut crate::bssr::MlWorld) {
        self.apply_with(world, &vec![true; self.vars.len()]);
    }

    pub fn apply_with(&self, world: &mut crate::bssr::MlWorld, vars: &[bool]) {
        let before = world.clone();
        let prior = |l: &Literal| before.holds(l);
        let mut next = Vec::with_capacity(self.statements.len());
        for stmt in &self.statements {
            let v = stmt.expr.eval(vars, &prior, &next);
            next.push(v);
        }
        for (stmt, v) in self.statements.iter().zip(next) {
            world.assign(stmt.target.clone(), v);
        }
    }

    pub fn mentions_in_postcondition(&self, lit: &Literal) -> bool {
        self.postcondition.iter().any(|(l, _)| l == lit)
    }
}

impl fmt::Display for GroundAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(", self.schema)?;
        for (i, (_, o)) in self.args.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{o:?}")?;
        }
        write!(f, ")")
    }
}
