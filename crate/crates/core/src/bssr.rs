//! Bernoulli-STRIPS belief state: every ground literal carries an independent
//! probability of being true, literals that were never defined are false.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::model::{GroundAction, GroundExpr};

/// A ground literal such as `at("mail room")`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Literal {
    pub predicate: String,
    pub args: Vec<String>,
}

impl Literal {
    pub fn new<P: Into<String>>(predicate: P, args: &[&str]) -> Self {
        Literal {
            predicate: predicate.into(),
            args: args.iter().map(|a| a.to_string()).collect(),
        }
    }
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(", self.predicate)?;
        for (i, a) in self.args.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{a:?}")?;
        }
        write!(f, ")")
    }
}

/// Parses `pred(a, "b c")`, `pred()` or a bare `pred`.
impl std::str::FromStr for Literal {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let s = s.trim();
        let (name, rest) = match s.find('(') {
            Some(i) => (&s[..i], Some(&s[i + 1..])),
            None => (s, None),
        };
        let name = name.trim();
        if name.is_empty() || name.contains(|c: char| c.is_whitespace() || c == '"' || c == ')') {
            return Err(format!("bad literal `{s}`"));
        }
        let mut args = Vec::new();
        if let Some(rest) = rest {
            let inner = rest
                .strip_suffix(')')
                .ok_or_else(|| format!("bad literal `{s}`: missing `)`"))?;
            let mut chars = inner.chars().peekable();
            loop {
                while chars.peek().is_some_and(|c| c.is_whitespace()) {
                    chars.next();
                }
                let Some(&c) = chars.peek() else { break };
                let mut arg = String::new();
                if c == '"' {
                    chars.next();
                    loop {
                        match chars.next() {
                            Some('"') => break,
                            Some('\\') => arg.extend(chars.next()),
                            Some(c) => arg.push(c),
                            None => return Err(format!("bad literal `{s}`: unterminated string")),
                        }
                    }
                } else {
                    while let Some(&c) = chars.peek() {
                        if c == ',' {
                            break;
                        }
                        arg.push(c);
                        chars.next();
                    }
                    arg = arg.trim().to_string();
                }
                args.push(arg);
                while chars.peek().is_some_and(|c| c.is_whitespace()) {
                    chars.next();
                }
                match chars.next() {
                    None => break,
                    Some(',') => {}
                    Some(c) => return Err(format!("bad literal `{s}`: unexpected `{c}`")),
                }
            }
        }
        Ok(Literal {
            predicate: name.to_string(),
            args,
        })
    }
}

/// Read access to a world, either probabilistic or STRIPS-style.
///
/// Grounding uses this to resolve implicit arguments and `forall` expansions,
/// so the same grounding code runs against beliefs, repair worlds and the
/// simulator's ground truth.
pub trait WorldView {
    /// Maximum-likelihood truth of a literal.
    fn ml_true(&self, lit: &Literal) -> bool;
    /// Whether the literal is defined in the world at all.
    fn defines(&self, lit: &Literal) -> bool;
    /// All literals of a predicate, in sorted order.
    fn literals_of(&self, predicate: &str) -> Vec<Literal>;
}

/// Probabilistic world state: map from literal to P(literal = true).
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BeliefState {
    probs: BTreeMap<Literal, f64>,
}

impl BeliefState {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_pairs<I: IntoIterator<Item = (Literal, f64)>>(pairs: I) -> Self {
        let probs = pairs
            .into_iter()
            .map(|(l, p)| {
                assert!((0.0..=1.0).contains(&p), "probability {p} out of range");
                (l, p)
            })
            .collect();
        BeliefState { probs }
    }

    /// Stored probability, 0 for absent literals.
    pub fn prob(&self, lit: &Literal) -> f64 {
        self.probs.get(lit).copied().unwrap_or(0.0)
    }

    pub fn set(&mut self, lit: Literal, p: f64) {
        assert!((0.0..=1.0).contains(&p), "probability {p} out of range");
        self.probs.insert(lit, p);
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Literal, f64)> {
        self.probs.iter().map(|(l, p)| (l, *p))
    }

    /// The maximum-likelihood STRIPS world.
    pub fn ml_world(&self) -> MlWorld {
        MlWorld::from_iter(
            self.probs
                .iter()
                .filter(|(_, p)| **p > 0.5)
                .map(|(l, _)| l.clone()),
        )
    }

    /// Sorted `predicate(args)=probability` lines.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for (lit, p) in &self.probs {
            out.push_str(&format!("{lit}={p}\n"));
        }
        out
    }
}

impl WorldView for BeliefState {
    fn ml_true(&self, lit: &Literal) -> bool {
        ml_literal(self, lit)
    }

    fn defines(&self, lit: &Literal) -> bool {
        self.probs.contains_key(lit)
    }

    fn literals_of(&self, predicate: &str) -> Vec<Literal> {
        self.probs
            .keys()
            .filter(|l| l.predicate == predicate)
            .cloned()
            .collect()
    }
}

/// A deterministic STRIPS world: the set of true literals.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct MlWorld {
    pub literals: BTreeSet<Literal>,
}

impl MlWorld {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn holds(&self, lit: &Literal) -> bool {
        self.literals.contains(lit)
    }

    pub fn assign(&mut self, lit: Literal, value: bool) {
        if value {
            self.literals.insert(lit);
        } else {
            self.literals.remove(&lit);
        }
    }

    pub fn satisfies(&self, conj: &[(Literal, bool)]) -> bool {
        conj.iter().all(|(l, v)| self.holds(l) == *v)
    }
}

impl FromIterator<Literal> for MlWorld {
    fn from_iter<I: IntoIterator<Item = Literal>>(iter: I) -> Self {
        MlWorld {
            literals: iter.into_iter().collect(),
        }
    }
}

impl WorldView for MlWorld {
    fn ml_true(&self, lit: &Literal) -> bool {
        self.holds(lit)
    }

    fn defines(&self, lit: &Literal) -> bool {
        self.holds(lit)
    }

    fn literals_of(&self, predicate: &str) -> Vec<Literal> {
        self.literals
            .iter()
            .filter(|l| l.predicate == predicate)
            .cloned()
            .collect()
    }
}

/// ML value of a single literal: true iff p > 0.5 (ties are false).
pub fn ml_literal(state: &BeliefState, lit: &Literal) -> bool {
    state.prob(lit) > 0.5
}

/// ML evaluation of a conjunction of (literal, polarity) pairs.
pub fn eval_predicate(state: &BeliefState, conj: &[(Literal, bool)]) -> bool {
    conj.iter()
        .all(|(l, positive)| ml_literal(state, l) == *positive)
}

/// Apply an action's belief-update program, assuming independent priors.
///
/// Each target's new probability is the exact marginal of its Boolean
/// expression over the prior literals and the action variables, computed by
/// enumerating the (few) leaves the expression depends on.
pub fn forward_update(state: &BeliefState, action: &GroundAction) -> BeliefState {
    let mut next = state.clone();
    for stmt in &action.statements {
        let expr = action.expand(&stmt.expr);
        let p = marginal(&expr, |leaf| match leaf {
            Leaf::Var(i) => 1.0 - action.vars[*i].alpha,
            Leaf::Prior(l) => state.prob(l),
        });
        next.probs.insert(stmt.target.clone(), p.clamp(0.0, 1.0));
    }
    next
}

/// A leaf of a fully expanded update expression.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub(crate) enum Leaf {
    Var(usize),
    Prior(Literal),
}

fn collect_leaves(expr: &GroundExpr, out: &mut Vec<Leaf>) {
    match expr {
        GroundExpr::Const(_) => {}
        GroundExpr::Var(i) => out.push(Leaf::Var(*i)),
        GroundExpr::Prior(l) => out.push(Leaf::Prior(l.clone())),
        GroundExpr::Next(_) => unreachable!("expression not expanded"),
        GroundExpr::Not(e) => collect_leaves(e, out),
        GroundExpr::And(es) | GroundExpr::Or(es) => es.iter().for_each(|e| collect_leaves(e, out)),
    }
}

fn eval_leaves(expr: &GroundExpr, leaves: &[Leaf], bits: u64) -> bool {
    match expr {
        GroundExpr::Const(b) => *b,
        GroundExpr::Var(i) => {
            let k = leaves.iter().position(|l| *l == Leaf::Var(*i)).unwrap();
            bits >> k & 1 == 1
        }
        GroundExpr::Prior(lit) => {
            let k = leaves
                .iter()
                .position(|l| matches!(l, Leaf::Prior(x) if x == lit))
                .unwrap();
            bits >> k & 1 == 1
        }
        GroundExpr::Next(_) => unreachable!("expression not expanded"),
        GroundExpr::Not(e) => !eval_leaves(e, leaves, bits),
        GroundExpr::And(es) => es.iter().all(|e| eval_leaves(e, leaves, bits)),
        GroundExpr::Or(es) => es.iter().any(|e| eval_leaves(e, leaves, bits)),
    }
}

pub(crate) fn marginal(expr: &GroundExpr, prob: impl Fn(&Leaf) -> f64) -> f64 {
    let mut leaves = Vec::new();
    collect_leaves(expr, &mut leaves);
    leaves.sort();
    leaves.dedup();
    assert!(leaves.len() <= 20, "update expression has too many leaves");
    let ps: Vec<f64> = leaves.iter().map(&prob).collect();
    let mut total = 0.0;
    for bits in 0..(1u64 << leaves.len()) {
        if !eval_leaves(expr, &leaves, bits) {
            continue;
        }
        let mut w = 1.0;
        for (k, p) in ps.iter().enumerate() {
            w *= if bits >> k & 1 == 1 { *p } else { 1.0 - *p };
        }
        total += w;
    }
    total
}
