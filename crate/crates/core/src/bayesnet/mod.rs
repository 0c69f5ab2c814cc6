//! Time-indexed Bayes net over belief literals, built one action at a time.
//!
//! Action variables are roots with Bernoulli priors; every literal assigned
//! by an action gets a node whose CPT is the deterministic truth table of its
//! update expression. Literals that an action leaves untouched get no new
//! node: a query for `lit@t` resolves to the latest node at or before `t`.

mod factor;
mod infer;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::{self, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bssr::{BeliefState, Literal, MlWorld};
use crate::model::{GroundAction, GroundExpr};

pub use infer::Posterior;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NetError {
    #[error("expected timestep {expected}, got {got}")]
    WrongTimestep { expected: usize, got: usize },
    #[error("no node {0}")]
    UnknownNode(usize),
    #[error("evidence has probability zero")]
    InconsistentEvidence,
    #[error("net has {nodes} nodes; enumeration is limited to {limit}")]
    TooLarge { nodes: usize, limit: usize },
    #[error("update expression for {0} depends on too many nodes")]
    TooManyParents(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct NodeId(pub usize);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "n{}", self.0)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum NodeKind {
    /// Value of a literal right after the action at `t` (t = 0: initial belief).
    World { literal: Literal, t: usize },
    /// The `index`-th action variable of the action at `t`.
    ActionVar {
        t: usize,
        index: usize,
        action: String,
        var: String,
    },
}

impl NodeKind {
    pub fn timestep(&self) -> usize {
        match self {
            NodeKind::World { t, .. } | NodeKind::ActionVar { t, .. } => *t,
        }
    }

    pub fn literal(&self) -> Option<&Literal> {
        match self {
            NodeKind::World { literal, .. } => Some(literal),
            NodeKind::ActionVar { .. } => None,
        }
    }
}

impl fmt::Display for NodeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NodeKind::World { literal, t } => write!(f, "{literal}@{t}"),
            NodeKind::ActionVar { t, action, var, .. } => write!(f, "{action}.{var}@{t}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Cpt {
    Root {
        p_true: f64,
    },
    /// Output for each parent assignment; bit `i` of the row is parent `i`.
    Deterministic {
        rows: Vec<bool>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Node {
    pub kind: NodeKind,
    pub parents: Vec<NodeId>,
    pub cpt: Cpt,
    /// Marginal with no evidence.
    pub marginal: f64,
}

impl Node {
    /// P(node = true | parent row).
    pub fn p_true(&self, row: usize) -> f64 {
        match &self.cpt {
            Cpt::Root { p_true } => *p_true,
            Cpt::Deterministic { rows } => f64::from(u8::from(rows[row])),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub t: usize,
    pub action: GroundAction,
    pub vars: Vec<NodeId>,
    pub targets: Vec<(Literal, NodeId)>,
}

impl StepRecord {
    pub fn success(&self) -> Option<NodeId> {
        self.vars.first().copied()
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Evidence {
    values: BTreeMap<NodeId, bool>,
}

impl Evidence {
    pub fn new() -> Self {
        Self::default()
    }

    /// Record an observation. Returns false when it contradicts an earlier
    /// observation of the same node.
    pub fn observe(&mut self, node: NodeId, value: bool) -> bool {
        match self.values.insert(node, value) {
            Some(old) if old != value => {
                self.values.insert(node, old);
                false
            }
            _ => true,
        }
    }

    pub fn get(&self, node: NodeId) -> Option<bool> {
        self.values.get(&node).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (NodeId, bool)> + '_ {
        self.values.iter().map(|(k, v)| (*k, *v))
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn union(&self, other: &Evidence) -> Evidence {
        let mut out = self.clone();
        for (k, v) in other.iter() {
            out.values.insert(k, v);
        }
        out
    }
}

/// Exact inference back-end.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum Inference {
    #[default]
    VariableElimination,
    /// Full joint enumeration; small nets only.
    BruteForce,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TraceNet {
    nodes: Vec<Node>,
    steps: Vec<StepRecord>,
    /// Per literal, the nodes defining it in timestep order.
    defs: BTreeMap<Literal, Vec<(usize, NodeId)>>,
}

/// Update expression rewritten over parent positions.
enum NExpr {
    Const(bool),
    Parent(usize),
    Not(Box<NExpr>),
    And(Vec<NExpr>),
    Or(Vec<NExpr>),
}

impl NExpr {
    fn eval(&self, row: usize) -> bool {
        match self {
            NExpr::Const(b) => *b,
            NExpr::Parent(i) => row >> i & 1 == 1,
            NExpr::Not(e) => !e.eval(row),
            NExpr::And(es) => es.iter().all(|e| e.eval(row)),
            NExpr::Or(es) => es.iter().any(|e| e.eval(row)),
        }
    }
}

const MAX_PARENTS: usize = 16;

impl TraceNet {
    /// A net whose timestep-0 nodes carry the given initial belief.
    pub fn new(initial: &BeliefState) -> Self {
        let mut net = TraceNet::default();
        for (lit, p) in initial.iter() {
            let id = net.push(Node {
                kind: NodeKind::World {
                    literal: lit.clone(),
                    t: 0,
                },
                parents: vec![],
                cpt: Cpt::Root { p_true: p },
                marginal: p,
            });
            net.defs.insert(lit.clone(), vec![(0, id)]);
        }
        net
    }

    fn push(&mut self, node: Node) -> NodeId {
        self.nodes.push(node);
        NodeId(self.nodes.len() - 1)
    }

    /// Timestep of the last action added (0 for a fresh net).
    pub fn frontier(&self) -> usize {
        self.steps.len()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn node(&self, id: NodeId) -> &Node {
        &self.nodes[id.0]
    }

    pub fn nodes(&self) -> impl Iterator<Item = (NodeId, &Node)> {
        self.nodes.iter().enumerate().map(|(i, n)| (NodeId(i), n))
    }

    pub fn steps(&self) -> &[StepRecord] {
        &self.steps
    }

    /// The action executed at timestep `t` (1-based).
    pub fn step(&self, t: usize) -> Option<&StepRecord> {
        t.checked_sub(1).and_then(|i| self.steps.get(i))
    }

    /// Node holding the value of `lit` at timestep `t`, if it was ever
    /// defined at or before `t`.
    pub fn latest(&self, lit: &Literal, t: usize) -> Option<NodeId> {
        self.defs
            .get(lit)?
            .iter()
            .rev()
            .find(|(tt, _)| *tt <= t)
            .map(|(_, id)| *id)
    }

    /// Literals with at least one node.
    pub fn literals(&self) -> impl Iterator<Item = &Literal> {
        self.defs.keys()
    }

    /// Add the action executed at timestep `t`, which must be the frontier + 1.
    pub fn extend(&mut self, action: &GroundAction, t: usize) -> Result<&StepRecord, NetError> {
        let expected = self.frontier() + 1;
        if t != expected {
            return Err(NetError::WrongTimestep { expected, got: t });
        }
        let first_new = self.nodes.len();
        let vars: Vec<NodeId> = action
            .vars
            .iter()
            .enumerate()
            .map(|(index, v)| {
                let p = 1.0 - v.alpha;
                self.push(Node {
                    kind: NodeKind::ActionVar {
                        t,
                        index,
                        action: action.schema.clone(),
                        var: v.name.clone(),
                    },
                    parents: vec![],
                    cpt: Cpt::Root { p_true: p },
                    marginal: p,
                })
            })
            .collect();
        let mut targets: Vec<(Literal, NodeId)> = Vec::new();
        for stmt in &action.statements {
            let mut parents = Vec::new();
            let expr = self.compile(&stmt.expr, t, &vars, &targets, &mut parents);
            if parents.len() > MAX_PARENTS {
                self.nodes.truncate(first_new);
                return Err(NetError::TooManyParents(stmt.target.to_string()));
            }
            let rows = (0..1usize << parents.len()).map(|r| expr.eval(r)).collect();
            let id = self.push(Node {
                kind: NodeKind::World {
                    literal: stmt.target.clone(),
                    t,
                },
                parents,
                cpt: Cpt::Deterministic { rows },
                marginal: 0.0,
            });
            targets.push((stmt.target.clone(), id));
        }
        for (lit, id) in &targets {
            self.defs.entry(lit.clone()).or_default().push((t, *id));
        }
        for (_, id) in &targets {
            let m = infer::query(self, *id, &Evidence::new())
                .expect("forward marginals need no evidence");
            self.nodes[id.0].marginal = m;
        }
        self.steps.push(StepRecord {
            t,
            action: action.clone(),
            vars,
            targets,
        });
        Ok(self.steps.last().unwrap())
    }

    fn compile(
        &self,
        e: &GroundExpr,
        t: usize,
        vars: &[NodeId],
        targets: &[(Literal, NodeId)],
        parents: &mut Vec<NodeId>,
    ) -> NExpr {
        let mut parent = |id: NodeId| {
            let i = parents.iter().position(|p| *p == id).unwrap_or_else(|| {
                parents.push(id);
                parents.len() - 1
            });
            NExpr::Parent(i)
        };
        match e {
            GroundExpr::Const(b) => NExpr::Const(*b),
            GroundExpr::Var(j) => parent(vars[*j]),
            GroundExpr::Prior(l) => match self.latest(l, t - 1) {
                Some(id) => parent(id),
                None => NExpr::Const(false),
            },
            GroundExpr::Next(i) => parent(targets[*i].1),
            GroundExpr::Not(x) => NExpr::Not(Box::new(self.compile(x, t, vars, targets, parents))),
            GroundExpr::And(xs) => NExpr::And(
                xs.iter()
                    .map(|x| self.compile(x, t, vars, targets, parents))
                    .collect(),
            ),
            GroundExpr::Or(xs) => NExpr::Or(
                xs.iter()
                    .map(|x| self.compile(x, t, vars, targets, parents))
                    .collect(),
            ),
        }
    }

    /// Most likely world at timestep `t` under a posterior.
    pub fn ml_world(&self, posterior: &Posterior, t: usize) -> MlWorld {
        self.defs
            .keys()
            .filter(|l| self.latest(l, t).is_some_and(|id| posterior.ml(id)))
            .cloned()
            .collect()
    }

    /// Forward marginals (no evidence), one per node.
    pub fn forward_marginals(&self) -> Posterior {
        Posterior::new(self.nodes.iter().map(|n| n.marginal).collect())
    }

    /// Exact conditional marginals by variable elimination.
    pub fn posterior(&self, evidence: &Evidence) -> Result<Posterior, NetError> {
        self.check(evidence)?;
        if evidence.is_empty() {
            return Ok(self.forward_marginals());
        }
        let probs = (0..self.nodes.len())
            .map(|i| infer::query(self, NodeId(i), evidence))
            .collect::<Result<_, _>>()?;
        Ok(Posterior::new(probs))
    }

    /// Exact conditional marginals by enumerating the joint distribution.
    pub fn brute_force_posterior(&self, evidence: &Evidence) -> Result<Posterior, NetError> {
        self.check(evidence)?;
        infer::enumerate(self, evidence)
    }

    pub fn infer(&self, engine: Inference, evidence: &Evidence) -> Result<Posterior, NetError> {
        match engine {
            Inference::VariableElimination => self.posterior(evidence),
            Inference::BruteForce => self.brute_force_posterior(evidence),
        }
    }

    fn check(&self, evidence: &Evidence) -> Result<(), NetError> {
        match evidence.iter().find(|(id, _)| id.0 >= self.nodes.len()) {
            Some((id, _)) => Err(NetError::UnknownNode(id.0)),
            None => Ok(()),
        }
    }

    /// Nodes that `roots` depend on, including themselves.
    pub(crate) fn ancestors(&self, roots: impl IntoIterator<Item = NodeId>) -> BTreeSet<NodeId> {
        let mut seen = BTreeSet::new();
        let mut stack: Vec<NodeId> = roots.into_iter().collect();
        while let Some(id) = stack.pop() {
            if seen.insert(id) {
                stack.extend(self.nodes[id.0].parents.iter().copied());
            }
        }
        seen
    }

    /// One line per node: `id name | parents | cpt-rows | marginal`.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for (id, n) in self.nodes() {
            let parents: Vec<String> = n.parents.iter().map(|p| p.to_string()).collect();
            let cpt = match &n.cpt {
                Cpt::Root { p_true } => format!("p={p_true:.6}"),
                Cpt::Deterministic { rows } => {
                    rows.iter().map(|b| if *b { '1' } else { '0' }).collect()
                }
            };
            let _ = writeln!(
                out,
                "{id} {} | {} | {cpt} | {:.6}",
                n.kind,
                parents.join(","),
                n.marginal
            );
        }
        out
    }

    /// Graphviz rendering.
    pub fn to_dot(&self) -> String {
        let mut out = String::from("digraph trace {\n  rankdir=LR;\n");
        for (id, n) in self.nodes() {
            let shape = match n.kind {
                NodeKind::World { .. } => "ellipse",
                NodeKind::ActionVar { .. } => "box",
            };
            let label = format!("{}\\n{:.3}", n.kind, n.marginal).replace('"', "\\\"");
            let _ = writeln!(out, "  {id} [shape={shape}, label=\"{label}\"];");
        }
        for (id, n) in self.nodes() {
            for p in &n.parents {
                let _ = writeln!(out, "  {p} -> {id};");
            }
        }
        out.push_str("}\n");
        out
    }
}
