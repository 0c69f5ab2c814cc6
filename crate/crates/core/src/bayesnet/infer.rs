use serde::{Deserialize, Serialize};

use super::factor::Factor;
use super::{Cpt, Evidence, NetError, NodeId, TraceNet};

/// P(node = true) for every node of a net.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Posterior {
    probs: Vec<f64>,
}

impl Posterior {
    pub(crate) fn new(probs: Vec<f64>) -> Self {
        Posterior { probs }
    }

    pub fn prob(&self, id: NodeId) -> f64 {
        self.probs[id.0]
    }

    /// Maximum-likelihood value: true iff p > 0.5.
    pub fn ml(&self, id: NodeId) -> bool {
        self.probs[id.0] > 0.5
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn max_abs_diff(&self, other: &Posterior) -> f64 {
        self.probs
            .iter()
            .zip(&other.probs)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

fn cpt_factor(net: &TraceNet, id: NodeId) -> Factor {
    let node = net.node(id);
    match &node.cpt {
        Cpt::Root { p_true } => Factor::new(vec![id.0], vec![1.0 - p_true, *p_true]),
        Cpt::Deterministic { rows } => {
            // Factor vars must be sorted; parents always precede the node.
            let mut vars: Vec<usize> = node.parents.iter().map(|p| p.0).collect();
            vars.push(id.0);
            let mut order: Vec<usize> = (0..vars.len()).collect();
            order.sort_by_key(|&i| vars[i]);
            let sorted: Vec<usize> = order.iter().map(|&i| vars[i]).collect();
            let k = node.parents.len();
            let mut table = vec![0.0; 1 << sorted.len()];
            for (idx, cell) in table.iter_mut().enumerate() {
                // map sorted-position bits back to (parent row, own value)
                let mut row = 0;
                let mut own = false;
                for (pos, &orig) in order.iter().enumerate() {
                    let bit = idx >> pos & 1 == 1;
                    if orig == k {
                        own = bit;
                    } else if bit {
                        row |= 1 << orig;
                    }
                }
                *cell = f64::from(u8::from(rows[row] == own));
            }
            Factor::new(sorted, table)
        }
    }
}

/// P(query = true | evidence) by variable elimination over the nodes the
/// query and evidence depend on, eliminating latest timesteps first.
pub(crate) fn query(net: &TraceNet, q: NodeId, evidence: &Evidence) -> Result<f64, NetError> {
    let relevant = net.ancestors(std::iter::once(q).chain(evidence.iter().map(|(id, _)| id)));
    let mut factors: Vec<Factor> = relevant.iter().map(|&id| cpt_factor(net, id)).collect();
    factors.extend(evidence.iter().map(|(id, v)| Factor::indicator(id.0, v)));
    let mut order: Vec<NodeId> = relevant.into_iter().filter(|id| *id != q).collect();
    order.sort_by_key(|id| std::cmp::Reverse((net.node(*id).kind.timestep(), id.0)));
    for var in order {
        let (with, without): (Vec<Factor>, Vec<Factor>) =
            factors.into_iter().partition(|f| f.mentions(var.0));
        factors = without;
        if with.is_empty() {
            continue;
        }
        let mut f = Factor::product(&with).sum_out(var.0);
        if !f.rescale() {
            return Err(NetError::InconsistentEvidence);
        }
        factors.push(f);
    }
    let f = Factor::product(&factors);
    debug_assert_eq!(f.vars, vec![q.0]);
    let (p0, p1) = (f.table[0], f.table[1]);
    let z = p0 + p1;
    if z <= 0.0 || !z.is_finite() {
        return Err(NetError::InconsistentEvidence);
    }
    Ok(p1 / z)
}

pub(crate) const ENUMERATION_LIMIT: usize = 24;

/// Marginals by depth-first enumeration of the joint in node order,
/// skipping zero-probability branches.
pub(crate) fn enumerate(net: &TraceNet, evidence: &Evidence) -> Result<Posterior, NetError> {
    let n = net.len();
    if n > ENUMERATION_LIMIT {
        return Err(NetError::TooLarge {
            nodes: n,
            limit: ENUMERATION_LIMIT,
        });
    }
    let ev: Vec<Option<bool>> = (0..n).map(|i| evidence.get(NodeId(i))).collect();
    let mut state = vec![false; n];
    let mut mass = vec![0.0; n];
    let mut z = 0.0;
    dfs(net, &ev, 0, 1.0, &mut state, &mut mass, &mut z);
    if z <= 0.0 {
        return Err(NetError::InconsistentEvidence);
    }
    Ok(Posterior::new(mass.into_iter().map(|m| m / z).collect()))
}

fn dfs(
    net: &TraceNet,
    ev: &[Option<bool>],
    i: usize,
    w: f64,
    state: &mut Vec<bool>,
    mass: &mut Vec<f64>,
    z: &mut f64,
) {
    if i == state.len() {
        *z += w;
        for (m, s) in mass.iter_mut().zip(state.iter()) {
            if *s {
                *m += w;
            }
        }
        return;
    }
    let node = net.node(NodeId(i));
    let row = node
        .parents
        .iter()
        .enumerate()
        .fold(0, |r, (k, p)| r | (usize::from(state[p.0]) << k));
    let p = node.p_true(row);
    for value in [false, true] {
        if ev[i].is_some_and(|e| e != value) {
            continue;
        }
        let wv = w * if value { p } else { 1.0 - p };
        if wv == 0.0 {
            continue;
        }
        state[i] = value;
        dfs(net, ev, i + 1, wv, state, mass, z);
    }
}
