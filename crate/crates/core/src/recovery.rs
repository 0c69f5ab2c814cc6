//! Recovery by re-executing a minimal subsequence of past actions.
//!
//! A perforated trace keeps or drops each past action. It is valid when,
//! starting from the repaired world, every kept action's precondition holds
//! at its turn, with kept actions applying their effects as if they
//! succeeded. The search returns a shortest valid trace; among equally short
//! ones it prefers the one keeping the most recent actions.

use std::collections::{HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bssr::MlWorld;
use crate::model::{ActionCall, RobotModel};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RecoveryError {
    #[error("no valid re-execution of past actions reaches the failed action")]
    NoValidTrace,
    #[error("history of {len} actions is too long to enumerate (limit {limit})")]
    TooLong { len: usize, limit: usize },
    #[error("forced index {index} outside a history of {len} actions")]
    BadForcedIndex { index: usize, len: usize },
}

/// Which history entries to re-execute.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PerforatedTrace {
    pub include: Vec<bool>,
}

impl PerforatedTrace {
    pub fn len(&self) -> usize {
        self.include.iter().filter(|b| **b).count()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// 0-based history positions of the kept actions.
    pub fn positions(&self) -> Vec<usize> {
        (0..self.include.len())
            .filter(|&i| self.include[i])
            .collect()
    }

    /// Whether `self` is preferred over `other` among equally long traces:
    /// the first difference, scanning from the end, keeps the action.
    pub fn later_than(&self, other: &PerforatedTrace) -> bool {
        for (a, b) in self.include.iter().zip(&other.include).rev() {
            if a != b {
                return *a;
            }
        }
        false
    }
}

impl fmt::Display for PerforatedTrace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let idx: Vec<String> = self
            .positions()
            .iter()
            .map(|i| (i + 1).to_string())
            .collect();
        write!(f, "RECOVER include=[{}] len={}", idx.join(","), self.len())
    }
}

/// Why a candidate trace is invalid.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Invalid {
    Grounding { position: usize, reason: String },
    Precondition { position: usize },
}

/// Replay the kept actions from `start`, returning the final world.
pub fn simulate(
    model: &RobotModel,
    history: &[ActionCall],
    trace: &PerforatedTrace,
    start: &MlWorld,
) -> Result<MlWorld, Invalid> {
    let mut world = start.clone();
    for i in trace.positions() {
        let g = history[i]
            .ground(model, &world)
            .map_err(|e| Invalid::Grounding {
                position: i,
                reason: e.to_string(),
            })?;
        if !world.satisfies(&g.precondition) {
            return Err(Invalid::Precondition { position: i });
        }
        g.apply_nominal(&mut world);
    }
    Ok(world)
}

pub fn is_valid(
    model: &RobotModel,
    history: &[ActionCall],
    trace: &PerforatedTrace,
    start: &MlWorld,
) -> bool {
    simulate(model, history, trace, start).is_ok()
}

fn forced_mask(len: usize, forced: &[usize]) -> Result<Vec<bool>, RecoveryError> {
    let mut mask = vec![false; len];
    for &f in forced {
        if f >= len {
            return Err(RecoveryError::BadForcedIndex { index: f, len });
        }
        mask[f] = true;
    }
    Ok(mask)
}

struct Levels<'a> {
    model: &'a RobotModel,
    history: &'a [ActionCall],
    /// reached[i]: worlds before position `i` reachable by a valid prefix
    /// keeping every forced position, with the fewest kept actions.
    reached: Vec<HashMap<MlWorld, usize>>,
    steps: HashMap<(usize, MlWorld), Option<MlWorld>>,
}

impl Levels<'_> {
    /// World after keeping position `k` in `world`, if its precondition holds.
    fn step(&mut self, k: usize, world: &MlWorld) -> Option<MlWorld> {
        if let Some(r) = self.steps.get(&(k, world.clone())) {
            return r.clone();
        }
        let next = self.history[k]
            .ground(self.model, world)
            .ok()
            .and_then(|g| {
                world.satisfies(&g.precondition).then(|| {
                    let mut w = world.clone();
                    g.apply_nominal(&mut w);
                    w
                })
            });
        self.steps.insert((k, world.clone()), next.clone());
        next
    }
}

/// Shortest valid trace through `history` keeping every `forced` position.
///
/// Planning-graph style: a forward pass records, level by level, the worlds
/// reachable by valid prefixes and their cheapest cost; a backward pass then
/// extracts the trace from the last position down, keeping an action
/// whenever some reachable world still completes the chosen suffix within
/// budget. The backward pass never backtracks, and trying "keep" first at
/// each position yields the tie-break of [`PerforatedTrace::later_than`].
pub fn search_min_trace(
    model: &RobotModel,
    history: &[ActionCall],
    forced: &[usize],
    start: &MlWorld,
) -> Result<PerforatedTrace, RecoveryError> {
    let n = history.len();
    let mask = forced_mask(n, forced)?;
    let mut lv = Levels {
        model,
        history,
        reached: vec![HashMap::from([(start.clone(), 0)])],
        steps: HashMap::new(),
    };
    for (k, &forced_here) in mask.iter().enumerate() {
        let mut next: HashMap<MlWorld, usize> = HashMap::new();
        let here: Vec<(MlWorld, usize)> =
            lv.reached[k].iter().map(|(w, c)| (w.clone(), *c)).collect();
        for (w, c) in here {
            if let Some(w2) = lv.step(k, &w) {
                let e = next.entry(w2).or_insert(c + 1);
                *e = (*e).min(c + 1);
            }
            if !forced_here {
                let e = next.entry(w).or_insert(c);
                *e = (*e).min(c);
            }
        }
        lv.reached.push(next);
    }
    let Some(&best) = lv.reached[n].values().min() else {
        return Err(RecoveryError::NoValidTrace);
    };
    // `targets`: worlds at the current position from which the chosen suffix
    // runs, and that a prefix within the remaining budget reaches
    let mut targets: HashSet<MlWorld> = lv.reached[n].keys().cloned().collect();
    let mut budget = best;
    let mut include = vec![false; n];
    for k in (0..n).rev() {
        let candidates: Vec<(MlWorld, usize)> =
            lv.reached[k].iter().map(|(w, c)| (w.clone(), *c)).collect();
        let kept: HashSet<MlWorld> = if budget > 0 {
            candidates
                .iter()
                .filter(|(w, c)| {
                    *c < budget && lv.step(k, w).is_some_and(|w2| targets.contains(&w2))
                })
                .map(|(w, _)| w.clone())
                .collect()
        } else {
            HashSet::new()
        };
        if !kept.is_empty() {
            include[k] = true;
            budget -= 1;
            targets = kept;
        } else {
            debug_assert!(
                !mask[k],
                "forced position unreachable despite a valid trace"
            );
            targets = candidates
                .into_iter()
                .filter(|(w, c)| *c <= budget && targets.contains(w))
                .map(|(w, _)| w)
                .collect();
        }
    }
    debug_assert!(targets.contains(start));
    Ok(PerforatedTrace { include })
}

pub const BRUTE_FORCE_LIMIT: usize = 20;

/// Reference implementation: enumerate every vector with the forced bits
/// set, abandoning a vector as soon as a kept action is invalid.
pub fn brute_force_trace(
    model: &RobotModel,
    history: &[ActionCall],
    forced: &[usize],
    start: &MlWorld,
) -> Result<PerforatedTrace, RecoveryError> {
    let n = history.len();
    if n > BRUTE_FORCE_LIMIT {
        return Err(RecoveryError::TooLong {
            len: n,
            limit: BRUTE_FORCE_LIMIT,
        });
    }
    let mask = forced_mask(n, forced)?;
    let mut best: Option<PerforatedTrace> = None;
    let mut include = vec![false; n];
    enumerate(model, history, &mask, 0, start, &mut include, &mut best);
    best.ok_or(RecoveryError::NoValidTrace)
}

fn enumerate(
    model: &RobotModel,
    history: &[ActionCall],
    mask: &[bool],
    k: usize,
    world: &MlWorld,
    include: &mut Vec<bool>,
    best: &mut Option<PerforatedTrace>,
) {
    if k == history.len() {
        let cand = PerforatedTrace {
            include: include.clone(),
        };
        let better = match best {
            None => true,
            Some(b) => cand.len() < b.len() || (cand.len() == b.len() && cand.later_than(b)),
        };
        if better {
            *best = Some(cand);
        }
        return;
    }
    if !mask[k] {
        include[k] = false;
        enumerate(model, history, mask, k + 1, world, include, best);
    }
    if let Ok(g) = history[k].ground(model, world) {
        if world.satisfies(&g.precondition) {
            let mut next = world.clone();
            g.apply_nominal(&mut next);
            include[k] = true;
            enumerate(model, history, mask, k + 1, &next, include, best);
            include[k] = false;
        }
    }
}
