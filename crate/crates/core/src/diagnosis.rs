//! Failure detection and diagnosis: find the first timestep whose most
//! likely world changes once the failure evidence is taken into account, and
//! decide whether that step's action simply did not achieve its
//! postcondition.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bayesnet::{Evidence, Inference, NetError, NodeKind, Posterior, TraceNet};
use crate::bssr::{ml_literal, BeliefState, Literal};
use crate::model::GroundAction;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DiagnosisError {
    #[error(transparent)]
    Net(#[from] NetError),
    #[error("evidence {0} = true concerns a literal the robot never believed in")]
    UndefinedLiteral(Literal),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum FailureClass {
    PostconditionFailure,
    UnintendedEffect,
}

impl fmt::Display for FailureClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FailureClass::PostconditionFailure => "PostconditionFailure",
            FailureClass::UnintendedEffect => "UnintendedEffect",
        })
    }
}

/// Literal values that make a precondition fail: each unsatisfied conjunct
/// is asserted false. `None` when the precondition holds.
pub fn detect(state: &BeliefState, action: &GroundAction) -> Option<Vec<(Literal, bool)>> {
    let failed: Vec<(Literal, bool)> = action
        .precondition
        .iter()
        .filter(|(l, positive)| ml_literal(state, l) != *positive)
        .map(|(l, positive)| (l.clone(), !positive))
        .collect();
    (!failed.is_empty()).then_some(failed)
}

/// Attach literal observations to the nodes holding their values at `t`.
///
/// A literal with no node is false by definition, so observing it false
/// carries no information and is dropped.
pub fn net_evidence(
    net: &TraceNet,
    lits: &[(Literal, bool)],
    t: usize,
) -> Result<Evidence, DiagnosisError> {
    let mut e = Evidence::new();
    for (lit, value) in lits {
        match net.latest(lit, t) {
            Some(id) => {
                if !e.observe(id, *value) {
                    return Err(NetError::InconsistentEvidence.into());
                }
            }
            None if !value => {}
            None => return Err(DiagnosisError::UndefinedLiteral(lit.clone())),
        }
    }
    Ok(e)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Diagnosis {
    /// Timestep of the first divergence (the detection step if none).
    pub t_f: usize,
    pub r_f: Vec<Literal>,
    pub class: FailureClass,
    /// Action executed at `t_f`; `None` for a divergence in the initial world.
    pub culprit: Option<GroundAction>,
    /// Timestep the failing action would have occupied.
    pub detected_at: usize,
    /// False when the evidence did not change any ML value.
    pub divergent: bool,
    /// Posterior given all evidence so far.
    #[serde(skip)]
    pub posterior: Option<Posterior>,
}

impl fmt::Display for Diagnosis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let r: Vec<String> = self.r_f.iter().map(|l| l.to_string()).collect();
        write!(
            f,
            "DIAG t_f={} r_f={{{}}} class={} culprit=",
            self.t_f,
            r.join(","),
            self.class
        )?;
        match &self.culprit {
            Some(a) => write!(f, "{a}"),
            None => f.write_str("none"),
        }
    }
}

/// First timestep at which the ML value of some literal under `after`
/// differs from `before`, together with the differing literals.
pub fn localize(
    net: &TraceNet,
    before: &Posterior,
    after: &Posterior,
) -> Option<(usize, Vec<Literal>)> {
    let mut found: Option<(usize, Vec<Literal>)> = None;
    for (id, node) in net.nodes() {
        let NodeKind::World { literal, t } = &node.kind else {
            continue;
        };
        if found.as_ref().is_some_and(|(tf, _)| t > tf) {
            break;
        }
        if before.ml(id) != after.ml(id) {
            found
                .get_or_insert_with(|| (*t, Vec::new()))
                .1
                .push(literal.clone());
        }
    }
    found.map(|(t, mut lits)| {
        lits.sort();
        (t, lits)
    })
}

/// Postcondition failure iff every diverging literal is mentioned by the
/// culprit's postcondition and its success variable is most likely false.
pub fn classify(
    net: &TraceNet,
    t_f: usize,
    r_f: &[Literal],
    posterior: &Posterior,
) -> FailureClass {
    let Some(step) = net.step(t_f) else {
        return FailureClass::UnintendedEffect;
    };
    let in_post = r_f.iter().all(|l| step.action.mentions_in_postcondition(l));
    let failed = step.success().is_some_and(|s| !posterior.ml(s));
    if in_post && failed {
        FailureClass::PostconditionFailure
    } else {
        FailureClass::UnintendedEffect
    }
}

/// Diagnose a failure detected while executing `failed` at timestep
/// `net.frontier() + 1`.
///
/// `prior` is the evidence from earlier diagnosis rounds; divergence is
/// measured against the posterior under it, so a failure already explained
/// is not blamed again.
pub fn diagnose(
    net: &TraceNet,
    prior: &Evidence,
    new: &Evidence,
    failed: &GroundAction,
    engine: Inference,
) -> Result<Diagnosis, DiagnosisError> {
    let before = net.infer(engine, prior)?;
    let after = net.infer(engine, &prior.union(new))?;
    let detected_at = net.frontier() + 1;
    Ok(match localize(net, &before, &after) {
        Some((t_f, r_f)) => Diagnosis {
            t_f,
            class: classify(net, t_f, &r_f, &after),
            culprit: net.step(t_f).map(|s| s.action.clone()),
            r_f,
            detected_at,
            divergent: true,
            posterior: Some(after),
        },
        None => {
            let mut r_f: Vec<Literal> = new
                .iter()
                .filter_map(|(id, _)| net.node(id).kind.literal().cloned())
                .collect();
            if r_f.is_empty() {
                r_f = failed.precondition.iter().map(|(l, _)| l.clone()).collect();
            }
            r_f.sort();
            r_f.dedup();
            Diagnosis {
                t_f: detected_at,
                r_f,
                // the detecting action has no node, so nothing shows it failed
                class: FailureClass::UnintendedEffect,
                culprit: Some(failed.clone()),
                detected_at,
                divergent: false,
                posterior: Some(after),
            }
        }
    })
}
