//! Runs a task program against an environment: precondition check, dispatch,
//! belief update; failures go through diagnosis and, when the cause is an
//! unmet postcondition, through re-execution of a minimal set of past actions.

mod log;

use std::collections::VecDeque;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bayesnet::{Evidence, Inference, TraceNet};
use crate::bssr::{forward_update, BeliefState, Literal, MlWorld};
use crate::diagnosis::{detect, diagnose, net_evidence, Diagnosis, FailureClass};
use crate::model::{bind_call, ActionCall, GroundAction, RobotModel};
use crate::recovery::{search_min_trace, simulate, PerforatedTrace};
use crate::task::{Cursor, PromptRequest, Step, TaskProgram};

pub use log::{log_to_json, render_log, EventKind, TraceEvent};

/// What the environment reports back for a dispatched action.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ActionOutcome {
    Confirmed,
    /// The human (or the robot) reports it could not do it; the label keys
    /// into the schema's failure evidence.
    Cannot(String),
    Timeout,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PortError {
    #[error("environment disconnected: {0}")]
    Disconnected(String),
}

/// An action handed to the environment.
#[derive(Clone, Debug)]
pub struct Dispatch<'a> {
    pub t: usize,
    pub call: &'a ActionCall,
    pub action: &'a GroundAction,
    /// Human-facing text for interactions, with arguments filled in.
    pub prompt: Option<String>,
    /// Failure labels the human may choose from.
    pub labels: Vec<String>,
}

/// The boundary to the world: a simulator, a terminal, or a remote console.
pub trait EnvironmentPort {
    fn execute(&mut self, dispatch: &Dispatch<'_>) -> Result<ActionOutcome, PortError>;
    /// Ask a program-level question; returns the chosen button.
    fn prompt(&mut self, request: &PromptRequest) -> Result<String, PortError>;
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExecutorConfig {
    /// Diagnosis rounds allowed per original failure.
    pub retry_limit: usize,
    pub inference: Inference,
}

impl Default for ExecutorConfig {
    fn default() -> Self {
        ExecutorConfig {
            retry_limit: 3,
            inference: Inference::VariableElimination,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum RunStatus {
    Done,
    Unrecoverable(String),
    RetryLimit,
}

impl RunStatus {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunStatus::Done => 0,
            RunStatus::Unrecoverable(_) => 2,
            RunStatus::RetryLimit => 3,
        }
    }
}

/// How a failure was first noticed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Detection {
    /// The belief predicted the precondition false before dispatch.
    Predicted,
    /// The environment reported the action failed.
    Reported,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FailureRecord {
    pub detection: Detection,
    pub diagnosis: Diagnosis,
    /// Set when a re-execution search was run.
    pub problem: Option<RecoveryProblem>,
    pub trace: Option<PerforatedTrace>,
}

/// Input of the re-execution search for one failure.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecoveryProblem {
    /// Executed calls followed by the failed one.
    pub history: Vec<ActionCall>,
    pub forced: Vec<usize>,
    pub start: MlWorld,
}

/// Live updates for observers such as the console server.
#[derive(Debug)]
pub enum Notification<'a> {
    Event(&'a TraceEvent),
    Belief { t: usize, belief: &'a BeliefState },
}

#[derive(Clone, Debug)]
struct Pending {
    call: ActionCall,
    /// Last action of a recovery trace.
    closes_trace: bool,
}

/// State of one program execution.
pub struct Session<'m> {
    model: &'m RobotModel,
    program: &'m TaskProgram,
    config: ExecutorConfig,
    cursor: Cursor,
    belief: BeliefState,
    net: TraceNet,
    /// Calls executed so far, parallel to the net's timesteps.
    history: Vec<ActionCall>,
    evidence: Evidence,
    pending: VecDeque<Pending>,
    rounds: usize,
    log: Vec<TraceEvent>,
    failures: Vec<FailureRecord>,
    beliefs: Vec<BeliefState>,
}

enum Flow {
    Continue,
    Stop(RunStatus),
}

fn render_prompt(text: &str, action: &GroundAction) -> String {
    let mut out = text.to_string();
    for (p, o) in &action.args {
        out = out.replace(&format!("{{?{p}}}"), o);
    }
    out
}

fn literals(lits: &[(Literal, bool)]) -> String {
    let parts: Vec<String> = lits
        .iter()
        .map(|(l, v)| format!("{l}={}", if *v { "T" } else { "F" }))
        .collect();
    format!("{{{}}}", parts.join(","))
}

impl<'m> Session<'m> {
    pub fn new(model: &'m RobotModel, program: &'m TaskProgram, config: ExecutorConfig) -> Self {
        let belief = BeliefState::new();
        Session {
            model,
            program,
            config,
            cursor: Cursor::new(),
            net: TraceNet::new(&belief),
            beliefs: vec![belief.clone()],
            belief,
            history: Vec::new(),
            evidence: Evidence::new(),
            pending: VecDeque::new(),
            rounds: 0,
            log: Vec::new(),
            failures: Vec::new(),
        }
    }

    pub fn log(&self) -> &[TraceEvent] {
        &self.log
    }

    pub fn net(&self) -> &TraceNet {
        &self.net
    }

    pub fn belief(&self) -> &BeliefState {
        &self.belief
    }

    /// Belief after each timestep, starting with the initial one.
    pub fn beliefs(&self) -> &[BeliefState] {
        &self.beliefs
    }

    pub fn failures(&self) -> &[FailureRecord] {
        &self.failures
    }

    /// Calls executed so far, one per timestep.
    pub fn history(&self) -> &[ActionCall] {
        &self.history
    }

    /// Number of actions executed as part of recovery traces.
    pub fn reexecuted(&self) -> usize {
        self.log
            .iter()
            .filter(|e| e.kind == EventKind::RecoveryPlan)
            .filter_map(|e| e.payload.rsplit("len=").next()?.parse::<usize>().ok())
            .sum()
    }

    fn emit(
        &mut self,
        t: usize,
        kind: EventKind,
        payload: impl Into<String>,
        notify: &mut dyn FnMut(Notification),
    ) {
        self.log.push(TraceEvent {
            t,
            kind,
            payload: payload.into(),
        });
        notify(Notification::Event(self.log.last().unwrap()));
    }

    fn abort(&mut self, t: usize, reason: String, notify: &mut dyn FnMut(Notification)) -> Flow {
        self.emit(t, EventKind::Abort, reason.clone(), notify);
        Flow::Stop(RunStatus::Unrecoverable(reason))
    }

    /// Execute until the program ends or a failure cannot be recovered.
    pub fn run(
        &mut self,
        port: &mut dyn EnvironmentPort,
        notify: &mut dyn FnMut(Notification),
    ) -> RunStatus {
        notify(Notification::Belief {
            t: 0,
            belief: &self.belief,
        });
        loop {
            if let Flow::Stop(status) = self.step(port, notify) {
                return status;
            }
        }
    }

    fn step(
        &mut self,
        port: &mut dyn EnvironmentPort,
        notify: &mut dyn FnMut(Notification),
    ) -> Flow {
        let frontier = self.net.frontier();
        let (call, closes_trace) = match self.pending.pop_front() {
            Some(p) => (p.call, p.closes_trace),
            None => match self.cursor.next(self.program) {
                Ok(Step::Done) => {
                    self.emit(frontier, EventKind::Done, "", notify);
                    return Flow::Stop(RunStatus::Done);
                }
                Ok(Step::Prompt(req)) => {
                    let shown = format!("{:?} {:?}", req.message, req.buttons);
                    self.emit(frontier, EventKind::PromptShown, shown, notify);
                    let answer = match port.prompt(&req) {
                        Ok(a) => a,
                        Err(e) => return self.abort(frontier, e.to_string(), notify),
                    };
                    if let Err(e) = self.cursor.answer(&answer) {
                        return self.abort(frontier, e.to_string(), notify);
                    }
                    self.emit(
                        frontier,
                        EventKind::PromptAnswered,
                        format!("{answer:?}"),
                        notify,
                    );
                    return Flow::Continue;
                }
                Ok(Step::Action(req)) => {
                    self.rounds = 0;
                    match bind_call(self.model, &req.name, &req.arg_spec(), &self.belief) {
                        Ok(c) => (c, false),
                        Err(e) => {
                            return self.abort(
                                frontier + 1,
                                format!("line {}: {e}", req.line),
                                notify,
                            )
                        }
                    }
                }
                Err(e) => return self.abort(frontier + 1, e.to_string(), notify),
            },
        };
        let t = frontier + 1;
        let action = match call.ground(self.model, &self.belief) {
            Ok(g) => g,
            Err(e) => return self.abort(t, e.to_string(), notify),
        };
        self.emit(t, EventKind::ActionStart, action.to_string(), notify);

        if let Some(violated) = detect(&self.belief, &action) {
            self.emit(t, EventKind::PrecondFail, literals(&violated), notify);
            return self.predicted_failure(call, action, violated, notify);
        }

        let schema = &self.model.actions[&call.schema];
        let dispatch = Dispatch {
            t,
            call: &call,
            action: &action,
            prompt: schema.prompt.as_ref().map(|p| render_prompt(p, &action)),
            labels: schema.failure_evidence.keys().cloned().collect(),
        };
        let outcome = match port.execute(&dispatch) {
            Ok(o) => o,
            Err(e) => return self.abort(t, e.to_string(), notify),
        };
        match outcome {
            ActionOutcome::Confirmed => {
                self.emit(t, EventKind::ActionOk, "", notify);
                self.belief = forward_update(&self.belief, &action);
                self.net
                    .extend(&action, t)
                    .expect("timestep follows the frontier");
                self.history.push(call);
                self.beliefs.push(self.belief.clone());
                notify(Notification::Belief {
                    t,
                    belief: &self.belief,
                });
                if closes_trace {
                    self.emit(t, EventKind::Resume, "", notify);
                }
                Flow::Continue
            }
            ActionOutcome::Cannot(label) => {
                self.emit(t, EventKind::ActionCannot, label.clone(), notify);
                self.reported_failure(call, action, &label, notify)
            }
            ActionOutcome::Timeout => {
                self.emit(t, EventKind::ActionCannot, "timeout", notify);
                let schema = &self.model.actions[&call.schema];
                let label = if schema.failure_evidence.contains_key("timeout") {
                    "timeout".to_string()
                } else {
                    schema
                        .default_failure_label()
                        .unwrap_or("cannot")
                        .to_string()
                };
                self.reported_failure(call, action, &label, notify)
            }
        }
    }

    /// The belief already says the precondition is false: no inference, the
    /// predicting action is reported and the run stops.
    fn predicted_failure(
        &mut self,
        _call: ActionCall,
        action: GroundAction,
        violated: Vec<(Literal, bool)>,
        notify: &mut dyn FnMut(Notification),
    ) -> Flow {
        let t = self.net.frontier() + 1;
        let diagnosis = Diagnosis {
            t_f: t,
            r_f: violated.into_iter().map(|(l, _)| l).collect(),
            class: FailureClass::UnintendedEffect,
            culprit: Some(action),
            detected_at: t,
            divergent: false,
            posterior: None,
        };
        self.emit(t, EventKind::Diagnosis, diagnosis.to_string(), notify);
        let reason = format!(
            "predicted failure of {}",
            diagnosis.culprit.as_ref().unwrap()
        );
        self.failures.push(FailureRecord {
            detection: Detection::Predicted,
            diagnosis,
            problem: None,
            trace: None,
        });
        self.abort(t, reason, notify)
    }

    fn reported_failure(
        &mut self,
        call: ActionCall,
        action: GroundAction,
        label: &str,
        notify: &mut dyn FnMut(Notification),
    ) -> Flow {
        let frontier = self.net.frontier();
        let t = frontier + 1;
        self.rounds += 1;
        if self.rounds > self.config.retry_limit {
            let reason = format!("retry limit of {} rounds exceeded", self.config.retry_limit);
            self.emit(t, EventKind::Abort, reason, notify);
            return Flow::Stop(RunStatus::RetryLimit);
        }
        let lits = match self.model.failure_evidence(&call, label, &self.belief) {
            Ok(Some(l)) => l,
            Ok(None) => {
                let fallback = self.model.actions[&call.schema]
                    .default_failure_label()
                    .map(str::to_string);
                fallback
                    .and_then(|l| {
                        self.model
                            .failure_evidence(&call, &l, &self.belief)
                            .ok()
                            .flatten()
                    })
                    .unwrap_or_default()
            }
            Err(e) => return self.abort(t, e.to_string(), notify),
        };
        let new = match net_evidence(&self.net, &lits, frontier) {
            Ok(e) => e,
            Err(e) => return self.abort(t, e.to_string(), notify),
        };
        let diagnosis = match diagnose(
            &self.net,
            &self.evidence,
            &new,
            &action,
            self.config.inference,
        ) {
            Ok(d) => d,
            Err(e) => return self.abort(t, format!("diagnosis failed: {e}"), notify),
        };
        self.evidence = self.evidence.union(&new);
        self.emit(t, EventKind::Diagnosis, diagnosis.to_string(), notify);

        if diagnosis.class == FailureClass::UnintendedEffect {
            let reason = match &diagnosis.culprit {
                Some(a) => format!("unintended effect of {a} at t={}", diagnosis.t_f),
                None => format!("unintended effect at t={}", diagnosis.t_f),
            };
            self.failures.push(FailureRecord {
                detection: Detection::Reported,
                diagnosis,
                problem: None,
                trace: None,
            });
            return self.abort(t, reason, notify);
        }

        let mut history = self.history.clone();
        history.push(call);
        let posterior = diagnosis
            .posterior
            .as_ref()
            .expect("diagnosis carries its posterior");
        let start = self.net.ml_world(posterior, frontier);
        let problem = RecoveryProblem {
            forced: vec![diagnosis.t_f - 1, history.len() - 1],
            history,
            start,
        };
        let (history, start) = (&problem.history, &problem.start);
        let trace = match search_min_trace(self.model, history, &problem.forced, start) {
            Ok(tr) => tr,
            Err(e) => {
                self.failures.push(FailureRecord {
                    detection: Detection::Reported,
                    diagnosis,
                    problem: Some(problem),
                    trace: None,
                });
                return self.abort(t, e.to_string(), notify);
            }
        };
        if let Err(e) = simulate(self.model, history, &trace, start) {
            return self.abort(
                t,
                format!("internal error: recovery trace rejected by simulator: {e:?}"),
                notify,
            );
        }
        self.emit(t, EventKind::RecoveryPlan, trace.to_string(), notify);
        let positions = trace.positions();
        let calls: Vec<String> = positions.iter().map(|&i| history[i].to_string()).collect();
        self.emit(t, EventKind::RecoveryStart, calls.join(" "), notify);
        for (k, &i) in positions.iter().enumerate().rev() {
            self.pending.push_front(Pending {
                call: history[i].clone(),
                closes_trace: k + 1 == positions.len(),
            });
        }
        self.failures.push(FailureRecord {
            detection: Detection::Reported,
            diagnosis,
            problem: Some(problem),
            trace: Some(trace),
        });
        Flow::Continue
    }
}

impl fmt::Debug for Session<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Session")
            .field("frontier", &self.net.frontier())
            .field("events", &self.log.len())
            .finish()
    }
}
