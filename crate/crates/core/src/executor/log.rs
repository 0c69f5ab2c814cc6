use std::fmt;

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum EventKind {
    ActionStart,
    ActionOk,
    ActionCannot,
    PromptShown,
    PromptAnswered,
    PrecondFail,
    Diagnosis,
    RecoveryPlan,
    RecoveryStart,
    Resume,
    Abort,
    Done,
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

/// One line of the trace log: `t=<k> <Kind> <payload>`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceEvent {
    pub t: usize,
    pub kind: EventKind,
    pub payload: String,
}

impl fmt::Display for TraceEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "t={} {}", self.t, self.kind)?;
        if !self.payload.is_empty() {
            write!(f, " {}", self.payload)?;
        }
        Ok(())
    }
}

/// Render a log in its line format.
pub fn render_log(events: &[TraceEvent]) -> String {
    let mut out = String::new();
    for e in events {
        out.push_str(&e.to_string());
        out.push('\n');
    }
    out
}

/// Render a log as a JSON array.
pub fn log_to_json(events: &[TraceEvent]) -> String {
    serde_json::to_string_pretty(events).expect("events serialize")
}
