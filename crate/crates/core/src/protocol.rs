//! Console wire protocol: one JSON object per WebSocket text message.

use serde::{Deserialize, Serialize};

use crate::bssr::BeliefState;
use crate::executor::{ActionOutcome, Dispatch, TraceEvent};

pub const CONFIRM: &str = "confirm";
const CANNOT_PREFIX: &str = "cannot: ";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LiteralProb {
    pub name: String,
    pub p: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum ServerMessage {
    Prompt {
        id: u64,
        text: String,
        buttons: Vec<String>,
    },
    Event {
        event: TraceEvent,
    },
    Belief {
        timestep: usize,
        literals: Vec<LiteralProb>,
    },
    Done {
        exit_code: i32,
    },
    Abort {
        reason: String,
        exit_code: i32,
    },
    Error {
        message: String,
    },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum ClientMessage {
    Answer { id: u64, button: String },
    Pause,
    Resume,
}

impl ServerMessage {
    pub fn belief(timestep: usize, belief: &BeliefState) -> Self {
        ServerMessage::Belief {
            timestep,
            literals: belief
                .iter()
                .map(|(l, p)| LiteralProb {
                    name: l.to_string(),
                    p,
                })
                .collect(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("messages serialize")
    }
}

impl ClientMessage {
    /// Parse a client message; the error text is meant for an `error` reply.
    pub fn parse(text: &str) -> Result<Self, String> {
        serde_json::from_str(text.trim()).map_err(|e| format!("bad message: {e}"))
    }
}

/// Text and buttons for asking a human to carry out or confirm an action.
pub fn action_prompt(dispatch: &Dispatch<'_>) -> (String, Vec<String>) {
    let text = dispatch
        .prompt
        .clone()
        .unwrap_or_else(|| format!("Robot performs {}. Did it succeed?", dispatch.action));
    let mut buttons = vec![CONFIRM.to_string()];
    buttons.extend(
        dispatch
            .labels
            .iter()
            .map(|l| format!("{CANNOT_PREFIX}{l}")),
    );
    (text, buttons)
}

/// Outcome for a pressed action button.
pub fn outcome_for(button: &str) -> Option<ActionOutcome> {
    if button == CONFIRM {
        Some(ActionOutcome::Confirmed)
    } else {
        button
            .strip_prefix(CANNOT_PREFIX)
            .map(|l| ActionOutcome::Cannot(l.to_string()))
    }
}
