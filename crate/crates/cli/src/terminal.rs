use std::io::{self, BufRead, Write};

use robotask::executor::{ActionOutcome, Dispatch, EnvironmentPort, PortError};
use robotask::protocol::{action_prompt, outcome_for};
use robotask::task::PromptRequest;

/// Asks on stderr and reads answers from stdin, by number or button text.
pub struct TerminalPort {
    input: io::StdinLock<'static>,
}

impl TerminalPort {
    pub fn new() -> Self {
        TerminalPort {
            input: io::stdin().lock(),
        }
    }

    fn choose(&mut self, text: &str, buttons: &[String]) -> Result<String, PortError> {
        loop {
            let mut err = io::stderr();
            let _ = writeln!(err, "{text}");
            for (i, b) in buttons.iter().enumerate() {
                let _ = writeln!(err, "  [{}] {b}", i + 1);
            }
            let _ = write!(err, "> ");
            let _ = err.flush();
            let mut line = String::new();
            match self.input.read_line(&mut line) {
                Ok(0) | Err(_) => return Err(PortError::Disconnected("end of input".into())),
                Ok(_) => {}
            }
            let line = line.trim();
            if let Ok(n) = line.parse::<usize>() {
                if let Some(b) = n.checked_sub(1).and_then(|i| buttons.get(i)) {
                    return Ok(b.clone());
                }
            }
            if let Some(b) = buttons.iter().find(|b| *b == line) {
                return Ok(b.clone());
            }
        }
    }
}

impl EnvironmentPort for TerminalPort {
    fn execute(&mut self, dispatch: &Dispatch<'_>) -> Result<ActionOutcome, PortError> {
        let (text, buttons) = action_prompt(dispatch);
        let b = self.choose(&text, &buttons)?;
        Ok(outcome_for(&b).expect("button from the offered list"))
    }

    fn prompt(&mut self, request: &PromptRequest) -> Result<String, PortError> {
        self.choose(&request.message, &request.buttons)
    }
}
