//! The non-expert tier: straight-line programs of action calls, prompts,
//! string variables and counted loops.

mod lexer;
mod parser;

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::ArgSpec;

pub use parser::parse_task;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TaskError {
    #[error("{line}:{col}: syntax error: {msg}")]
    Syntax {
        line: usize,
        col: usize,
        msg: String,
    },
    #[error("line {line}: `{name}` is not bound")]
    UnboundVariable { line: usize, name: String },
    #[error("line {line}: loop bound must be a constant integer")]
    NonConstantBound { line: usize },
    #[error("line {line}: {msg}")]
    Runtime { line: usize, msg: String },
    #[error("a prompt is waiting for an answer")]
    AwaitingAnswer,
    #[error("no prompt is waiting for an answer")]
    NoPendingPrompt,
    #[error("`{answer}` is not one of {buttons:?}")]
    InvalidAnswer {
        answer: String,
        buttons: Vec<String>,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub enum FPart {
    Lit(String),
    Var(String),
}

#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Str(String),
    Int(i64),
    FStr(Vec<FPart>),
    Var(String),
    List(Vec<Expr>),
    Index(Box<Expr>, Box<Expr>),
}

#[derive(Clone, Debug, PartialEq)]
pub enum Stmt {
    Call {
        name: String,
        args: Vec<Expr>,
        kwargs: Vec<(String, Expr)>,
        line: usize,
    },
    Assign {
        var: String,
        value: Expr,
        line: usize,
    },
    /// `robot.prompt(message, buttons=[...])`, optionally bound to a variable.
    Prompt {
        var: Option<String>,
        message: Expr,
        buttons: Vec<Expr>,
        line: usize,
    },
    For {
        var: String,
        count: i64,
        body: Vec<Stmt>,
        line: usize,
    },
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TaskProgram {
    pub statements: Vec<Stmt>,
}

#[derive(Clone, Debug, PartialEq)]
enum Value {
    Str(String),
    Int(i64),
    List(Vec<Value>),
}

impl Value {
    fn text(&self, line: usize) -> Result<String, TaskError> {
        match self {
            Value::Str(s) => Ok(s.clone()),
            Value::Int(i) => Ok(i.to_string()),
            Value::List(_) => Err(TaskError::Runtime {
                line,
                msg: "a list cannot be used as text".into(),
            }),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ActionRequest {
    pub name: String,
    pub positional: Vec<String>,
    pub keyword: Vec<(String, String)>,
    pub line: usize,
}

impl ActionRequest {
    pub fn arg_spec(&self) -> ArgSpec {
        ArgSpec {
            positional: self.positional.clone(),
            keyword: self.keyword.clone(),
        }
    }
}

impl fmt::Display for ActionRequest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(", self.name)?;
        let mut first = true;
        for a in &self.positional {
            if !first {
                write!(f, ",")?;
            }
            first = false;
            write!(f, "{a:?}")?;
        }
        for (k, v) in &self.keyword {
            if !first {
                write!(f, ",")?;
            }
            first = false;
            write!(f, "{k}={v:?}")?;
        }
        write!(f, ")")
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PromptRequest {
    pub message: String,
    pub buttons: Vec<String>,
    pub line: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Step {
    Action(ActionRequest),
    Prompt(PromptRequest),
    Done,
}

#[derive(Clone, Debug)]
struct Frame {
    pc: usize,
    /// (variable, iteration, count) for loop bodies.
    lp: Option<(String, i64, i64)>,
}

#[derive(Clone, Debug)]
struct Pending {
    var: Option<String>,
    buttons: Vec<String>,
}

/// Position in a running program, including loop counters and variables.
#[derive(Clone, Debug)]
pub struct Cursor {
    frames: Vec<Frame>,
    env: BTreeMap<String, Value>,
    pending: Option<Pending>,
    actions: usize,
}

impl Default for Cursor {
    fn default() -> Self {
        Self::new()
    }
}

impl Cursor {
    pub fn new() -> Self {
        Cursor {
            frames: vec![Frame { pc: 0, lp: None }],
            env: BTreeMap::new(),
            pending: None,
            actions: 0,
        }
    }

    /// Number of action requests produced so far.
    pub fn actions_emitted(&self) -> usize {
        self.actions
    }

    pub fn awaiting_answer(&self) -> bool {
        self.pending.is_some()
    }

    fn body<'p>(&self, program: &'p TaskProgram, level: usize) -> &'p [Stmt] {
        let mut body: &[Stmt] = &program.statements;
        for f in &self.frames[..level] {
            match &body[f.pc] {
                Stmt::For { body: inner, .. } => body = inner,
                _ => unreachable!("frame parent is a loop"),
            }
        }
        body
    }

    /// Advance to the next action or prompt.
    pub fn next(&mut self, program: &TaskProgram) -> Result<Step, TaskError> {
        if self.pending.is_some() {
            return Err(TaskError::AwaitingAnswer);
        }
        loop {
            let level = self.frames.len() - 1;
            let body = self.body(program, level);
            let pc = self.frames[level].pc;
            if pc >= body.len() {
                if level == 0 {
                    return Ok(Step::Done);
                }
                let frame = self.frames.last_mut().unwrap();
                let (var, i, n) = frame.lp.as_mut().unwrap();
                *i += 1;
                if *i < *n {
                    frame.pc = 0;
                    self.env.insert(var.clone(), Value::Int(*i));
                } else {
                    self.frames.pop();
                    self.frames.last_mut().unwrap().pc += 1;
                }
                continue;
            }
            match &body[pc] {
                Stmt::Call {
                    name,
                    args,
                    kwargs,
                    line,
                } => {
                    let positional = args
                        .iter()
                        .map(|a| self.eval(a, *line)?.text(*line))
                        .collect::<Result<_, _>>()?;
                    let keyword = kwargs
                        .iter()
                        .map(|(k, a)| Ok((k.clone(), self.eval(a, *line)?.text(*line)?)))
                        .collect::<Result<_, TaskError>>()?;
                    self.frames[level].pc += 1;
                    self.actions += 1;
                    return Ok(Step::Action(ActionRequest {
                        name: name.clone(),
                        positional,
                        keyword,
                        line: *line,
                    }));
                }
                Stmt::Assign { var, value, line } => {
                    let v = self.eval(value, *line)?;
                    self.env.insert(var.clone(), v);
                    self.frames[level].pc += 1;
                }
                Stmt::Prompt {
                    var,
                    message,
                    buttons,
                    line,
                } => {
                    let message = self.eval(message, *line)?.text(*line)?;
                    let buttons: Vec<String> = buttons
                        .iter()
                        .map(|b| self.eval(b, *line)?.text(*line))
                        .collect::<Result<_, _>>()?;
                    self.frames[level].pc += 1;
                    self.pending = Some(Pending {
                        var: var.clone(),
                        buttons: buttons.clone(),
                    });
                    return Ok(Step::Prompt(PromptRequest {
                        message,
                        buttons,
                        line: *line,
                    }));
                }
                Stmt::For { var, count, .. } => {
                    if *count <= 0 {
                        self.frames[level].pc += 1;
                    } else {
                        self.env.insert(var.clone(), Value::Int(0));
                        self.frames.push(Frame {
                            pc: 0,
                            lp: Some((var.clone(), 0, *count)),
                        });
                    }
                }
            }
        }
    }

    /// Supply the answer to the outstanding prompt.
    pub fn answer(&mut self, answer: &str) -> Result<(), TaskError> {
        let p = self.pending.as_ref().ok_or(TaskError::NoPendingPrompt)?;
        if !p.buttons.iter().any(|b| b == answer) {
            return Err(TaskError::InvalidAnswer {
                answer: answer.into(),
                buttons: p.buttons.clone(),
            });
        }
        let p = self.pending.take().unwrap();
        if let Some(var) = p.var {
            self.env.insert(var, Value::Str(answer.into()));
        }
        Ok(())
    }

    fn eval(&self, e: &Expr, line: usize) -> Result<Value, TaskError> {
        let lookup = |name: &str| {
            self.env
                .get(name)
                .cloned()
                .ok_or_else(|| TaskError::UnboundVariable {
                    line,
                    name: name.into(),
                })
        };
        Ok(match e {
            Expr::Str(s) => Value::Str(s.clone()),
            Expr::Int(i) => Value::Int(*i),
            Expr::Var(v) => lookup(v)?,
            Expr::FStr(parts) => {
                let mut s = String::new();
                for p in parts {
                    match p {
                        FPart::Lit(l) => s.push_str(l),
                        FPart::Var(v) => s.push_str(&lookup(v)?.text(line)?),
                    }
                }
                Value::Str(s)
            }
            Expr::List(items) => Value::List(
                items
                    .iter()
                    .map(|x| self.eval(x, line))
                    .collect::<Result<_, _>>()?,
            ),
            Expr::Index(list, idx) => {
                let Value::List(items) = self.eval(list, line)? else {
                    return Err(TaskError::Runtime {
                        line,
                        msg: "only lists can be indexed".into(),
                    });
                };
                let Value::Int(i) = self.eval(idx, line)? else {
                    return Err(TaskError::Runtime {
                        line,
                        msg: "list index must be an integer".into(),
                    });
                };
                usize::try_from(i)
                    .ok()
                    .and_then(|i| items.get(i).cloned())
                    .ok_or_else(|| TaskError::Runtime {
                        line,
                        msg: format!("index {i} out of range"),
                    })?
            }
        })
    }
}

/// Run a program to completion, answering prompts from `answers` in order.
pub fn unroll(program: &TaskProgram, answers: &[&str]) -> Result<Vec<Step>, TaskError> {
    let mut cursor = Cursor::new();
    let mut answers = answers.iter();
    let mut out = Vec::new();
    loop {
        let step = cursor.next(program)?;
        if step == Step::Done {
            return Ok(out);
        }
        let prompt = matches!(step, Step::Prompt(_));
        out.push(step);
        if prompt {
            let a = answers.next().ok_or(TaskError::AwaitingAnswer)?;
            cursor.answer(a)?;
        }
    }
}
