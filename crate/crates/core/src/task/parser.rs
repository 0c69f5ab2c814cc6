use std::collections::{BTreeMap, BTreeSet};

use super::lexer::{tokenize, Tok, Token};
use super::*;

/// Parse and check a task program: every variable must be bound before use
/// and every loop bound must be a constant.
pub fn parse_task(text: &str) -> Result<TaskProgram, TaskError> {
    let mut p = Parser {
        toks: tokenize(text)?,
        pos: 0,
        bound: BTreeSet::new(),
        consts: BTreeMap::new(),
        depth: 0,
    };
    let statements = p.block()?;
    if let Some(t) = p.toks.get(p.pos) {
        return Err(syntax(t, "unexpected indentation"));
    }
    Ok(TaskProgram { statements })
}

fn syntax(t: &Token, msg: impl Into<String>) -> TaskError {
    TaskError::Syntax {
        line: t.line,
        col: t.col,
        msg: msg.into(),
    }
}

struct Parser {
    toks: Vec<Token>,
    pos: usize,
    bound: BTreeSet<String>,
    /// Integer variables assigned a literal at top level.
    consts: BTreeMap<String, i64>,
    depth: usize,
}

enum Arg {
    Pos(Expr),
    Kw(String, Expr),
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|t| &t.tok)
    }

    fn peek_at(&self, k: usize) -> Option<&Tok> {
        self.toks.get(self.pos + k).map(|t| &t.tok)
    }

    fn here(&self) -> Token {
        self.toks.get(self.pos).cloned().unwrap_or_else(|| {
            let last = self.toks.last();
            Token {
                tok: Tok::Newline,
                line: last.map_or(1, |t| t.line),
                col: last.map_or(1, |t| t.col),
            }
        })
    }

    fn bump(&mut self) -> Token {
        let t = self.here();
        self.pos += 1;
        t
    }

    fn expect(&mut self, want: Tok, what: &str) -> Result<Token, TaskError> {
        let t = self.here();
        if self.peek() == Some(&want) {
            self.pos += 1;
            Ok(t)
        } else {
            Err(syntax(&t, format!("expected {what}")))
        }
    }

    fn ident(&mut self, what: &str) -> Result<(String, Token), TaskError> {
        let t = self.here();
        match self.peek() {
            Some(Tok::Ident(s)) => {
                let s = s.clone();
                self.pos += 1;
                Ok((s, t))
            }
            _ => Err(syntax(&t, format!("expected {what}"))),
        }
    }

    fn keyword(&mut self, kw: &str) -> Result<(), TaskError> {
        let (s, t) = self.ident(&format!("`{kw}`"))?;
        if s == kw {
            Ok(())
        } else {
            Err(syntax(&t, format!("expected `{kw}`")))
        }
    }

    fn block(&mut self) -> Result<Vec<Stmt>, TaskError> {
        let mut out = Vec::new();
        while let Some(tok) = self.peek() {
            match tok {
                Tok::Dedent | Tok::Indent => break,
                Tok::Newline => {
                    self.pos += 1;
                }
                _ => {
                    if let Some(s) = self.statement()? {
                        out.push(s);
                    }
                }
            }
        }
        Ok(out)
    }

    fn statement(&mut self) -> Result<Option<Stmt>, TaskError> {
        let (head, t) = self.ident("a statement")?;
        let line = t.line;
        match head.as_str() {
            "pass" => {
                self.expect(Tok::Newline, "end of line")?;
                Ok(None)
            }
            "for" => self.for_loop(line).map(Some),
            "robot" => {
                let stmt = self.robot_call(None, line)?;
                self.expect(Tok::Newline, "end of line")?;
                Ok(Some(stmt))
            }
            _ => {
                self.expect(Tok::Eq, "`=`")?;
                let stmt = if self.peek() == Some(&Tok::Ident("robot".into()))
                    && self.peek_at(1) == Some(&Tok::Dot)
                {
                    self.pos += 1;
                    let s = self.robot_call(Some(head.clone()), line)?;
                    if !matches!(s, Stmt::Prompt { .. }) {
                        return Err(syntax(&t, "only `robot.prompt` returns a value"));
                    }
                    s
                } else {
                    let value = self.expr()?;
                    match (&value, self.depth) {
                        (Expr::Int(n), 0) => {
                            self.consts.insert(head.clone(), *n);
                        }
                        _ => {
                            self.consts.remove(&head);
                        }
                    }
                    Stmt::Assign {
                        var: head.clone(),
                        value,
                        line,
                    }
                };
                self.expect(Tok::Newline, "end of line")?;
                self.bound.insert(head);
                Ok(Some(stmt))
            }
        }
    }

    fn for_loop(&mut self, line: usize) -> Result<Stmt, TaskError> {
        let (var, _) = self.ident("loop variable")?;
        self.keyword("in")?;
        self.keyword("range")?;
        self.expect(Tok::LParen, "`(`")?;
        let bound = self.expr()?;
        self.expect(Tok::RParen, "`)`")?;
        self.expect(Tok::Colon, "`:`")?;
        self.expect(Tok::Newline, "end of line")?;
        let count = match bound {
            Expr::Int(n) => n,
            Expr::Var(v) if self.consts.contains_key(&v) => self.consts[&v],
            _ => return Err(TaskError::NonConstantBound { line }),
        };
        self.expect(Tok::Indent, "an indented block")?;
        self.bound.insert(var.clone());
        self.consts.remove(&var);
        self.depth += 1;
        let body = self.block()?;
        self.depth -= 1;
        if self.peek().is_some() {
            self.expect(Tok::Dedent, "end of block")?;
        }
        Ok(Stmt::For {
            var,
            count,
            body,
            line,
        })
    }

    /// After `robot`: `.name(args)`.
    fn robot_call(&mut self, target: Option<String>, line: usize) -> Result<Stmt, TaskError> {
        self.expect(Tok::Dot, "`.`")?;
        let (name, nt) = self.ident("an action name")?;
        self.expect(Tok::LParen, "`(`")?;
        let mut args = Vec::new();
        while self.peek() != Some(&Tok::RParen) {
            if let (Some(Tok::Ident(k)), Some(Tok::Eq)) = (self.peek(), self.peek_at(1)) {
                let k = k.clone();
                self.pos += 2;
                args.push(Arg::Kw(k, self.expr()?));
            } else {
                if matches!(args.last(), Some(Arg::Kw(..))) {
                    return Err(syntax(
                        &self.here(),
                        "positional argument after keyword argument",
                    ));
                }
                args.push(Arg::Pos(self.expr()?));
            }
            if self.peek() != Some(&Tok::RParen) {
                self.expect(Tok::Comma, "`,` or `)`")?;
            }
        }
        self.bump();
        if name != "prompt" {
            let mut positional = Vec::new();
            let mut kwargs = Vec::new();
            for a in args {
                match a {
                    Arg::Pos(e) => positional.push(e),
                    Arg::Kw(k, e) => kwargs.push((k, e)),
                }
            }
            return Ok(Stmt::Call {
                name,
                args: positional,
                kwargs,
                line,
            });
        }
        let mut message = None;
        let mut buttons = None;
        for a in args {
            match a {
                Arg::Pos(e) if message.is_none() => message = Some(e),
                Arg::Pos(e) if buttons.is_none() => buttons = Some(e),
                Arg::Kw(k, e) if k == "message" && message.is_none() => message = Some(e),
                Arg::Kw(k, e) if k == "buttons" && buttons.is_none() => buttons = Some(e),
                _ => return Err(syntax(&nt, "prompt takes a message and `buttons`")),
            }
        }
        let message = message.ok_or_else(|| syntax(&nt, "prompt needs a message"))?;
        let buttons = match buttons {
            Some(Expr::List(items)) if !items.is_empty() => items,
            _ => return Err(syntax(&nt, "prompt needs a non-empty `buttons` list")),
        };
        Ok(Stmt::Prompt {
            var: target,
            message,
            buttons,
            line,
        })
    }

    fn expr(&mut self) -> Result<Expr, TaskError> {
        let t = self.bump();
        let mut e = match t.tok.clone() {
            Tok::Str(s) => Expr::Str(s),
            Tok::Int(n) => Expr::Int(n),
            Tok::FStr(s) => Expr::FStr(self.fstring(&s, &t)?),
            Tok::Ident(v) => {
                self.check_bound(&v, &t)?;
                Expr::Var(v)
            }
            Tok::LBracket => {
                let mut items = Vec::new();
                while self.peek() != Some(&Tok::RBracket) {
                    items.push(self.expr()?);
                    if self.peek() != Some(&Tok::RBracket) {
                        self.expect(Tok::Comma, "`,` or `]`")?;
                    }
                }
                self.bump();
                Expr::List(items)
            }
            _ => return Err(syntax(&t, "expected an expression")),
        };
        while self.peek() == Some(&Tok::LBracket) {
            self.bump();
            let idx = self.expr()?;
            self.expect(Tok::RBracket, "`]`")?;
            e = Expr::Index(Box::new(e), Box::new(idx));
        }
        Ok(e)
    }

    fn check_bound(&self, v: &str, t: &Token) -> Result<(), TaskError> {
        if self.bound.contains(v) {
            Ok(())
        } else {
            Err(TaskError::UnboundVariable {
                line: t.line,
                name: v.to_string(),
            })
        }
    }

    fn fstring(&self, s: &str, t: &Token) -> Result<Vec<FPart>, TaskError> {
        let mut parts = Vec::new();
        let mut lit = String::new();
        let mut chars = s.chars().peekable();
        while let Some(c) = chars.next() {
            match c {
                '{' if chars.peek() == Some(&'{') => {
                    chars.next();
                    lit.push('{');
                }
                '}' if chars.peek() == Some(&'}') => {
                    chars.next();
                    lit.push('}');
                }
                '{' => {
                    let mut name = String::new();
                    loop {
                        match chars.next() {
                            Some('}') => break,
                            Some(c) => name.push(c),
                            None => return Err(syntax(t, "unclosed `{` in f-string")),
                        }
                    }
                    let name = name.trim().to_string();
                    if name.is_empty() || !name.chars().all(|c| c.is_alphanumeric() || c == '_') {
                        return Err(syntax(t, format!("unsupported f-string field `{name}`")));
                    }
                    self.check_bound(&name, t)?;
                    if !lit.is_empty() {
                        parts.push(FPart::Lit(std::mem::take(&mut lit)));
                    }
                    parts.push(FPart::Var(name));
                }
                '}' => return Err(syntax(t, "single `}` in f-string")),
                c => lit.push(c),
            }
        }
        if !lit.is_empty() {
            parts.push(FPart::Lit(lit));
        }
        Ok(parts)
    }
}
