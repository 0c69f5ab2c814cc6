use std::collections::{BTreeMap, BTreeSet};

use super::lexer::{tokenize, Tok, Token};
use super::*;

/// Parse and validate a `.rmodel` document.
pub fn parse_model(text: &str) -> Result<RobotModel, ModelError> {
    let tokens = tokenize(text)?;
    let mut p = Parser {
        toks: tokens,
        pos: 0,
    };
    let (model, spans) = p.model()?;
    validate(&model, &spans)?;
    Ok(model)
}

struct Parser {
    toks: Vec<Token>,
    pos: usize,
}

#[derive(Default)]
pub(super) struct Spans {
    actions: BTreeMap<String, (usize, usize)>,
    params: BTreeMap<String, (usize, usize)>,
    sections: BTreeMap<&'static str, (usize, usize)>,
}

type PResult<T> = Result<T, ModelError>;

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|t| &t.tok)
    }

    fn peek_at(&self, k: usize) -> Option<&Tok> {
        self.toks.get(self.pos + k).map(|t| &t.tok)
    }

    fn here(&self) -> (usize, usize) {
        match self.toks.get(self.pos).or(self.toks.last()) {
            Some(t) => (t.line, t.col),
            None => (1, 1),
        }
    }

    fn err<T>(&self, msg: impl Into<String>) -> PResult<T> {
        let (line, col) = self.here();
        Err(ModelError::Syntax {
            line,
            col,
            msg: msg.into(),
        })
    }

    fn next(&mut self) -> PResult<Tok> {
        match self.toks.get(self.pos) {
            Some(t) => {
                self.pos += 1;
                Ok(t.tok.clone())
            }
            None => self.err("unexpected end of input"),
        }
    }

    fn expect(&mut self, want: Tok) -> PResult<()> {
        match self.peek() {
            Some(t) if *t == want => {
                self.pos += 1;
                Ok(())
            }
            Some(t) => {
                let msg = format!("expected {want:?}, found {t:?}");
                self.err(msg)
            }
            None => self.err(format!("expected {want:?}, found end of input")),
        }
    }

    fn sym(&mut self) -> PResult<String> {
        match self.peek().cloned() {
            Some(Tok::Sym(s)) => {
                self.pos += 1;
                Ok(s)
            }
            other => self.err(format!("expected symbol, found {other:?}")),
        }
    }

    fn keyword(&mut self, kw: &str) -> PResult<()> {
        match self.peek() {
            Some(Tok::Sym(s)) if s == kw => {
                self.pos += 1;
                Ok(())
            }
            _ => self.err(format!("expected `{kw}`")),
        }
    }

    /// An object name: a bare symbol or a string.
    fn name(&mut self) -> PResult<String> {
        match self.peek().cloned() {
            Some(Tok::Sym(s)) if !s.starts_with('?') && !s.starts_with(':') => {
                self.pos += 1;
                Ok(s)
            }
            Some(Tok::Str(s)) => {
                self.pos += 1;
                Ok(s)
            }
            other => self.err(format!("expected name, found {other:?}")),
        }
    }

    fn var(&mut self) -> PResult<String> {
        match self.peek().cloned() {
            Some(Tok::Sym(s)) if s.starts_with('?') && s.len() > 1 => {
                self.pos += 1;
                Ok(s[1..].to_string())
            }
            other => self.err(format!("expected ?variable, found {other:?}")),
        }
    }

    fn model(&mut self) -> PResult<(RobotModel, Spans)> {
        let mut spans = Spans::default();
        let mut m = RobotModel {
            domain: String::new(),
            types: BTreeSet::new(),
            objects: BTreeMap::new(),
            predicates: BTreeMap::new(),
            functions: BTreeMap::new(),
            params: BTreeMap::new(),
            actions: BTreeMap::new(),
        };
        self.expect(Tok::LParen)?;
        self.keyword("define")?;
        self.expect(Tok::LParen)?;
        self.keyword("domain")?;
        m.domain = self.name()?;
        self.expect(Tok::RParen)?;
        while self.peek() == Some(&Tok::LParen) {
            self.pos += 1;
            let at = self.here();
            let section = self.sym()?;
            match section.as_str() {
                ":types" => {
                    spans.sections.insert("types", at);
                    while self.peek() != Some(&Tok::RParen) {
                        let t = self.name()?;
                        m.types.insert(t);
                    }
                }
                ":objects" => {
                    spans.sections.insert("objects", at);
                    self.typed_list(|p, names, ty| {
                        for n in names {
                            if m.objects.insert(n.clone(), ty.clone()).is_some() {
                                return p.err(format!("object `{n}` declared twice"));
                            }
                        }
                        Ok(())
                    })?;
                }
                ":predicates" => {
                    spans.sections.insert("predicates", at);
                    while self.peek() == Some(&Tok::LParen) {
                        self.pos += 1;
                        let name = self.name()?;
                        let mut arg_types = Vec::new();
                        while self.peek() != Some(&Tok::RParen) {
                            self.var()?;
                            self.keyword("-")?;
                            arg_types.push(self.name()?);
                        }
                        self.expect(Tok::RParen)?;
                        if m.predicates.contains_key(&name) {
                            return self.err(format!("predicate `{name}` declared twice"));
                        }
                        m.predicates
                            .insert(name.clone(), PredicateDecl { name, arg_types });
                    }
                }
                ":functions" => {
                    spans.sections.insert("functions", at);
                    while self.peek() == Some(&Tok::LParen) {
                        let f = self.function()?;
                        if m.functions.contains_key(&f.name) {
                            return self.err(format!("function `{}` declared twice", f.name));
                        }
                        m.functions.insert(f.name.clone(), f);
                    }
                }
                ":params" => {
                    while self.peek() == Some(&Tok::LParen) {
                        self.pos += 1;
                        let here = self.here();
                        let name = self.name()?;
                        let value = match self.next()? {
                            Tok::Sym(s) => match s.parse::<f64>() {
                                Ok(v) => v,
                                Err(_) => {
                                    self.pos -= 1;
                                    return self.err(format!("invalid number `{s}`"));
                                }
                            },
                            _ => {
                                self.pos -= 1;
                                return self.err("expected number");
                            }
                        };
                        self.expect(Tok::RParen)?;
                        spans.params.insert(name.clone(), here);
                        if m.params.insert(name.clone(), value).is_some() {
                            return self.err(format!("parameter `{name}` declared twice"));
                        }
                    }
                }
                ":action" => {
                    let schema = self.action()?;
                    if m.actions.contains_key(&schema.name) {
                        let (line, col) = at;
                        return Err(ModelError::Invalid {
                            line,
                            col,
                            msg: format!("duplicate action `{}`", schema.name),
                        });
                    }
                    spans.actions.insert(schema.name.clone(), at);
                    m.actions.insert(schema.name.clone(), schema);
                }
                other => return self.err(format!("unknown section `{other}`")),
            }
            self.expect(Tok::RParen)?;
        }
        self.expect(Tok::RParen)?;
        if self.pos != self.toks.len() {
            return self.err("trailing input after domain");
        }
        Ok((m, spans))
    }

    /// `a b - t1 c - t2`
    fn typed_list(
        &mut self,
        mut sink: impl FnMut(&Self, &[String], &String) -> PResult<()>,
    ) -> PResult<()> {
        let mut pending = Vec::new();
        while self.peek() != Some(&Tok::RParen) {
            if matches!(self.peek(), Some(Tok::Sym(s)) if s == "-") {
                self.pos += 1;
                let ty = self.name()?;
                sink(self, &pending, &ty)?;
                pending.clear();
            } else {
                pending.push(self.name()?);
            }
        }
        if !pending.is_empty() {
            return self.err("untyped names in list");
        }
        Ok(())
    }

    /// `(name ?x - argtype) - resulttype ((from to) ...)`
    fn function(&mut self) -> PResult<FunctionDecl> {
        self.expect(Tok::LParen)?;
        let name = self.name()?;
        self.var()?;
        self.keyword("-")?;
        let arg_type = self.name()?;
        self.expect(Tok::RParen)?;
        self.keyword("-")?;
        let result_type = self.name()?;
        self.expect(Tok::LParen)?;
        let mut mapping = BTreeMap::new();
        while self.peek() == Some(&Tok::LParen) {
            self.pos += 1;
            let from = self.name()?;
            let to = self.name()?;
            self.expect(Tok::RParen)?;
            if mapping.insert(from.clone(), to).is_some() {
                return self.err(format!("`{name}` maps `{from}` twice"));
            }
        }
        self.expect(Tok::RParen)?;
        Ok(FunctionDecl {
            name,
            arg_type,
            result_type,
            mapping,
        })
    }

    fn action(&mut self) -> PResult<ActionSchema> {
        let name = self.name()?;
        let mut schema = ActionSchema {
            name,
            parameters: Vec::new(),
            precondition: Vec::new(),
            postcondition: Vec::new(),
            belief_update: BeliefUpdateProgram {
                vars: Vec::new(),
                statements: Vec::new(),
                fallback: None,
            },
            failure_evidence: BTreeMap::new(),
            prompt: None,
        };
        let mut seen = BTreeSet::new();
        while let Some(Tok::Sym(kw)) = self.peek().cloned() {
            if !kw.starts_with(':') {
                break;
            }
            if !seen.insert(kw.clone()) {
                return self.err(format!("`{kw}` given twice"));
            }
            self.pos += 1;
            match kw.as_str() {
                ":parameters" => schema.parameters = self.parameters()?,
                ":precondition" => schema.precondition = self.condition()?,
                ":postcondition" => schema.postcondition = self.condition()?,
                ":vars" => {
                    self.expect(Tok::LParen)?;
                    while self.peek() == Some(&Tok::LParen) {
                        self.pos += 1;
                        let name = self.name()?;
                        let alpha = self.name()?;
                        self.expect(Tok::RParen)?;
                        schema
                            .belief_update
                            .vars
                            .push(ActionVarDecl { name, alpha });
                    }
                    self.expect(Tok::RParen)?;
                }
                ":belief-update" => schema.belief_update.statements = self.program()?,
                ":belief-update-fallback" => schema.belief_update.fallback = Some(self.program()?),
                ":failure-evidence" => {
                    self.expect(Tok::LParen)?;
                    while self.peek() == Some(&Tok::LParen) {
                        self.pos += 1;
                        let label = self.name()?;
                        let lits = self.condition()?;
                        self.expect(Tok::RParen)?;
                        if schema
                            .failure_evidence
                            .insert(label.clone(), lits)
                            .is_some()
                        {
                            return self.err(format!("failure label `{label}` given twice"));
                        }
                    }
                    self.expect(Tok::RParen)?;
                }
                ":prompt" => match self.next()? {
                    Tok::Str(s) => schema.prompt = Some(s),
                    _ => {
                        self.pos -= 1;
                        return self.err("expected prompt string");
                    }
                },
                other => {
                    self.pos -= 1;
                    return self.err(format!("unknown action field `{other}`"));
                }
            }
        }
        Ok(schema)
    }

    fn parameters(&mut self) -> PResult<Vec<Parameter>> {
        self.expect(Tok::LParen)?;
        let mut out: Vec<Parameter> = Vec::new();
        while self.peek() != Some(&Tok::RParen) {
            let name = self.var()?;
            self.keyword("-")?;
            let ty = self.name()?;
            let mode = match self.peek().cloned() {
                Some(Tok::Sym(s)) if s == "@implicit" || s == "@current" => {
                    self.pos += 1;
                    self.expect(Tok::LParen)?;
                    let pred = self.name()?;
                    self.expect(Tok::RParen)?;
                    if s == "@implicit" {
                        ParamMode::Implicit(pred)
                    } else {
                        ParamMode::Current(pred)
                    }
                }
                Some(Tok::Sym(s)) if s.starts_with('@') => {
                    return self.err(format!("unknown annotation `{s}`"))
                }
                _ => ParamMode::Explicit,
            };
            if out.iter().any(|p| p.name == name) {
                return self.err(format!("parameter ?{name} declared twice"));
            }
            out.push(Parameter { name, ty, mode });
        }
        self.expect(Tok::RParen)?;
        Ok(out)
    }

    /// `(and lit...)`, a single literal, or `(not lit)`.
    fn condition(&mut self) -> PResult<Vec<LiteralTemplate>> {
        if self.peek() == Some(&Tok::LParen) && self.peek_at(1) == Some(&Tok::Sym("and".into())) {
            self.pos += 2;
            let mut out = Vec::new();
            while self.peek() != Some(&Tok::RParen) {
                out.push(self.literal_template()?);
            }
            self.expect(Tok::RParen)?;
            Ok(out)
        } else {
            Ok(vec![self.literal_template()?])
        }
    }

    fn literal_template(&mut self) -> PResult<LiteralTemplate> {
        self.expect(Tok::LParen)?;
        if matches!(self.peek(), Some(Tok::Sym(s)) if s == "not") {
            self.pos += 1;
            let mut inner = self.literal_template()?;
            if !inner.positive {
                return self.err("double negation");
            }
            inner.positive = false;
            self.expect(Tok::RParen)?;
            return Ok(inner);
        }
        let predicate = self.name()?;
        let mut args = Vec::new();
        while self.peek() != Some(&Tok::RParen) {
            args.push(self.term()?);
        }
        self.expect(Tok::RParen)?;
        Ok(LiteralTemplate {
            predicate,
            args,
            positive: true,
        })
    }

    fn term(&mut self) -> PResult<Term> {
        match self.peek().cloned() {
            Some(Tok::Sym(s)) if s.starts_with('?') => Ok(Term::Var(self.var()?)),
            Some(Tok::LParen) => {
                self.pos += 1;
                let f = self.name()?;
                let inner = self.term()?;
                self.expect(Tok::RParen)?;
                Ok(Term::Apply(f, Box::new(inner)))
            }
            _ => Ok(Term::Const(self.name()?)),
        }
    }

    fn program(&mut self) -> PResult<Vec<UpdateStmt>> {
        self.expect(Tok::LBracket)?;
        let mut out = Vec::new();
        while self.peek() != Some(&Tok::RBracket) {
            if self.peek() == Some(&Tok::LParen) {
                self.pos += 1;
                self.keyword("forall")?;
                self.expect(Tok::LParen)?;
                let var = self.var()?;
                self.keyword("-")?;
                let ty = self.name()?;
                self.expect(Tok::RParen)?;
                let (target, expr) = self.assignment()?;
                self.expect(Tok::RParen)?;
                out.push(UpdateStmt::ForAll {
                    var,
                    ty,
                    target,
                    expr,
                });
            } else {
                let (target, expr) = self.assignment()?;
                out.push(UpdateStmt::Assign { target, expr });
            }
        }
        self.expect(Tok::RBracket)?;
        Ok(out)
    }

    fn assignment(&mut self) -> PResult<(LitRef, BoolExpr)> {
        let predicate = self.name()?;
        let target = self.lit_ref_args(predicate)?;
        if self.peek() == Some(&Tok::Prime) {
            return self.err("assignment target cannot be primed");
        }
        self.expect(Tok::Assign)?;
        let expr = self.expr()?;
        Ok((target, expr))
    }

    fn lit_ref_args(&mut self, predicate: String) -> PResult<LitRef> {
        self.expect(Tok::LBracket)?;
        let mut args = Vec::new();
        while self.peek() != Some(&Tok::RBracket) {
            if !args.is_empty() {
                self.expect(Tok::Comma)?;
            }
            args.push(self.term()?);
        }
        self.expect(Tok::RBracket)?;
        Ok(LitRef { predicate, args })
    }

    fn expr(&mut self) -> PResult<BoolExpr> {
        match self.peek().cloned() {
            Some(Tok::LParen) => {
                self.pos += 1;
                let op = self.sym()?;
                let mut args = Vec::new();
                while self.peek() != Some(&Tok::RParen) {
                    args.push(self.expr()?);
                }
                self.expect(Tok::RParen)?;
                match op.as_str() {
                    "and" => Ok(BoolExpr::And(args)),
                    "or" => Ok(BoolExpr::Or(args)),
                    "not" if args.len() == 1 => Ok(BoolExpr::Not(Box::new(args.pop().unwrap()))),
                    "not" => self.err("`not` takes one operand"),
                    _ => self.err(format!("unknown operator `{op}`")),
                }
            }
            Some(Tok::Sym(s)) | Some(Tok::Str(s)) => {
                self.pos += 1;
                if self.peek() == Some(&Tok::LBracket) {
                    let r = self.lit_ref_args(s)?;
                    if self.peek() == Some(&Tok::Prime) {
                        self.pos += 1;
                        Ok(BoolExpr::Next(r))
                    } else {
                        Ok(BoolExpr::Prior(r))
                    }
                } else {
                    match s.as_str() {
                        "true" => Ok(BoolExpr::Const(true)),
                        "false" => Ok(BoolExpr::Const(false)),
                        _ => Ok(BoolExpr::Var(s)),
                    }
                }
            }
            other => self.err(format!("expected expression, found {other:?}")),
        }
    }
}

fn invalid<T>(at: (usize, usize), msg: impl Into<String>) -> PResult<T> {
    Err(ModelError::Invalid {
        line: at.0,
        col: at.1,
        msg: msg.into(),
    })
}

struct Scope<'a> {
    model: &'a RobotModel,
    vars: BTreeMap<String, String>,
    at: (usize, usize),
    action: &'a str,
}

impl Scope<'_> {
    fn term_type(&self, t: &Term) -> PResult<String> {
        match t {
            Term::Var(v) => match self.vars.get(v) {
                Some(ty) => Ok(ty.clone()),
                None => invalid(self.at, format!("{}: unbound variable ?{v}", self.action)),
            },
            Term::Const(c) => match self.model.objects.get(c) {
                Some(ty) => Ok(ty.clone()),
                None => invalid(self.at, format!("{}: undeclared object `{c}`", self.action)),
            },
            Term::Apply(f, inner) => {
                let Some(decl) = self.model.functions.get(f) else {
                    return invalid(
                        self.at,
                        format!("{}: undeclared function `{f}`", self.action),
                    );
                };
                let ty = self.term_type(inner)?;
                if ty != decl.arg_type {
                    return invalid(
                        self.at,
                        format!("{}: `{f}` expects {}, got {ty}", self.action, decl.arg_type),
                    );
                }
                Ok(decl.result_type.clone())
            }
        }
    }

    fn check_literal(&self, predicate: &str, args: &[Term]) -> PResult<()> {
        let Some(decl) = self.model.predicates.get(predicate) else {
            return invalid(
                self.at,
                format!("{}: undeclared predicate `{predicate}`", self.action),
            );
        };
        if decl.arg_types.len() != args.len() {
            return invalid(
                self.at,
                format!(
                    "{}: `{predicate}` takes {} arguments, got {}",
                    self.action,
                    decl.arg_types.len(),
                    args.len()
                ),
            );
        }
        for (want, t) in decl.arg_types.iter().zip(args) {
            let got = self.term_type(t)?;
            if &got != want {
                return invalid(
                    self.at,
                    format!("{}: `{predicate}` expects {want}, got {got}", self.action),
                );
            }
        }
        Ok(())
    }

    fn check_expr(&self, e: &BoolExpr, assigned: &[LitRef]) -> PResult<()> {
        match e {
            BoolExpr::Const(_) | BoolExpr::Var(_) => Ok(()),
            BoolExpr::Prior(r) => self.check_literal(&r.predicate, &r.args),
            BoolExpr::Next(r) => {
                self.check_literal(&r.predicate, &r.args)?;
                if !assigned.contains(r) {
                    return invalid(
                        self.at,
                        format!(
                            "{}: `{}[...]'` read before it is assigned",
                            self.action, r.predicate
                        ),
                    );
                }
                Ok(())
            }
            BoolExpr::Not(inner) => self.check_expr(inner, assigned),
            BoolExpr::And(es) | BoolExpr::Or(es) => {
                es.iter().try_for_each(|x| self.check_expr(x, assigned))
            }
        }
    }
}

fn expr_vars<'e>(e: &'e BoolExpr, out: &mut Vec<&'e str>) {
    match e {
        BoolExpr::Var(v) => out.push(v),
        BoolExpr::Not(inner) => expr_vars(inner, out),
        BoolExpr::And(es) | BoolExpr::Or(es) => es.iter().for_each(|x| expr_vars(x, out)),
        _ => {}
    }
}

pub(super) fn validate(m: &RobotModel, spans: &Spans) -> PResult<()> {
    let type_at = spans.sections.get("types").copied().unwrap_or((1, 1));
    for (o, ty) in &m.objects {
        if !m.types.contains(ty) {
            let at = spans.sections.get("objects").copied().unwrap_or(type_at);
            return invalid(at, format!("object `{o}` has undeclared type `{ty}`"));
        }
    }
    for p in m.predicates.values() {
        for ty in &p.arg_types {
            if !m.types.contains(ty) {
                let at = spans.sections.get("predicates").copied().unwrap_or(type_at);
                return invalid(
                    at,
                    format!("predicate `{}` uses undeclared type `{ty}`", p.name),
                );
            }
        }
    }
    for f in m.functions.values() {
        let at = spans.sections.get("functions").copied().unwrap_or(type_at);
        for ty in [&f.arg_type, &f.result_type] {
            if !m.types.contains(ty) {
                return invalid(
                    at,
                    format!("function `{}` uses undeclared type `{ty}`", f.name),
                );
            }
        }
        for o in m.objects_of_type(&f.arg_type) {
            match f.mapping.get(o) {
                None => return invalid(at, format!("function `{}` undefined on `{o}`", f.name)),
                Some(r) if m.objects.get(r) != Some(&f.result_type) => {
                    return invalid(
                        at,
                        format!(
                            "function `{}` maps `{o}` to `{r}`, not a {}",
                            f.name, f.result_type
                        ),
                    )
                }
                _ => {}
            }
        }
        for k in f.mapping.keys() {
            if m.objects.get(k) != Some(&f.arg_type) {
                return invalid(
                    at,
                    format!("function `{}` maps unknown {} `{k}`", f.name, f.arg_type),
                );
            }
        }
    }
    for (name, v) in &m.params {
        if !(0.0..=1.0).contains(v) || v.is_nan() {
            let at = spans.params.get(name).copied().unwrap_or((1, 1));
            return invalid(at, format!("parameter `{name}` = {v} is not a probability"));
        }
    }
    for a in m.actions.values() {
        let at = spans.actions.get(&a.name).copied().unwrap_or((1, 1));
        validate_action(m, a, at)?;
    }
    Ok(())
}

fn validate_action(m: &RobotModel, a: &ActionSchema, at: (usize, usize)) -> PResult<()> {
    let mut scope = Scope {
        model: m,
        vars: BTreeMap::new(),
        at,
        action: &a.name,
    };
    let mut has_current = false;
    for p in &a.parameters {
        if !m.types.contains(&p.ty) {
            return invalid(at, format!("{}: undeclared type `{}`", a.name, p.ty));
        }
        if let ParamMode::Implicit(pred) | ParamMode::Current(pred) = &p.mode {
            has_current |= matches!(p.mode, ParamMode::Current(_));
            match m.predicates.get(pred) {
                Some(d) if d.arg_types == [p.ty.clone()] => {}
                _ => {
                    return invalid(
                        at,
                        format!(
                            "{}: ?{} must be inferred from a unary `{}` over {}",
                            a.name, p.name, pred, p.ty
                        ),
                    )
                }
            }
        }
        scope.vars.insert(p.name.clone(), p.ty.clone());
    }
    for lt in a.precondition.iter().chain(&a.postcondition) {
        scope.check_literal(&lt.predicate, &lt.args)?;
    }
    let bu = &a.belief_update;
    if bu.vars.is_empty() {
        return invalid(
            at,
            format!("{}: no success variable declared in :vars", a.name),
        );
    }
    let mut var_names = BTreeSet::new();
    for v in &bu.vars {
        if !var_names.insert(v.name.as_str()) || matches!(v.name.as_str(), "true" | "false") {
            return invalid(
                at,
                format!("{}: bad or duplicate variable `{}`", a.name, v.name),
            );
        }
        if !m.params.contains_key(&v.alpha) {
            return invalid(
                at,
                format!("{}: undeclared parameter `{}`", a.name, v.alpha),
            );
        }
    }
    if bu.fallback.is_some() && !has_current {
        return invalid(
            at,
            format!("{}: fallback update without a @current parameter", a.name),
        );
    }
    for prog in std::iter::once(&bu.statements).chain(bu.fallback.iter()) {
        let mut assigned: Vec<LitRef> = Vec::new();
        for stmt in prog {
            let (target, expr, extra) = match stmt {
                UpdateStmt::Assign { target, expr } => (target, expr, None),
                UpdateStmt::ForAll {
                    var,
                    ty,
                    target,
                    expr,
                } => {
                    if !m.types.contains(ty) {
                        return invalid(at, format!("{}: undeclared type `{ty}`", a.name));
                    }
                    if scope.vars.contains_key(var) {
                        return invalid(at, format!("{}: forall shadows ?{var}", a.name));
                    }
                    (target, expr, Some((var.clone(), ty.clone())))
                }
            };
            if let Some((v, ty)) = &extra {
                scope.vars.insert(v.clone(), ty.clone());
            }
            scope.check_literal(&target.predicate, &target.args)?;
            scope.check_expr(expr, &assigned)?;
            let mut used = Vec::new();
            expr_vars(expr, &mut used);
            for v in used {
                if !var_names.contains(v) {
                    return invalid(at, format!("{}: undeclared action variable `{v}`", a.name));
                }
            }
            if let Some((v, _)) = &extra {
                scope.vars.remove(v);
            }
            if assigned.contains(target) {
                return invalid(
                    at,
                    format!("{}: `{}` assigned twice", a.name, target.predicate),
                );
            }
            assigned.push(target.clone());
        }
    }
    for (label, lits) in &a.failure_evidence {
        if lits.is_empty() {
            return invalid(
                at,
                format!("{}: failure label `{label}` has no evidence", a.name),
            );
        }
        for lt in lits {
            scope.check_literal(&lt.predicate, &lt.args)?;
            let known = a
                .precondition
                .iter()
                .chain(&a.postcondition)
                .any(|x| x.predicate == lt.predicate && x.args == lt.args);
            if !known {
                return invalid(
                    at,
                    format!(
                        "{}: failure evidence `{label}` mentions `{}` outside pre/postcondition",
                        a.name, lt.predicate
                    ),
                );
            }
        }
    }
    Ok(())
}
