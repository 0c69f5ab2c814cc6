use std::fmt::Write;

use super::*;

fn name(s: &str) -> String {
    let bare = !s.is_empty()
        && s.chars().all(|c| c.is_alphanumeric() || "-_.".contains(c))
        && !matches!(s, "true" | "false" | "and" | "or" | "not" | "-")
        && !s.starts_with('-');
    if bare {
        s.to_string()
    } else {
        format!("{s:?}")
    }
}

fn term(t: &Term) -> String {
    match t {
        Term::Var(v) => format!("?{v}"),
        Term::Const(c) => name(c),
        Term::Apply(f, inner) => format!("({} {})", name(f), term(inner)),
    }
}

fn template(l: &LiteralTemplate) -> String {
    let mut s = format!("({}", name(&l.predicate));
    for a in &l.args {
        s.push(' ');
        s.push_str(&term(a));
    }
    s.push(')');
    if l.positive {
        s
    } else {
        format!("(not {s})")
    }
}

fn condition(c: &[LiteralTemplate]) -> String {
    let parts: Vec<String> = c.iter().map(template).collect();
    format!("(and {})", parts.join(" ")).replace("(and )", "(and)")
}

fn lit_ref(r: &LitRef) -> String {
    let args: Vec<String> = r.args.iter().map(term).collect();
    format!("{}[{}]", name(&r.predicate), args.join(", "))
}

fn expr(e: &BoolExpr) -> String {
    match e {
        BoolExpr::Const(b) => b.to_string(),
        BoolExpr::Var(v) => v.clone(),
        BoolExpr::Prior(r) => lit_ref(r),
        BoolExpr::Next(r) => format!("{}'", lit_ref(r)),
        BoolExpr::Not(inner) => format!("(not {})", expr(inner)),
        BoolExpr::And(es) => nary("and", es),
        BoolExpr::Or(es) => nary("or", es),
    }
}

fn nary(op: &str, es: &[BoolExpr]) -> String {
    let mut s = format!("({op}");
    for e in es {
        s.push(' ');
        s.push_str(&expr(e));
    }
    s.push(')');
    s
}

fn program(out: &mut String, kw: &str, stmts: &[UpdateStmt]) {
    let _ = writeln!(out, "    {kw} [");
    for st in stmts {
        match st {
            UpdateStmt::Assign { target, expr: e } => {
                let _ = writeln!(out, "      {} := {}", lit_ref(target), expr(e));
            }
            UpdateStmt::ForAll {
                var,
                ty,
                target,
                expr: e,
            } => {
                let _ = writeln!(
                    out,
                    "      (forall (?{var} - {}) {} := {})",
                    name(ty),
                    lit_ref(target),
                    expr(e)
                );
            }
        }
    }
    let _ = writeln!(out, "    ]");
}

/// Render a model in the surface syntax accepted by `parse_model`.
pub fn print_model(m: &RobotModel) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "(define (domain {})", name(&m.domain));
    let types: Vec<String> = m.types.iter().map(|t| name(t)).collect();
    let _ = writeln!(out, "  (:types {})", types.join(" "));
    let _ = writeln!(out, "  (:objects");
    for (o, ty) in &m.objects {
        let _ = writeln!(out, "    {} - {}", name(o), name(ty));
    }
    let _ = writeln!(out, "  )");
    let _ = writeln!(out, "  (:predicates");
    for p in m.predicates.values() {
        let args: Vec<String> = p
            .arg_types
            .iter()
            .enumerate()
            .map(|(i, t)| format!(" ?a{i} - {}", name(t)))
            .collect();
        let _ = writeln!(out, "    ({}{})", name(&p.name), args.concat());
    }
    let _ = writeln!(out, "  )");
    let _ = writeln!(out, "  (:functions");
    for f in m.functions.values() {
        let pairs: Vec<String> = f
            .mapping
            .iter()
            .map(|(a, b)| format!("({} {})", name(a), name(b)))
            .collect();
        let _ = writeln!(
            out,
            "    ({} ?x - {}) - {} ({})",
            name(&f.name),
            name(&f.arg_type),
            name(&f.result_type),
            pairs.join(" ")
        );
    }
    let _ = writeln!(out, "  )");
    let _ = writeln!(out, "  (:params");
    for (k, v) in &m.params {
        let _ = writeln!(out, "    ({} {v:?})", name(k));
    }
    let _ = writeln!(out, "  )");
    for a in m.actions.values() {
        let _ = writeln!(out, "  (:action {}", name(&a.name));
        let params: Vec<String> = a
            .parameters
            .iter()
            .map(|p| {
                let ann = match &p.mode {
                    ParamMode::Explicit => String::new(),
                    ParamMode::Implicit(pred) => format!(" @implicit({})", name(pred)),
                    ParamMode::Current(pred) => format!(" @current({})", name(pred)),
                };
                format!("?{} - {}{ann}", p.name, name(&p.ty))
            })
            .collect();
        let _ = writeln!(out, "    :parameters ({})", params.join(" "));
        let _ = writeln!(out, "    :precondition {}", condition(&a.precondition));
        let _ = writeln!(out, "    :postcondition {}", condition(&a.postcondition));
        let vars: Vec<String> = a
            .belief_update
            .vars
            .iter()
            .map(|v| format!("({} {})", name(&v.name), name(&v.alpha)))
            .collect();
        let _ = writeln!(out, "    :vars ({})", vars.join(" "));
        program(&mut out, ":belief-update", &a.belief_update.statements);
        if let Some(fb) = &a.belief_update.fallback {
            program(&mut out, ":belief-update-fallback", fb);
        }
        if !a.failure_evidence.is_empty() {
            let _ = writeln!(out, "    :failure-evidence (");
            for (label, lits) in &a.failure_evidence {
                let _ = writeln!(out, "      ({} {})", name(label), condition(lits));
            }
            let _ = writeln!(out, "    )");
        }
        if let Some(p) = &a.prompt {
            let _ = writeln!(out, "    :prompt {p:?}");
        }
        let _ = writeln!(out, "  )");
    }
    out.push_str(")\n");
    out
}
