use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::*;
use crate::bssr::{Literal, WorldView};

/// Arguments as written at a call site.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ArgSpec {
    pub positional: Vec<String>,
    pub keyword: Vec<(String, String)>,
}

impl ArgSpec {
    pub fn positional<I: IntoIterator<Item = S>, S: Into<String>>(args: I) -> Self {
        ArgSpec {
            positional: args.into_iter().map(Into::into).collect(),
            keyword: Vec::new(),
        }
    }
}

/// A schema with its explicit and `@implicit` parameters bound. `@current`
/// parameters stay open until the call is grounded against a world.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ActionCall {
    pub schema: String,
    pub args: Vec<(String, String)>,
}

impl ActionCall {
    pub fn arg(&self, param: &str) -> Option<&str> {
        self.args
            .iter()
            .find(|(p, _)| p == param)
            .map(|(_, o)| o.as_str())
    }

    pub fn arg_values(&self) -> impl Iterator<Item = &str> {
        self.args.iter().map(|(_, o)| o.as_str())
    }

    /// Ground against a world view, resolving `@current` parameters.
    pub fn ground(
        &self,
        model: &RobotModel,
        view: &dyn WorldView,
    ) -> Result<GroundAction, GroundError> {
        ground(model, self, view)
    }
}

impl fmt::Display for ActionCall {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(", self.schema)?;
        for (i, (_, o)) in self.args.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{o:?}")?;
        }
        write!(f, ")")
    }
}

fn infer(
    model: &RobotModel,
    schema: &ActionSchema,
    param: &Parameter,
    predicate: &str,
    view: &dyn WorldView,
) -> Result<Option<String>, GroundError> {
    let candidates: Vec<String> = view
        .literals_of(predicate)
        .into_iter()
        .filter(|l| l.args.len() == 1 && view.ml_true(l))
        .map(|l| l.args[0].clone())
        .filter(|o| model.objects.get(o) == Some(&param.ty))
        .collect();
    match candidates.len() {
        0 => Ok(None),
        1 => Ok(candidates.into_iter().next()),
        _ => Err(GroundError::Ambiguous {
            action: schema.name.clone(),
            param: param.name.clone(),
            candidates,
        }),
    }
}

/// Bind call-site arguments to a schema's parameters.
///
/// Positional arguments are matched by type in declaration order: a parameter
/// whose type does not fit is skipped if it can be inferred, otherwise it is
/// a type error. Omitted `@implicit` parameters are inferred from the unique
/// ML-true literal of their predicate.
pub fn bind_call(
    model: &RobotModel,
    name: &str,
    spec: &ArgSpec,
    view: &dyn WorldView,
) -> Result<ActionCall, GroundError> {
    let schema = model
        .action(name)
        .ok_or_else(|| GroundError::UnknownAction(name.to_string()))?;
    let mut bound: BTreeMap<&str, String> = BTreeMap::new();
    let type_of = |o: &str| {
        model
            .objects
            .get(o)
            .cloned()
            .ok_or_else(|| GroundError::UnknownObject(o.to_string()))
    };
    for (k, v) in &spec.keyword {
        let p = schema
            .param(k)
            .ok_or_else(|| GroundError::UnknownParameter {
                action: name.into(),
                param: k.clone(),
            })?;
        let ty = type_of(v)?;
        if ty != p.ty {
            return Err(GroundError::TypeMismatch {
                action: name.into(),
                arg: k.clone(),
                expected: p.ty.clone(),
                found: ty,
                object: v.clone(),
            });
        }
        bound.insert(&p.name, v.clone());
    }
    let mut k = 0;
    for obj in &spec.positional {
        let ty = type_of(obj)?;
        loop {
            let Some(p) = schema.parameters.get(k) else {
                return Err(GroundError::TooManyArguments {
                    action: name.into(),
                });
            };
            if bound.contains_key(p.name.as_str()) {
                k += 1;
                continue;
            }
            if p.ty == ty {
                bound.insert(&p.name, obj.clone());
                k += 1;
                break;
            }
            if p.mode == ParamMode::Explicit {
                return Err(GroundError::TypeMismatch {
                    action: name.into(),
                    arg: p.name.clone(),
                    expected: p.ty.clone(),
                    found: ty,
                    object: obj.clone(),
                });
            }
            k += 1;
        }
    }
    let mut args = Vec::new();
    for p in &schema.parameters {
        if let Some(v) = bound.get(p.name.as_str()) {
            args.push((p.name.clone(), v.clone()));
            continue;
        }
        match &p.mode {
            ParamMode::Explicit => {
                return Err(GroundError::MissingArgument {
                    action: name.into(),
                    param: p.name.clone(),
                })
            }
            ParamMode::Implicit(pred) => match infer(model, schema, p, pred, view)? {
                Some(o) => args.push((p.name.clone(), o)),
                None => {
                    return Err(GroundError::Unresolvable {
                        action: name.into(),
                        param: p.name.clone(),
                        predicate: pred.clone(),
                    })
                }
            },
            ParamMode::Current(_) => {}
        }
    }
    Ok(ActionCall {
        schema: name.to_string(),
        args,
    })
}

/// Bind and ground in one step.
pub fn ground_action(
    model: &RobotModel,
    name: &str,
    spec: &ArgSpec,
    view: &dyn WorldView,
) -> Result<GroundAction, GroundError> {
    bind_call(model, name, spec, view)?.ground(model, view)
}

struct Env<'a> {
    model: &'a RobotModel,
    bindings: BTreeMap<String, String>,
}

impl Env<'_> {
    /// `Ok(None)` when the term mentions an unbound parameter.
    fn eval(&self, t: &Term) -> Result<Option<String>, GroundError> {
        match t {
            Term::Var(v) => Ok(self.bindings.get(v).cloned()),
            Term::Const(c) => Ok(Some(c.clone())),
            Term::Apply(f, inner) => {
                let Some(arg) = self.eval(inner)? else {
                    return Ok(None);
                };
                let decl = &self.model.functions[f];
                match decl.mapping.get(&arg) {
                    Some(r) => Ok(Some(r.clone())),
                    None => Err(GroundError::FunctionUndefined {
                        function: f.clone(),
                        object: arg,
                    }),
                }
            }
        }
    }

    fn literal(&self, predicate: &str, args: &[Term]) -> Result<Option<Literal>, GroundError> {
        let mut out = Vec::with_capacity(args.len());
        for a in args {
            match self.eval(a)? {
                Some(o) => out.push(o),
                None => return Ok(None),
            }
        }
        Ok(Some(Literal {
            predicate: predicate.to_string(),
            args: out,
        }))
    }

    fn condition(&self, c: &[LiteralTemplate]) -> Result<Vec<(Literal, bool)>, GroundError> {
        let mut out = Vec::new();
        for lt in c {
            if let Some(l) = self.literal(&lt.predicate, &lt.args)? {
                out.push((l, lt.positive));
            }
        }
        Ok(out)
    }

    fn expr(
        &self,
        e: &BoolExpr,
        vars: &[ActionVarDecl],
        emitted: &BTreeMap<Literal, usize>,
    ) -> Result<GroundExpr, GroundError> {
        Ok(match e {
            BoolExpr::Const(b) => GroundExpr::Const(*b),
            BoolExpr::Var(v) => GroundExpr::Var(vars.iter().position(|d| &d.name == v).unwrap()),
            BoolExpr::Prior(r) => match self.literal(&r.predicate, &r.args)? {
                Some(l) => GroundExpr::Prior(l),
                None => GroundExpr::Const(false),
            },
            BoolExpr::Next(r) => match self.literal(&r.predicate, &r.args)? {
                Some(l) => match emitted.get(&l) {
                    Some(i) => GroundExpr::Next(*i),
                    // the assignment was not expanded, so the value persists
                    None => GroundExpr::Prior(l),
                },
                None => GroundExpr::Const(false),
            },
            BoolExpr::Not(inner) => GroundExpr::Not(Box::new(self.expr(inner, vars, emitted)?)),
            BoolExpr::And(es) => GroundExpr::And(
                es.iter()
                    .map(|x| self.expr(x, vars, emitted))
                    .collect::<Result<_, _>>()?,
            ),
            BoolExpr::Or(es) => GroundExpr::Or(
                es.iter()
                    .map(|x| self.expr(x, vars, emitted))
                    .collect::<Result<_, _>>()?,
            ),
        })
    }
}

fn ground(
    model: &RobotModel,
    call: &ActionCall,
    view: &dyn WorldView,
) -> Result<GroundAction, GroundError> {
    let schema = model
        .action(&call.schema)
        .ok_or_else(|| GroundError::UnknownAction(call.schema.clone()))?;
    let mut bindings: BTreeMap<String, String> = call.args.iter().cloned().collect();
    let mut unresolved = None;
    for p in &schema.parameters {
        if bindings.contains_key(&p.name) {
            continue;
        }
        match &p.mode {
            ParamMode::Current(pred) => match infer(model, schema, p, pred, view)? {
                Some(o) => {
                    bindings.insert(p.name.clone(), o);
                }
                None => unresolved = Some((p.name.clone(), pred.clone())),
            },
            _ => {
                return Err(GroundError::MissingArgument {
                    action: schema.name.clone(),
                    param: p.name.clone(),
                })
            }
        }
    }
    let program = match (&unresolved, &schema.belief_update.fallback) {
        (None, _) => &schema.belief_update.statements,
        (Some(_), Some(fb)) => fb,
        (Some((param, predicate)), None) => {
            return Err(GroundError::Unresolvable {
                action: schema.name.clone(),
                param: param.clone(),
                predicate: predicate.clone(),
            })
        }
    };
    let env = Env { model, bindings };
    let vars_decl = &schema.belief_update.vars;
    let mut statements: Vec<GroundStatement> = Vec::new();
    let mut emitted: BTreeMap<Literal, usize> = BTreeMap::new();
    let bound_values: Vec<String> = env.bindings.values().cloned().collect();
    let mut push = |target: Literal, expr: GroundExpr, emitted: &mut BTreeMap<Literal, usize>| {
        if emitted.contains_key(&target) {
            return Err(GroundError::DuplicateTarget {
                action: schema.name.clone(),
                literal: target.to_string(),
            });
        }
        emitted.insert(target.clone(), statements.len());
        statements.push(GroundStatement { target, expr });
        Ok(())
    };
    for stmt in program {
        match stmt {
            UpdateStmt::Assign { target, expr } => {
                let Some(t) = env.literal(&target.predicate, &target.args)? else {
                    continue;
                };
                let e = env.expr(expr, vars_decl, &emitted)?;
                push(t, e, &mut emitted)?;
            }
            UpdateStmt::ForAll {
                var,
                ty,
                target,
                expr,
            } => {
                for obj in model.objects_of_type(ty) {
                    if bound_values.contains(obj) {
                        continue;
                    }
                    let mut inner = Env {
                        model,
                        bindings: env.bindings.clone(),
                    };
                    inner.bindings.insert(var.clone(), obj.clone());
                    let Some(t) = inner.literal(&target.predicate, &target.args)? else {
                        continue;
                    };
                    if !view.defines(&t) {
                        continue;
                    }
                    let e = inner.expr(expr, vars_decl, &emitted)?;
                    push(t, e, &mut emitted)?;
                }
            }
        }
    }
    let args = schema
        .parameters
        .iter()
        .filter_map(|p| {
            env.bindings
                .get(&p.name)
                .map(|o| (p.name.clone(), o.clone()))
        })
        .collect();
    let vars = vars_decl
        .iter()
        .map(|v| GroundVar {
            name: v.name.clone(),
            alpha: model.params[&v.alpha],
        })
        .collect();
    Ok(GroundAction {
        schema: schema.name.clone(),
        args,
        precondition: env.condition(&schema.precondition)?,
        postcondition: env.condition(&schema.postcondition)?,
        vars,
        statements,
    })
}

impl RobotModel {
    /// Failure evidence declared for `label`, instantiated for a call.
    pub fn failure_evidence(
        &self,
        call: &ActionCall,
        label: &str,
        view: &dyn WorldView,
    ) -> Result<Option<Vec<(Literal, bool)>>, GroundError> {
        let schema = self
            .action(&call.schema)
            .ok_or_else(|| GroundError::UnknownAction(call.schema.clone()))?;
        let Some(lits) = schema.failure_evidence.get(label) else {
            return Ok(None);
        };
        let ground = call.ground(self, view)?;
        let env = Env {
            model: self,
            bindings: ground.args.iter().cloned().collect(),
        };
        env.condition(lits).map(Some)
    }
}
