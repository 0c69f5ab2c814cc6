//! Seeded generators for randomized oracle comparisons.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use robotask::bayesnet::{Evidence, NodeKind, TraceNet};
use robotask::bssr::{forward_update, BeliefState, Literal, MlWorld};
use robotask::model::{bind_call, parse_model, ActionCall, ArgSpec, RobotModel};

pub type Rng8 = ChaCha8Rng;

struct Pred {
    name: String,
    unary: bool,
}

fn lit_text(p: &Pred, arg: &str) -> String {
    if p.unary {
        format!("{}[{arg}]", p.name)
    } else {
        format!("{}[]", p.name)
    }
}

fn leaf(
    rng: &mut Rng8,
    preds: &[Pred],
    objects: &[String],
    vars: &[String],
    param: bool,
    earlier: &[String],
) -> String {
    match rng.gen_range(0..10) {
        0..=2 => vars.choose(rng).unwrap().clone(),
        3 => format!("(not {})", vars.choose(rng).unwrap()),
        4 if !earlier.is_empty() => format!("{}'", earlier.choose(rng).unwrap()),
        5 => ["true", "false"].choose(rng).unwrap().to_string(),
        _ => {
            let p = preds.choose(rng).unwrap();
            let arg = if param && rng.gen_bool(0.5) {
                "?x".to_string()
            } else {
                objects.choose(rng).unwrap().clone()
            };
            let l = lit_text(p, &arg);
            if rng.gen_bool(0.3) {
                format!("(not {l})")
            } else {
                l
            }
        }
    }
}

fn expr(
    rng: &mut Rng8,
    depth: usize,
    ctx: &(&[Pred], &[String], &[String], bool),
    earlier: &[String],
) -> String {
    let (preds, objects, vars, param) = *ctx;
    if depth == 0 || rng.gen_bool(0.4) {
        return leaf(rng, preds, objects, vars, param, earlier);
    }
    let op = ["and", "or", "not"].choose(rng).unwrap();
    if *op == "not" {
        return format!("(not {})", expr(rng, depth - 1, ctx, earlier));
    }
    let n = rng.gen_range(2..=3);
    let parts: Vec<String> = (0..n).map(|_| expr(rng, depth - 1, ctx, earlier)).collect();
    format!("({op} {})", parts.join(" "))
}

/// Source text of a small random model: one object type, nullary and unary
/// predicates, actions with zero or one parameter and random updates.
pub fn model_text(rng: &mut Rng8) -> String {
    let objects: Vec<String> = (0..rng.gen_range(1..=3)).map(|i| format!("o{i}")).collect();
    let preds: Vec<Pred> = (0..rng.gen_range(2..=4))
        .map(|i| Pred {
            name: format!("p{i}"),
            unary: rng.gen_bool(0.5),
        })
        .collect();
    let mut out = String::from("(define (domain random)\n  (:types obj)\n");
    out += &format!("  (:objects {} - obj)\n  (:predicates", objects.join(" "));
    for p in &preds {
        out += &if p.unary {
            format!(" ({} ?x - obj)", p.name)
        } else {
            format!(" ({})", p.name)
        };
    }
    out += ")\n  (:params";
    let n_params = 3;
    for i in 0..n_params {
        out += &format!(" (a{i} {:.3})", rng.gen_range(0.05..0.95));
    }
    out += ")\n";
    for a in 0..rng.gen_range(1..=3) {
        let param = rng.gen_bool(0.6);
        let vars: Vec<String> = (0..rng.gen_range(1..=2)).map(|i| format!("s{i}")).collect();
        out += &format!("  (:action act{a}\n");
        if param {
            out += "    :parameters (?x - obj)\n";
        }
        out += "    :vars (";
        for v in &vars {
            out += &format!("({v} a{})", rng.gen_range(0..n_params));
        }
        out += ")\n    :belief-update [\n";
        let mut targets: Vec<&Pred> = preds.iter().collect();
        targets.shuffle(rng);
        targets.truncate(rng.gen_range(1..=3).min(targets.len()));
        let mut earlier: Vec<String> = Vec::new();
        let ctx = (&preds[..], &objects[..], &vars[..], param);
        for p in targets {
            if p.unary && rng.gen_bool(0.2) {
                let body = format!("(and {} {}[?y])", vars.choose(rng).unwrap(), p.name);
                out += &format!("      (forall (?y - obj) {}[?y] := {body})\n", p.name);
                continue;
            }
            let arg = if param {
                "?x".to_string()
            } else {
                objects.choose(rng).unwrap().clone()
            };
            let target = lit_text(p, &arg);
            let e = expr(rng, 2, &ctx, &earlier);
            out += &format!("      {target} := {e}\n");
            earlier.push(target);
        }
        out += "    ])\n";
    }
    out + ")\n"
}

/// Random model and a program executed on it, with net size at most `limit`.
pub fn instance(rng: &mut Rng8, limit: usize) -> (RobotModel, TraceNet) {
    loop {
        let text = model_text(rng);
        let model = parse_model(&text).unwrap_or_else(|e| panic!("{e}\n{text}"));
        let names: Vec<String> = model.actions.keys().cloned().collect();
        let objects: Vec<String> = model.objects.keys().cloned().collect();
        let mut belief = BeliefState::new();
        let mut net = TraceNet::new(&belief);
        for t in 1..=rng.gen_range(2..=6) {
            let name = names.choose(rng).unwrap();
            let args: Vec<String> = if model.actions[name].parameters.is_empty() {
                vec![]
            } else {
                vec![objects.choose(rng).unwrap().clone()]
            };
            let g = bind_call(&model, name, &ArgSpec::positional(args), &belief)
                .unwrap()
                .ground(&model, &belief)
                .unwrap();
            net.extend(&g, t).unwrap();
            belief = forward_update(&belief, &g);
        }
        if net.len() <= limit
            && net
                .nodes()
                .any(|(_, n)| matches!(n.kind, NodeKind::World { .. }))
        {
            return (model, net);
        }
    }
}

/// One joint sample of every node, by ancestral sampling.
pub fn sample(net: &TraceNet, rng: &mut Rng8) -> Vec<bool> {
    let mut values: Vec<bool> = Vec::with_capacity(net.len());
    for (_, node) in net.nodes() {
        let row = node
            .parents
            .iter()
            .enumerate()
            .fold(0, |row, (i, p)| row | usize::from(values[p.0]) << i);
        values.push(rng.gen_bool(node.p_true(row)));
    }
    values
}

/// Observations of one to three world nodes, consistent with a joint sample.
pub fn evidence(net: &TraceNet, rng: &mut Rng8) -> Evidence {
    let values = sample(net, rng);
    let world: Vec<_> = net
        .nodes()
        .filter(|(_, n)| matches!(n.kind, NodeKind::World { .. }))
        .map(|(id, _)| id)
        .collect();
    let mut e = Evidence::new();
    for _ in 0..rng.gen_range(1..=3) {
        let id = *world.choose(rng).unwrap();
        e.observe(id, values[id.0]);
    }
    e
}

const PLACES: &[&str] = &["mail room", "lab", "office 0", "office 1", "office 2"];
const ITEMS: &[&str] = &["package 0", "package 1", "dissertation"];

/// A recovery problem on the service model: a random history of deliveries
/// and signatures, a random repaired start world, and forced positions.
pub fn history(
    rng: &mut Rng8,
    model: &RobotModel,
    max_len: usize,
) -> (Vec<ActionCall>, Vec<usize>, MlWorld) {
    let n = rng.gen_range(2..=max_len);
    let mut world: MlWorld = [Literal::new("at", &[PLACES.choose(rng).unwrap()])]
        .into_iter()
        .collect();
    let mut calls = Vec::new();
    while calls.len() < n {
        let (name, args): (&str, Vec<&str>) = match rng.gen_range(0..10) {
            0..=3 => ("goto", vec![PLACES.choose(rng).unwrap()]),
            4 | 5 => ("pickup", vec![ITEMS.choose(rng).unwrap()]),
            6 | 7 => ("give", vec![ITEMS.choose(rng).unwrap()]),
            _ => {
                let l = *PLACES.choose(rng).unwrap();
                (
                    "getSignature",
                    vec![l, "signature 0", ITEMS.choose(rng).unwrap()],
                )
            }
        };
        let Ok(call) = bind_call(model, name, &ArgSpec::positional(args), &world) else {
            continue;
        };
        // some actions silently do nothing
        if rng.gen_bool(0.8) {
            if let Ok(g) = call.ground(model, &world) {
                g.apply_nominal(&mut world);
            }
        }
        calls.push(call);
    }
    let t_f = rng.gen_range(1..=n);
    let mut start = MlWorld::new();
    start.assign(Literal::new("at", &[PLACES.choose(rng).unwrap()]), true);
    for item in ITEMS {
        if rng.gen_bool(0.3) {
            start.assign(Literal::new("have", &[item]), true);
        }
    }
    (calls, vec![t_f - 1, n - 1], start)
}
