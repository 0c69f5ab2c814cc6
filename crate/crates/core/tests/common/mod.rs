#![allow(dead_code)]

pub mod random;

use std::collections::BTreeMap;

use robotask::assets::service_model;
use robotask::bayesnet::TraceNet;
use robotask::bssr::{forward_update, BeliefState, Literal};
use robotask::model::{bind_call, ArgSpec, GroundAction, RobotModel};

pub fn model(overrides: &[(&str, f64)]) -> RobotModel {
    let o: BTreeMap<String, f64> = overrides.iter().map(|(k, v)| (k.to_string(), *v)).collect();
    service_model().with_params(&o).unwrap()
}

/// Execute calls nominally, returning the net and the belief after each step.
pub fn build(m: &RobotModel, calls: &[(&str, &[&str])]) -> (TraceNet, Vec<BeliefState>) {
    let mut belief = BeliefState::new();
    let mut net = TraceNet::new(&belief);
    let mut beliefs = vec![belief.clone()];
    for (t, (name, args)) in calls.iter().enumerate() {
        let g = ground(m, name, args, &belief);
        net.extend(&g, t + 1).unwrap();
        belief = forward_update(&belief, &g);
        beliefs.push(belief.clone());
    }
    (net, beliefs)
}

pub fn ground(m: &RobotModel, name: &str, args: &[&str], belief: &BeliefState) -> GroundAction {
    bind_call(m, name, &ArgSpec::positional(args.iter().copied()), belief)
        .unwrap()
        .ground(m, belief)
        .unwrap()
}

pub const TWO_PD: &[(&str, &[&str])] = &[
    ("goto", &["mail room"]),
    ("pickup", &["package 0"]),
    ("pickup", &["package 1"]),
    ("goto", &["office 0"]),
    ("give", &["package 0"]),
    ("goto", &["office 1"]),
];

pub const ES: &[(&str, &[&str])] = &[
    ("goto", &["initial location"]),
    ("askFollow", &["initial location"]),
    ("escortTo", &["A323"]),
];

pub fn lit(p: &str, a: &str) -> Literal {
    Literal::new(p, &[a])
}
