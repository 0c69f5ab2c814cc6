//! Randomized comparisons against the brute-force references; the
//! acceptance target runs larger batches of the same generators.

mod common;

use rand::SeedableRng;
use robotask::recovery::{brute_force_trace, search_min_trace};

use common::random::{evidence, history, instance, Rng8};

#[test]
fn variable_elimination_matches_enumeration() {
    let mut rng = Rng8::seed_from_u64(7);
    for case in 0..60 {
        let (_, net) = instance(&mut rng, 24);
        let ev = evidence(&net, &mut rng);
        let ve = net.posterior(&ev).unwrap();
        let bf = net.brute_force_posterior(&ev).unwrap();
        assert!(ve.max_abs_diff(&bf) < 1e-9, "case {case}\n{}", net.dump());
    }
}

#[test]
fn forward_marginals_match_enumeration() {
    let mut rng = Rng8::seed_from_u64(8);
    for _ in 0..40 {
        let (_, net) = instance(&mut rng, 24);
        let bf = net.brute_force_posterior(&Default::default()).unwrap();
        assert!(net.forward_marginals().max_abs_diff(&bf) < 1e-12);
    }
}

#[test]
fn trace_search_matches_enumeration() {
    let model = robotask::assets::service_model();
    let mut rng = Rng8::seed_from_u64(9);
    for case in 0..60 {
        let (h, forced, start) = history(&mut rng, &model, 12);
        let fast = search_min_trace(&model, &h, &forced, &start);
        let slow = brute_force_trace(&model, &h, &forced, &start);
        assert_eq!(
            fast, slow,
            "case {case}: {h:?} forced {forced:?} from {start:?}"
        );
    }
}
