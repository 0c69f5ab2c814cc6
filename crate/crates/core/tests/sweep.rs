use robotask::assets::{service_model, task_source};
use robotask::bayesnet::Inference;
use robotask::sweep::{grid, preset, sweep, to_csv, OutcomeClass, SweepError, SweepSpec};
use robotask::task::parse_task;

fn point(name: &str, a: f64, b: f64) -> (OutcomeClass, Option<String>) {
    let (task, mut spec) = preset(name).unwrap();
    spec.values_a = vec![a];
    spec.values_b = vec![b];
    let program = parse_task(task_source(task).unwrap()).unwrap();
    let p = sweep(
        &service_model(),
        &program,
        &spec,
        Inference::VariableElimination,
    )
    .unwrap();
    (p[0].class, p[0].culprit.clone())
}

#[test]
fn grid_spans_both_ends() {
    let g = grid(0.01, 0.49, 10);
    assert_eq!(g.len(), 10);
    assert!((g[0] - 0.01).abs() < 1e-12 && (g[9] - 0.49).abs() < 1e-12);
}

#[test]
fn unreliable_follow_gives_re_engagement() {
    let (class, culprit) = point("es", 0.3, 0.02);
    assert_eq!(class, OutcomeClass::Recovered);
    assert!(culprit.unwrap().starts_with("askFollow"));
}

#[test]
fn unreliable_hand_over_means_package_lost() {
    let (class, culprit) = point("2pd", 0.02, 0.3);
    assert_eq!(class, OutcomeClass::Inferred);
    assert!(culprit.unwrap().starts_with("give(\"package 0\""));
}

#[test]
fn both_unreliable_predicts_failure() {
    assert_eq!(point("es", 0.45, 0.45).0, OutcomeClass::Predicted);
    assert_eq!(point("2pd", 0.45, 0.45).0, OutcomeClass::Predicted);
}

#[test]
fn comply_scenario_has_no_failure() {
    let (task, mut spec) = preset("2pd").unwrap();
    spec.scenario.directives.clear();
    spec.values_a = vec![0.1];
    spec.values_b = vec![0.1];
    let program = parse_task(task_source(task).unwrap()).unwrap();
    let p = sweep(
        &service_model(),
        &program,
        &spec,
        Inference::VariableElimination,
    )
    .unwrap();
    assert_eq!(p[0].class, OutcomeClass::NoFailure);
    let csv = to_csv(&p, &spec.recovered_label).unwrap();
    assert_eq!(
        csv,
        "alpha_a,alpha_b,class,t_f,culprit\n0.1000,0.1000,no-failure,-,-\n"
    );
}

#[test]
fn csv_quotes_culprits_and_is_reproducible() {
    let (task, mut spec) = preset("2pd").unwrap();
    spec.values_a = grid(0.01, 0.49, 3);
    spec.values_b = grid(0.01, 0.49, 3);
    let program = parse_task(task_source(task).unwrap()).unwrap();
    let run = || {
        to_csv(
            &sweep(
                &service_model(),
                &program,
                &spec,
                Inference::VariableElimination,
            )
            .unwrap(),
            "RP",
        )
        .unwrap()
    };
    let a = run();
    assert_eq!(a, run());
    assert!(
        a.contains(r#""pickup(""package 1"",""mail room"")""#),
        "{a}"
    );
}

#[test]
fn rejects_unknown_parameters_and_out_of_range_values() {
    let (task, mut spec): (_, SweepSpec) = preset("es").unwrap();
    let program = parse_task(task_source(task).unwrap()).unwrap();
    spec.param_a = "alpha-teleport".into();
    assert!(matches!(
        sweep(
            &service_model(),
            &program,
            &spec,
            Inference::VariableElimination
        ),
        Err(SweepError::UnknownParameter(_))
    ));
    let (_, mut spec) = preset("es").unwrap();
    spec.values_a = vec![0.7];
    assert!(matches!(
        sweep(
            &service_model(),
            &program,
            &spec,
            Inference::VariableElimination
        ),
        Err(SweepError::OutOfRange(_))
    ));
}

#[test]
fn coarse_grid_matches_brute_force_inference() {
    for name in ["es", "2pd"] {
        let (task, mut spec) = preset(name).unwrap();
        spec.values_a = grid(0.01, 0.49, 5);
        spec.values_b = grid(0.01, 0.49, 5);
        let program = parse_task(task_source(task).unwrap()).unwrap();
        let ve = sweep(
            &service_model(),
            &program,
            &spec,
            Inference::VariableElimination,
        )
        .unwrap();
        let bf = sweep(&service_model(), &program, &spec, Inference::BruteForce).unwrap();
        assert_eq!(ve, bf, "{name}");
    }
}
