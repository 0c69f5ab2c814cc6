//! Bundled scenarios against their frozen logs. Set `UPDATE_GOLDEN=1` to
//! rewrite the logs after an intended change, then review the diff.

use std::path::PathBuf;

use robotask::assets::{scenario_source, service_model, task_source, SCENARIOS};
use robotask::executor::{render_log, EventKind, ExecutorConfig, RunStatus};
use robotask::simenv::{run_scenario, ScenarioRun, ScenarioSpec};
use robotask::task::parse_task;

fn run(name: &str) -> ScenarioRun {
    let spec = ScenarioSpec::from_json(scenario_source(name).unwrap()).unwrap();
    let program = parse_task(task_source(spec.task.as_deref().unwrap()).unwrap()).unwrap();
    run_scenario(&service_model(), &program, &spec, ExecutorConfig::default()).unwrap()
}

fn payloads(run: &ScenarioRun, kind: EventKind) -> Vec<String> {
    run.log
        .iter()
        .filter(|e| e.kind == kind)
        .map(|e| e.payload.clone())
        .collect()
}

#[test]
fn logs_match_golden_files() {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("assets/golden");
    let update = std::env::var_os("UPDATE_GOLDEN").is_some();
    for (name, _) in SCENARIOS {
        let text = render_log(&run(name).log);
        let path = dir.join(format!("{name}.log"));
        if update {
            std::fs::write(&path, &text).unwrap();
        } else {
            let want = std::fs::read_to_string(&path)
                .unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            assert_eq!(text, want, "log of {name} changed");
        }
    }
}

#[test]
fn expected_plans_and_outcomes() {
    let cases: &[(&str, &[&str], i32)] = &[
        (
            "2pd-package-1-missing",
            &["RECOVER include=[1,3,6,7] len=4"],
            0,
        ),
        (
            "2pd-package-0-missing",
            &["RECOVER include=[1,2,4,5] len=4"],
            0,
        ),
        ("el-wrong-floor", &["RECOVER include=[4,5,6] len=3"], 0),
        ("el-not-called", &["RECOVER include=[2,3] len=2"], 0),
        ("5sc-not-picked-up", &["RECOVER include=[1,2,3,4] len=4"], 0),
        ("5sc-not-returned", &["RECOVER include=[2,14] len=2"], 2),
        (
            "es-visitor-wandered",
            &["RECOVER include=[1,2,3,4] len=4"],
            0,
        ),
        ("es-visitor-lost", &["RECOVER include=[1,2,3,4] len=4"], 2),
    ];
    for (name, plans, code) in cases {
        let r = run(name);
        assert_eq!(payloads(&r, EventKind::RecoveryPlan), *plans, "{name}");
        assert_eq!(r.status.exit_code(), *code, "{name}: {:?}", r.status);
    }
}

#[test]
fn recovered_runs_resume_and_finish_the_program() {
    let r = run("el-wrong-floor");
    assert_eq!(r.status, RunStatus::Done);
    let resume = r
        .log
        .iter()
        .position(|e| e.kind == EventKind::Resume)
        .unwrap();
    let next = &r.log[resume + 1];
    assert_eq!(next.kind, EventKind::ActionStart);
    assert!(next.payload.starts_with("exitElevator"), "{next}");
    assert!(r.truth.holds(&"at(\"floor 1 lobby\")".parse().unwrap()));
}

#[test]
fn second_failure_during_recovery_aborts() {
    let r = run("5sc-not-returned");
    let diags = payloads(&r, EventKind::Diagnosis);
    assert_eq!(diags.len(), 2);
    assert!(diags[1].contains("class=UnintendedEffect"), "{}", diags[1]);
    assert_eq!(r.log.last().unwrap().kind, EventKind::Abort);
}

#[test]
fn scenarios_validate_against_the_model() {
    let model = service_model();
    for (name, text) in SCENARIOS {
        let spec = ScenarioSpec::from_json(text).unwrap();
        spec.validate(&model)
            .unwrap_or_else(|e| panic!("{name}: {e}"));
        assert!(
            task_source(spec.task.as_deref().unwrap()).is_some(),
            "{name}"
        );
    }
}
