mod common;

use robotask::assets::{service_model, task_source};
use robotask::executor::{
    ActionOutcome, Detection, Dispatch, EnvironmentPort, EventKind, ExecutorConfig, Notification,
    PortError, RunStatus, Session,
};
use robotask::simenv::{run_scenario, Behavior, Directive, ScenarioSpec, SimEnv};
use robotask::task::{parse_task, PromptRequest};

fn two_pd() -> robotask::task::TaskProgram {
    parse_task(task_source("2pd").unwrap()).unwrap()
}

fn spec(directives: Vec<Directive>) -> ScenarioSpec {
    ScenarioSpec {
        task: Some("2pd".into()),
        initial_world: vec!["at(start)".into()],
        directives,
        ..Default::default()
    }
}

fn directive(action: &str, args: &[&str], occurrence: usize, behavior: Behavior) -> Directive {
    Directive {
        action: action.into(),
        args: args.iter().map(|s| s.to_string()).collect(),
        occurrence,
        behavior,
    }
}

#[test]
fn nominal_run_completes_without_diagnosis() {
    let r = run_scenario(
        &service_model(),
        &two_pd(),
        &spec(vec![]),
        ExecutorConfig::default(),
    )
    .unwrap();
    assert_eq!(r.status, RunStatus::Done);
    assert!(r.failures.is_empty());
    assert_eq!(r.net.frontier(), 7);
    assert_eq!(r.beliefs.len(), 8);
    assert!(r.truth.holds(&"at(\"office 1\")".parse().unwrap()));
}

#[test]
fn repeated_failures_hit_the_retry_limit() {
    let d = (0..4)
        .map(|k| directive("pickup", &["package 1"], k, Behavior::SilentFail))
        .collect();
    let r = run_scenario(
        &service_model(),
        &two_pd(),
        &spec(d),
        ExecutorConfig::default(),
    )
    .unwrap();
    assert_eq!(r.status, RunStatus::RetryLimit);
    assert_eq!(r.status.exit_code(), 3);
    assert_eq!(
        r.log
            .iter()
            .filter(|e| e.kind == EventKind::RecoveryPlan)
            .count(),
        3
    );
}

#[test]
fn retry_limit_is_configurable() {
    let d = (0..2)
        .map(|k| directive("pickup", &["package 1"], k, Behavior::SilentFail))
        .collect();
    let config = ExecutorConfig {
        retry_limit: 1,
        ..Default::default()
    };
    let r = run_scenario(&service_model(), &two_pd(), &spec(d), config).unwrap();
    assert_eq!(r.status, RunStatus::RetryLimit);
    let r = run_scenario(
        &service_model(),
        &two_pd(),
        &spec(vec![directive(
            "pickup",
            &["package 1"],
            0,
            Behavior::SilentFail,
        )]),
        ExecutorConfig {
            retry_limit: 1,
            ..Default::default()
        },
    )
    .unwrap();
    assert_eq!(r.status, RunStatus::Done);
}

#[test]
fn unreliable_action_makes_the_belief_predict_failure() {
    let mut s = spec(vec![]);
    s.alpha_overrides.insert("alpha-pickup".into(), 0.6);
    let r = run_scenario(&service_model(), &two_pd(), &s, ExecutorConfig::default()).unwrap();
    assert!(matches!(r.status, RunStatus::Unrecoverable(_)));
    let kinds: Vec<EventKind> = r.log.iter().rev().take(3).map(|e| e.kind).collect();
    assert_eq!(
        kinds,
        [
            EventKind::Abort,
            EventKind::Diagnosis,
            EventKind::PrecondFail
        ]
    );
    assert_eq!(r.failures.len(), 1);
    assert_eq!(r.failures[0].detection, Detection::Predicted);
    assert_eq!(
        r.failures[0].diagnosis.culprit.as_ref().unwrap().schema,
        "give"
    );
    // nothing was dispatched for the predicted failure
    assert_eq!(r.net.frontier(), 4);
}

#[test]
fn inference_engines_agree_on_scenarios() {
    let d = vec![directive("pickup", &["package 1"], 0, Behavior::SilentFail)];
    let ve = run_scenario(
        &service_model(),
        &two_pd(),
        &spec(d.clone()),
        ExecutorConfig::default(),
    )
    .unwrap();
    let bf = run_scenario(
        &service_model(),
        &two_pd(),
        &spec(d),
        ExecutorConfig {
            inference: robotask::bayesnet::Inference::BruteForce,
            ..Default::default()
        },
    )
    .unwrap();
    assert_eq!(ve.log, bf.log);
}

struct Disconnecting {
    after: usize,
}

impl EnvironmentPort for Disconnecting {
    fn execute(&mut self, _: &Dispatch<'_>) -> Result<ActionOutcome, PortError> {
        if self.after == 0 {
            return Err(PortError::Disconnected("gone".into()));
        }
        self.after -= 1;
        Ok(ActionOutcome::Confirmed)
    }

    fn prompt(&mut self, _: &PromptRequest) -> Result<String, PortError> {
        Err(PortError::Disconnected("gone".into()))
    }
}

#[test]
fn disconnect_aborts_with_code_two() {
    let m = service_model();
    let p = two_pd();
    let mut s = Session::new(&m, &p, ExecutorConfig::default());
    let status = s.run(&mut Disconnecting { after: 2 }, &mut |_| {});
    assert_eq!(status.exit_code(), 2);
    assert_eq!(s.net().frontier(), 2);
    assert_eq!(s.log().last().unwrap().kind, EventKind::Abort);
}

#[test]
fn notifications_follow_the_log() {
    let m = service_model();
    let p = two_pd();
    let mut env = SimEnv::new(&m, &spec(vec![])).unwrap();
    let mut s = Session::new(&m, &p, ExecutorConfig::default());
    let (mut events, mut beliefs) = (0, Vec::new());
    s.run(&mut env, &mut |n| match n {
        Notification::Event(_) => events += 1,
        Notification::Belief { t, .. } => beliefs.push(t),
    });
    assert_eq!(events, s.log().len());
    assert_eq!(beliefs, (0..=7).collect::<Vec<_>>());
}

#[test]
fn dispatch_renders_prompts_and_labels() {
    struct Capture(Vec<(Option<String>, Vec<String>)>);
    impl EnvironmentPort for Capture {
        fn execute(&mut self, d: &Dispatch<'_>) -> Result<ActionOutcome, PortError> {
            self.0.push((d.prompt.clone(), d.labels.clone()));
            Ok(ActionOutcome::Confirmed)
        }
        fn prompt(&mut self, r: &PromptRequest) -> Result<String, PortError> {
            Ok(r.buttons[0].clone())
        }
    }
    let m = service_model();
    let p = two_pd();
    let mut port = Capture(Vec::new());
    Session::new(&m, &p, ExecutorConfig::default()).run(&mut port, &mut |_| {});
    assert_eq!(port.0[0].0, None);
    assert_eq!(
        port.0[1].0.as_deref(),
        Some("Please place package 0 in my basket.")
    );
    assert_eq!(port.0[4].1, ["missing"]);
}

#[test]
fn timeout_uses_the_timeout_label() {
    let s = ScenarioSpec {
        initial_world: vec!["at(start)".into()],
        prompt_answers: vec!["A325".into()],
        directives: vec![directive("confirmArrival", &[], 0, Behavior::Timeout)],
        ..Default::default()
    };
    let p = parse_task(task_source("es").unwrap()).unwrap();
    let r = run_scenario(&service_model(), &p, &s, ExecutorConfig::default()).unwrap();
    assert_eq!(r.status, RunStatus::Done);
    assert!(r
        .log
        .iter()
        .any(|e| e.kind == EventKind::ActionCannot && e.payload == "timeout"));
    assert!(r.truth.holds(&"arrived(A325)".parse().unwrap()));
}

#[test]
fn stochastic_runs_are_reproducible() {
    let mut s = spec(vec![]);
    s.stochastic = true;
    s.alpha_overrides.insert("alpha-pickup".into(), 0.45);
    let logs: Vec<_> = (0..2)
        .map(|_| {
            run_scenario(&service_model(), &two_pd(), &s, ExecutorConfig::default())
                .unwrap()
                .log
        })
        .collect();
    assert_eq!(logs[0], logs[1]);
}

#[test]
fn scenario_validation_rejects_unknown_names() {
    let m = service_model();
    let mut s = spec(vec![directive("fly", &[], 0, Behavior::Comply)]);
    assert!(s.validate(&m).is_err());
    s.directives = vec![directive(
        "give",
        &[],
        0,
        Behavior::PressCannot("nope".into()),
    )];
    assert!(s.validate(&m).is_err());
    s.directives.clear();
    s.initial_world = vec!["at(moon)".into()];
    assert!(s.validate(&m).is_err());
    s.initial_world = vec!["at(start".into()];
    assert!(s.validate(&m).is_err());
}

#[test]
fn behaviors_read_from_json() {
    let s = ScenarioSpec::from_json(
        r#"{"initial_world": [], "directives": [
            {"action": "a", "behavior": "silent-fail"},
            {"action": "b", "behavior": {"wrong-action": {"args": ["2"]}}},
            {"action": "c", "behavior": {"press-cannot": "missing"}, "occurrence": 2}]}"#,
    )
    .unwrap();
    assert_eq!(s.directives[0].behavior, Behavior::SilentFail);
    assert_eq!(
        s.directives[1].behavior,
        Behavior::WrongAction {
            action: None,
            args: vec!["2".into()]
        }
    );
    assert_eq!(s.directives[2].occurrence, 2);
}
