//! Parameter sweeps: run one deterministic failure scenario over a grid of
//! two failure probabilities and record which way the robot handled it.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::assets::scenario_source;
use crate::bayesnet::Inference;
use crate::diagnosis::FailureClass;
use crate::executor::{Detection, ExecutorConfig, RunStatus};
use crate::model::RobotModel;
use crate::simenv::{run_scenario, ScenarioError, ScenarioRun, ScenarioSpec};
use crate::task::TaskProgram;

#[derive(Debug, Error)]
pub enum SweepError {
    #[error("unknown parameter `{0}`")]
    UnknownParameter(String),
    #[error("grid value {0} outside (0, 0.5)")]
    OutOfRange(f64),
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

/// `n` evenly spaced values from `lo` to `hi` inclusive.
pub fn grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![lo],
        _ => (0..n)
            .map(|i| lo + i as f64 * (hi - lo) / (n - 1) as f64)
            .collect(),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub param_a: String,
    pub param_b: String,
    pub values_a: Vec<f64>,
    pub values_b: Vec<f64>,
    pub scenario: ScenarioSpec,
    /// Name of the recovered class in this scenario, e.g. `RV` or `RP`.
    pub recovered_label: String,
}

/// The sweeps shown for the escort and delivery tasks on the 10x10 grid.
pub fn preset(name: &str) -> Option<(&'static str, SweepSpec)> {
    let (task, a, b, scenario, label) = match name {
        "es" => (
            "es",
            "alpha-follow",
            "alpha-escort",
            "es-visitor-wandered",
            "RV",
        ),
        "2pd" => (
            "2pd",
            "alpha-pickup",
            "alpha-give-wrong",
            "2pd-package-1-missing",
            "RP",
        ),
        _ => return None,
    };
    let values = grid(0.01, 0.49, 10);
    Some((
        task,
        SweepSpec {
            param_a: a.into(),
            param_b: b.into(),
            values_a: values.clone(),
            values_b: values,
            scenario: ScenarioSpec::from_json(scenario_source(scenario)?).ok()?,
            recovered_label: label.into(),
        },
    ))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum OutcomeClass {
    /// Postcondition failure, recovered.
    Recovered,
    /// Unintended effect inferred; the robot gave up.
    Inferred,
    /// Precondition predicted false before dispatch.
    Predicted,
    NoFailure,
    /// Anything else, e.g. a recovery that failed again.
    Abort,
}

impl OutcomeClass {
    pub fn label<'a>(&self, recovered: &'a str) -> &'a str {
        match self {
            OutcomeClass::Recovered => recovered,
            OutcomeClass::Inferred => "IF",
            OutcomeClass::Predicted => "PF",
            OutcomeClass::NoFailure => "no-failure",
            OutcomeClass::Abort => "abort",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub alpha_a: f64,
    pub alpha_b: f64,
    pub class: OutcomeClass,
    pub t_f: Option<usize>,
    pub culprit: Option<String>,
}

/// Class of a finished run, from its first failure.
pub fn classify_run(run: &ScenarioRun) -> (OutcomeClass, Option<usize>, Option<String>) {
    let Some(first) = run.failures.first() else {
        let class = if run.status == RunStatus::Done {
            OutcomeClass::NoFailure
        } else {
            OutcomeClass::Abort
        };
        return (class, None, None);
    };
    let d = &first.diagnosis;
    let class = match (first.detection, d.class) {
        (Detection::Predicted, _) => OutcomeClass::Predicted,
        (_, FailureClass::UnintendedEffect) => OutcomeClass::Inferred,
        (_, FailureClass::PostconditionFailure) if run.status == RunStatus::Done => {
            OutcomeClass::Recovered
        }
        _ => OutcomeClass::Abort,
    };
    (
        class,
        Some(d.t_f),
        d.culprit.as_ref().map(|a| a.to_string()),
    )
}

pub fn sweep(
    model: &RobotModel,
    program: &TaskProgram,
    spec: &SweepSpec,
    inference: Inference,
) -> Result<Vec<SweepPoint>, SweepError> {
    for p in [&spec.param_a, &spec.param_b] {
        if !model.params.contains_key(p) {
            return Err(SweepError::UnknownParameter(p.clone()));
        }
    }
    if let Some(v) = spec
        .values_a
        .iter()
        .chain(&spec.values_b)
        .find(|v| !(**v > 0.0 && **v < 0.5))
    {
        return Err(SweepError::OutOfRange(*v));
    }
    let config = ExecutorConfig {
        inference,
        ..Default::default()
    };
    let mut points = Vec::new();
    for &a in &spec.values_a {
        for &b in &spec.values_b {
            let mut scenario = spec.scenario.clone();
            scenario.alpha_overrides.insert(spec.param_a.clone(), a);
            scenario.alpha_overrides.insert(spec.param_b.clone(), b);
            let run = run_scenario(model, program, &scenario, config.clone())?;
            let (class, t_f, culprit) = classify_run(&run);
            points.push(SweepPoint {
                alpha_a: a,
                alpha_b: b,
                class,
                t_f,
                culprit,
            });
        }
    }
    Ok(points)
}

pub fn to_csv(points: &[SweepPoint], recovered_label: &str) -> Result<String, SweepError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["alpha_a", "alpha_b", "class", "t_f", "culprit"])?;
    for p in points {
        w.write_record([
            format!("{:.4}", p.alpha_a),
            format!("{:.4}", p.alpha_b),
            p.class.label(recovered_label).to_string(),
            p.t_f.map_or("-".into(), |t| t.to_string()),
            p.culprit.clone().unwrap_or_else(|| "-".into()),
        ])?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| csv::Error::from(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv of utf-8 fields"))
}

impl fmt::Display for OutcomeClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label("recovered"))
    }
}
