//! Scripted simulation environment.
//!
//! A scenario fixes the true initial world and a list of directives saying
//! how particular dispatches misbehave. Everything not scripted complies:
//! the action is applied to the ground truth if its precondition holds
//! there, and reported as failed otherwise.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bayesnet::TraceNet;
use crate::bssr::{BeliefState, Literal, MlWorld};
use crate::executor::{
    ActionOutcome, Dispatch, EnvironmentPort, ExecutorConfig, FailureRecord, PortError, RunStatus,
    Session, TraceEvent,
};
use crate::model::{bind_call, ArgSpec, GroundAction, RobotModel};
use crate::task::{PromptRequest, TaskProgram};

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("scenario: {0}")]
    Json(#[from] serde_json::Error),
    #[error("scenario: {0}")]
    Literal(String),
    #[error("scenario: {0}")]
    Invalid(String),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Behavior {
    Comply,
    /// Reported as done, but nothing changes.
    SilentFail,
    /// Reported as done, but a different action happens instead. A missing
    /// `action` means the same schema with other arguments.
    WrongAction {
        #[serde(default)]
        action: Option<String>,
        #[serde(default)]
        args: Vec<String>,
    },
    /// The human presses the given failure button.
    PressCannot(String),
    Timeout,
}

/// Applies to the `occurrence`-th dispatch (0-based) of `action` whose
/// arguments start with `args`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Directive {
    pub action: String,
    #[serde(default)]
    pub args: Vec<String>,
    #[serde(default)]
    pub occurrence: usize,
    pub behavior: Behavior,
}

impl Directive {
    fn matches(&self, action: &GroundAction) -> bool {
        action.schema == self.action
            && self.args.len() <= action.args.len()
            && self.args.iter().zip(&action.args).all(|(a, (_, o))| a == o)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    #[serde(default)]
    pub description: String,
    /// Name of a bundled task.
    #[serde(default)]
    pub task: Option<String>,
    pub initial_world: Vec<String>,
    #[serde(default)]
    pub directives: Vec<Directive>,
    #[serde(default)]
    pub alpha_overrides: BTreeMap<String, f64>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub prompt_answers: Vec<String>,
    /// Sample action variables instead of assuming success.
    #[serde(default)]
    pub stochastic: bool,
}

impl ScenarioSpec {
    pub fn from_json(text: &str) -> Result<Self, ScenarioError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn world(&self) -> Result<MlWorld, ScenarioError> {
        self.initial_world
            .iter()
            .map(|s| s.parse::<Literal>().map_err(ScenarioError::Literal))
            .collect()
    }

    /// Check the scenario only mentions what `model` declares.
    pub fn validate(&self, model: &RobotModel) -> Result<(), ScenarioError> {
        let bad = |m: String| Err(ScenarioError::Invalid(m));
        for text in &self.initial_world {
            let lit: Literal = text.parse().map_err(ScenarioError::Literal)?;
            match model.predicates.get(&lit.predicate) {
                None => return bad(format!("unknown predicate `{}`", lit.predicate)),
                Some(p) if p.arg_types.len() != lit.args.len() => {
                    return bad(format!("`{lit}` has the wrong number of arguments"))
                }
                _ => {}
            }
            if let Some(o) = lit.args.iter().find(|o| !model.objects.contains_key(*o)) {
                return bad(format!("unknown object `{o}` in `{lit}`"));
            }
        }
        for d in &self.directives {
            let Some(schema) = model.action(&d.action) else {
                return bad(format!("directive for unknown action `{}`", d.action));
            };
            match &d.behavior {
                Behavior::PressCannot(label) if !schema.failure_evidence.contains_key(label) => {
                    return bad(format!(
                        "action `{}` has no failure label `{label}`",
                        d.action
                    ))
                }
                Behavior::WrongAction {
                    action: Some(a), ..
                } if model.action(a).is_none() => {
                    return bad(format!("wrong action `{a}` is not declared"))
                }
                _ => {}
            }
        }
        for k in self.alpha_overrides.keys() {
            if !model.params.contains_key(k) {
                return bad(format!("unknown parameter `{k}`"));
            }
        }
        Ok(())
    }
}

/// The simulator; owns the ground truth.
#[derive(Debug)]
pub struct SimEnv {
    model: RobotModel,
    truth: MlWorld,
    directives: Vec<Directive>,
    answers: std::collections::VecDeque<String>,
    stochastic: bool,
    rng: ChaCha8Rng,
    dispatched: Vec<GroundAction>,
}

impl SimEnv {
    pub fn new(model: &RobotModel, spec: &ScenarioSpec) -> Result<Self, ScenarioError> {
        spec.validate(model)?;
        Ok(SimEnv {
            model: model.clone(),
            truth: spec.world()?,
            directives: spec.directives.clone(),
            answers: spec.prompt_answers.iter().cloned().collect(),
            stochastic: spec.stochastic,
            rng: ChaCha8Rng::seed_from_u64(spec.seed),
            dispatched: Vec::new(),
        })
    }

    pub fn truth(&self) -> &MlWorld {
        &self.truth
    }

    fn behavior(&self, action: &GroundAction) -> Behavior {
        for d in &self.directives {
            if d.matches(action) {
                let seen = self.dispatched.iter().filter(|a| d.matches(a)).count();
                if seen == d.occurrence {
                    return d.behavior.clone();
                }
            }
        }
        Behavior::Comply
    }

    /// Run `action` against the truth, if it is possible there.
    fn perform(&mut self, action: &GroundAction) -> bool {
        if !self.truth.satisfies(&action.precondition) {
            return false;
        }
        if self.stochastic {
            let vars: Vec<bool> = action
                .vars
                .iter()
                .map(|v| self.rng.gen::<f64>() >= v.alpha)
                .collect();
            action.apply_with(&mut self.truth, &vars);
        } else {
            action.apply_nominal(&mut self.truth);
        }
        true
    }

    fn cannot(&self, schema: &str) -> ActionOutcome {
        let label = self
            .model
            .action(schema)
            .and_then(|s| s.default_failure_label())
            .unwrap_or("cannot");
        ActionOutcome::Cannot(label.to_string())
    }
}

impl EnvironmentPort for SimEnv {
    fn execute(&mut self, dispatch: &Dispatch<'_>) -> Result<ActionOutcome, PortError> {
        let behavior = self.behavior(dispatch.action);
        self.dispatched.push(dispatch.action.clone());
        let call = dispatch.call;
        Ok(match behavior {
            Behavior::Comply => match call.ground(&self.model, &self.truth) {
                Ok(g) if self.perform(&g) => ActionOutcome::Confirmed,
                _ => self.cannot(&call.schema),
            },
            Behavior::SilentFail => ActionOutcome::Confirmed,
            Behavior::WrongAction { action, args } => {
                let name = action.unwrap_or_else(|| call.schema.clone());
                let wrong = bind_call(&self.model, &name, &ArgSpec::positional(args), &self.truth)
                    .and_then(|c| c.ground(&self.model, &self.truth));
                if let Ok(g) = wrong {
                    self.perform(&g);
                }
                ActionOutcome::Confirmed
            }
            Behavior::PressCannot(label) => ActionOutcome::Cannot(label),
            Behavior::Timeout => ActionOutcome::Timeout,
        })
    }

    fn prompt(&mut self, request: &PromptRequest) -> Result<String, PortError> {
        match self.answers.pop_front() {
            Some(a) => Ok(a),
            None => request
                .buttons
                .first()
                .cloned()
                .ok_or_else(|| PortError::Disconnected("prompt without buttons".into())),
        }
    }
}

/// Everything a finished simulated run leaves behind.
#[derive(Clone, Debug)]
pub struct ScenarioRun {
    pub status: RunStatus,
    pub log: Vec<TraceEvent>,
    pub failures: Vec<FailureRecord>,
    pub beliefs: Vec<BeliefState>,
    pub net: TraceNet,
    pub truth: MlWorld,
}

/// Run `program` against a simulator built from `spec`. The scenario's
/// parameter overrides are applied to `model` first.
pub fn run_scenario(
    model: &RobotModel,
    program: &TaskProgram,
    spec: &ScenarioSpec,
    config: ExecutorConfig,
) -> Result<ScenarioRun, ScenarioError> {
    let model = model
        .with_params(&spec.alpha_overrides)
        .map_err(ScenarioError::Invalid)?;
    let mut env = SimEnv::new(&model, spec)?;
    let mut session = Session::new(&model, program, config);
    let status = session.run(&mut env, &mut |_| {});
    Ok(ScenarioRun {
        status,
        log: session.log().to_vec(),
        failures: session.failures().to_vec(),
        beliefs: session.beliefs().to_vec(),
        net: session.net().clone(),
        truth: env.truth,
    })
}
