//! Model, task programs and scenarios shipped with the crate.

pub const SERVICE_MODEL: &str = include_str!("../assets/models/service.rmodel");

/// Load the shipped service-robot model.
pub fn service_model() -> crate::model::RobotModel {
    crate::model::parse_model(SERVICE_MODEL).expect("shipped model parses")
}

/// Shipped task programs by short name.
pub const TASKS: &[(&str, &str)] = &[
    ("2pd", include_str!("../assets/tasks/2pd.task")),
    ("3pd", include_str!("../assets/tasks/3pd.task")),
    ("5sc", include_str!("../assets/tasks/5sc.task")),
    ("el", include_str!("../assets/tasks/el.task")),
    ("es", include_str!("../assets/tasks/es.task")),
];

pub fn task_source(name: &str) -> Option<&'static str> {
    TASKS.iter().find(|(n, _)| *n == name).map(|(_, t)| *t)
}

macro_rules! scenario {
    ($name:literal) => {
        (
            $name,
            include_str!(concat!("../assets/scenarios/", $name, ".scenario")),
        )
    };
}

/// Shipped simulation scenarios by name.
pub const SCENARIOS: &[(&str, &str)] = &[
    scenario!("2pd-package-1-missing"),
    scenario!("2pd-package-0-missing"),
    scenario!("el-wrong-floor"),
    scenario!("el-not-called"),
    scenario!("5sc-not-picked-up"),
    scenario!("5sc-not-returned"),
    scenario!("es-visitor-wandered"),
    scenario!("es-visitor-lost"),
];

pub fn scenario_source(name: &str) -> Option<&'static str> {
    SCENARIOS.iter().find(|(n, _)| *n == name).map(|(_, s)| *s)
}
