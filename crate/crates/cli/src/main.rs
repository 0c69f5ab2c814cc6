mod serve;
mod terminal;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use robotask::assets;
use robotask::bayesnet::{Inference, TraceNet};
use robotask::executor::{log_to_json, render_log, ExecutorConfig, RunStatus, Session, TraceEvent};
use robotask::model::{parse_model, RobotModel};
use robotask::simenv::{run_scenario, ScenarioSpec};
use robotask::sweep::{grid, preset, sweep, to_csv, SweepSpec};
use robotask::task::{parse_task, TaskProgram};

/// Exit code for unreadable or invalid inputs.
const CONFIG_ERROR: u8 = 4;

#[derive(Parser)]
#[command(
    name = "robotask",
    version,
    about = "Fault-tolerant execution of robot task programs"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Execute a task program against a scripted scenario or a terminal.
    Run(RunArgs),
    /// Classify failure handling over a grid of two failure probabilities.
    Sweep(SweepArgs),
    /// Serve sessions to a console over WebSocket.
    Serve(serve::ServeArgs),
}

#[derive(Clone, Copy, Default, ValueEnum)]
enum Engine {
    /// Variable elimination.
    #[default]
    Ve,
    /// Full enumeration; only for small nets.
    BruteForce,
}

impl From<Engine> for Inference {
    fn from(e: Engine) -> Self {
        match e {
            Engine::Ve => Inference::VariableElimination,
            Engine::BruteForce => Inference::BruteForce,
        }
    }
}

#[derive(Args, Clone)]
struct ModelArgs {
    /// Robot model file; the bundled service model if omitted.
    #[arg(long)]
    model: Option<PathBuf>,
    /// Override a model parameter, e.g. `--param alpha-pickup=0.3`.
    #[arg(long = "param", value_name = "NAME=VALUE")]
    params: Vec<String>,
    #[arg(long, value_enum, default_value_t)]
    inference: Engine,
    /// Diagnosis rounds allowed per failure.
    #[arg(long, default_value_t = 3)]
    retry_limit: usize,
}

impl ModelArgs {
    fn load(&self) -> Result<RobotModel> {
        let model = match &self.model {
            Some(p) => {
                let text = read(p)?;
                parse_model(&text).with_context(|| format!("{}", p.display()))?
            }
            None => assets::service_model(),
        };
        let mut overrides = BTreeMap::new();
        for kv in &self.params {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| anyhow!("--param expects NAME=VALUE, got `{kv}`"))?;
            let v: f64 = v.parse().with_context(|| format!("--param {kv}"))?;
            overrides.insert(k.to_string(), v);
        }
        model.with_params(&overrides).map_err(|e| anyhow!(e))
    }

    fn config(&self) -> ExecutorConfig {
        ExecutorConfig {
            retry_limit: self.retry_limit,
            inference: self.inference.into(),
        }
    }
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// Task program file or bundled task name (2pd, 3pd, 5sc, el, es).
    #[arg(long)]
    task: Option<String>,
    /// Scenario file or bundled scenario name.
    #[arg(
        long,
        conflicts_with = "interactive",
        required_unless_present = "interactive"
    )]
    scenario: Option<String>,
    /// Ask on the terminal instead of simulating.
    #[arg(long)]
    interactive: bool,
    /// Write the trace log here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Emit the log as JSON.
    #[arg(long)]
    json: bool,
    /// Write the final Bayes net in Graphviz format.
    #[arg(long)]
    dot: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// Bundled sweep (es or 2pd); other options override its settings.
    #[arg(long)]
    preset: Option<String>,
    #[arg(long)]
    task: Option<String>,
    #[arg(long)]
    scenario: Option<String>,
    /// First swept parameter.
    #[arg(long)]
    param_a: Option<String>,
    /// Second swept parameter.
    #[arg(long)]
    param_b: Option<String>,
    /// Label of the recovered class.
    #[arg(long)]
    label: Option<String>,
    #[arg(long, default_value_t = 0.01)]
    lo: f64,
    #[arg(long, default_value_t = 0.49)]
    hi: f64,
    /// Grid points per axis.
    #[arg(long, default_value_t = 10)]
    points: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

/// A file path, or else the name of a bundled asset.
fn source(arg: &str, bundled: fn(&str) -> Option<&'static str>) -> Result<String> {
    let path = Path::new(arg);
    if path.exists() {
        return read(path);
    }
    bundled(arg)
        .map(str::to_string)
        .ok_or_else(|| anyhow!("cannot read {arg}: no such file or bundled asset"))
}

fn load_scenario(arg: &str) -> Result<ScenarioSpec> {
    ScenarioSpec::from_json(&source(arg, assets::scenario_source)?).with_context(|| arg.to_string())
}

fn load_task(arg: Option<&str>, scenario: Option<&ScenarioSpec>) -> Result<TaskProgram> {
    let name = arg
        .or_else(|| scenario.and_then(|s| s.task.as_deref()))
        .ok_or_else(|| anyhow!("no task given and the scenario names none"))?;
    parse_task(&source(name, assets::task_source)?).with_context(|| name.to_string())
}

fn write_output(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => std::fs::write(p, text).with_context(|| format!("cannot write {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn cmd_run(args: &RunArgs) -> Result<i32> {
    let model = args.model.load()?;
    let scenario = args.scenario.as_deref().map(load_scenario).transpose()?;
    let program = load_task(args.task.as_deref(), scenario.as_ref())?;
    let (status, log, net): (RunStatus, Vec<TraceEvent>, TraceNet) = match &scenario {
        Some(spec) => {
            let r = run_scenario(&model, &program, spec, args.model.config())?;
            (r.status, r.log, r.net)
        }
        None => {
            let mut session = Session::new(&model, &program, args.model.config());
            let status = session.run(&mut terminal::TerminalPort::new(), &mut |_| {});
            (status, session.log().to_vec(), session.net().clone())
        }
    };
    let text = if args.json {
        log_to_json(&log) + "\n"
    } else {
        render_log(&log)
    };
    write_output(args.out.as_deref(), &text)?;
    if let Some(p) = &args.dot {
        std::fs::write(p, net.to_dot()).with_context(|| format!("cannot write {}", p.display()))?;
    }
    if let RunStatus::Unrecoverable(reason) = &status {
        eprintln!("aborted: {reason}");
    }
    Ok(status.exit_code())
}

fn cmd_sweep(args: &SweepArgs) -> Result<i32> {
    let model = args.model.load()?;
    let (mut task, mut spec) = match args.preset.as_deref() {
        Some(name) => {
            let (t, s) = preset(name).ok_or_else(|| anyhow!("unknown sweep preset `{name}`"))?;
            (Some(t.to_string()), s)
        }
        None => (
            None,
            SweepSpec {
                param_a: String::new(),
                param_b: String::new(),
                values_a: vec![],
                values_b: vec![],
                scenario: ScenarioSpec::default(),
                recovered_label: "RV".into(),
            },
        ),
    };
    if let Some(s) = &args.scenario {
        spec.scenario = load_scenario(s)?;
        task = spec.scenario.task.clone();
    }
    if let Some(t) = &args.task {
        task = Some(t.clone());
    }
    if let Some(a) = &args.param_a {
        spec.param_a = a.clone();
    }
    if let Some(b) = &args.param_b {
        spec.param_b = b.clone();
    }
    if let Some(l) = &args.label {
        spec.recovered_label = l.clone();
    }
    if spec.param_a.is_empty() || spec.param_b.is_empty() {
        bail!("sweep needs --preset or both --param-a and --param-b");
    }
    spec.values_a = grid(args.lo, args.hi, args.points);
    spec.values_b = spec.values_a.clone();
    let program = load_task(task.as_deref(), None)?;
    let points = sweep(&model, &program, &spec, args.model.inference.into())?;
    write_output(
        args.out.as_deref(),
        &to_csv(&points, &spec.recovered_label)?,
    )?;
    Ok(0)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Serve(a) => serve::cmd_serve(a),
    };
    match result {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(CONFIG_ERROR)
        }
    }
}
