use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use platoon_core::io::{write_trajectories, IoError, OracleFile, PlanFile, ScenarioFile};
use platoon_core::oracle::{brute_force_plan, GridSpec, OracleError};
use platoon_core::planner::{plan, solo_baseline, PlanError, PlanOptions};
use platoon_core::scenario::Scenario;
use platoon_core::speed_solver::SolverOptions;

/// Offline truck platoon planner.
#[derive(Parser)]
#[command(name = "platoon", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Plan routes, platoons and speeds for a scenario.
    Plan(PlanArgs),
    /// Solve a small scenario by exhaustive grid search.
    Oracle(OracleArgs),
}

#[derive(Args)]
struct PlanArgs {
    #[arg(long)]
    scenario: PathBuf,
    /// Plan file; standard output when omitted.
    #[arg(long)]
    output: Option<PathBuf>,
    /// CSV of per-node arrival times.
    #[arg(long)]
    trajectories: Option<PathBuf>,
    #[arg(long, default_value_t = 10_000)]
    max_configs: usize,
    #[arg(long, default_value_t = 1e-6)]
    kkt_tol: f64,
    /// Skip the platoon search.
    #[arg(long)]
    baseline_only: bool,
}

#[derive(Args)]
struct OracleArgs {
    #[arg(long)]
    scenario: PathBuf,
    /// Grid intervals per free time.
    #[arg(long, default_value_t = 50)]
    speed_levels: usize,
    #[arg(long)]
    output: Option<PathBuf>,
}

/// Failure with its exit code.
enum Failure {
    Input(String),
    Infeasible(String),
    TooLarge(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Input(_) => 1,
            Failure::Infeasible(_) => 2,
            Failure::TooLarge(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Input(m) | Failure::Infeasible(m) | Failure::TooLarge(m) => m,
        }
    }
}

impl From<IoError> for Failure {
    fn from(e: IoError) -> Self {
        Failure::Input(e.to_string())
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Input(e.to_string())
    }
}

impl From<PlanError> for Failure {
    fn from(e: PlanError) -> Self {
        match e {
            PlanError::InfeasibleScenario(_) => Failure::Infeasible(e.to_string()),
            other => Failure::Input(other.to_string()),
        }
    }
}

impl From<OracleError> for Failure {
    fn from(e: OracleError) -> Self {
        match e {
            OracleError::TooLarge { .. } => Failure::TooLarge(e.to_string()),
            OracleError::Plan(p) => p.into(),
            other => Failure::Input(other.to_string()),
        }
    }
}

fn load(path: &Path) -> Result<Scenario, Failure> {
    let file = ScenarioFile::read(path).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))?;
    Ok(file.to_scenario()?)
}

fn emit(text: &str, path: Option<&Path>) -> Result<(), Failure> {
    match path {
        Some(p) => std::fs::write(p, text)?,
        None => io::stdout().lock().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn run_plan(args: &PlanArgs) -> Result<(), Failure> {
    let scenario = load(&args.scenario)?;
    let options = PlanOptions {
        max_configs: args.max_configs,
        solver: SolverOptions {
            kkt_tol: args.kkt_tol,
            ..SolverOptions::default()
        },
        baseline_only: args.baseline_only,
    };
    let result = if args.baseline_only {
        solo_baseline(&scenario, &options)?
    } else {
        plan(&scenario, &options)?
    };
    log::info!(
        "objective {} (baseline {}), {} configurations, {} feasible",
        result.objective,
        result.baseline_objective,
        result.stats.configs_enumerated,
        result.stats.configs_feasible
    );
    if let Some(path) = &args.trajectories {
        let out = BufWriter::new(File::create(path)?);
        write_trajectories(out, &scenario, &result.routes, &result.speed_plan)?;
    }
    emit(&PlanFile::from_result(&scenario, &result).to_json()?, args.output.as_deref())
}

fn run_oracle(args: &OracleArgs) -> Result<(), Failure> {
    let scenario = load(&args.scenario)?;
    let grid = GridSpec::new(args.speed_levels, GridSpec::default().tolerance)?;
    let result = brute_force_plan(&scenario, grid)?;
    let routes = scenario.routes().map_err(|e| Failure::Input(e.to_string()))?;
    let file = OracleFile::from_plan(&scenario, &routes, &result, grid.count);
    emit(&file.to_json()?, args.output.as_deref())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Plan(a) => run_plan(a),
        Command::Oracle(a) => run_oracle(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}
