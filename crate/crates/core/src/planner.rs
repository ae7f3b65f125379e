//! End-to-end planning: routes, configuration search, per-configuration
//! speed optimization and comparison with uncoordinated driving.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::feasibility::check_feasibility;
use crate::fuel_model::{total_fuel, FuelError, SpeedPlan};
use crate::platoon_config::{ConfigEnumerator, ConfigError, PlatoonConfiguration, PlatoonRole, DEFAULT_MAX_CONFIGS};
use crate::road_graph::{GraphError, Route};
use crate::scenario::{Diagnostic, DiagnosticKind, Scenario};
use crate::speed_solver::{build_reduced_program, solve, SolverError, SolverOptions, SolverResult, SolverStatus};
use crate::timing::{TimeWindows, TimingError};

#[derive(Debug, Error)]
pub enum PlanError {
    #[error("{}", join(.0))]
    InfeasibleScenario(Vec<Diagnostic>),
    #[error("{}", join(.0))]
    InvalidScenario(Vec<Diagnostic>),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Fuel(#[from] FuelError),
    #[error(transparent)]
    Timing(#[from] TimingError),
    #[error("the solo configuration could not be solved to optimality")]
    BaselineFailed,
}

fn join(d: &[Diagnostic]) -> String {
    d.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanOptions {
    pub max_configs: usize,
    pub solver: SolverOptions,
    /// Skip the configuration search and return the solo plan.
    pub baseline_only: bool,
}

impl Default for PlanOptions {
    fn default() -> Self {
        Self {
            max_configs: DEFAULT_MAX_CONFIGS,
            solver: SolverOptions::default(),
            baseline_only: false,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SearchStats {
    pub configs_enumerated: usize,
    /// Configurations that survived window pruning.
    pub configs_feasible: usize,
    /// Configurations whose solve was certified optimal.
    pub configs_solved: usize,
    /// Pruned-feasible configurations the solver could not certify.
    pub configs_uncertified: usize,
    pub truncated: bool,
    pub max_stationarity: f64,
    pub max_primal_violation: f64,
    pub max_complementarity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanResult {
    pub routes: Vec<Route>,
    pub config: PlatoonConfiguration,
    pub roles: Vec<Vec<PlatoonRole>>,
    pub speed_plan: SpeedPlan,
    pub speeds_kmh: Vec<Vec<f64>>,
    /// Speed-dependent objective `sum eta * W^3 / T^2`.
    pub objective: f64,
    pub total_fuel_l: f64,
    pub baseline_objective: f64,
    pub baseline_fuel_l: f64,
    /// `1 - objective / baseline_objective`.
    pub savings_fraction: f64,
    /// `1 - total_fuel_l / baseline_fuel_l`, including the rolling term.
    pub fuel_savings_fraction: f64,
    pub stats: SearchStats,
}

/// Outcome of one configuration.
#[derive(Debug, Clone, PartialEq)]
pub enum Evaluation {
    /// Rejected by window pruning before any solve.
    Pruned,
    Solved(SolverResult),
}

/// Shortest routes and solo windows after validation.
pub fn prepare(scenario: &Scenario) -> Result<(Vec<Route>, Vec<TimeWindows>), PlanError> {
    let diags = scenario.validate();
    if diags.iter().any(|d| d.kind == DiagnosticKind::Infeasible) {
        return Err(PlanError::InfeasibleScenario(diags));
    }
    if !diags.is_empty() {
        return Err(PlanError::InvalidScenario(diags));
    }
    let routes = scenario.routes()?;
    let v_max = scenario.params.v_max_kmh;
    let windows = routes
        .iter()
        .zip(&scenario.assignments)
        .map(|(r, a)| TimeWindows::solo(r, a.start_time_h, a.deadline_h, v_max))
        .collect();
    Ok((routes, windows))
}

/// Prunes and, if still feasible, solves one configuration.
pub fn evaluate_configuration(
    config: &PlatoonConfiguration,
    routes: &[Route],
    windows: &[TimeWindows],
    scenario: &Scenario,
    options: &SolverOptions,
) -> Result<Evaluation, PlanError> {
    let pruned = check_feasibility(config, routes, windows, scenario.params.v_max_kmh).map_err(SolverError::from)?;
    if !pruned.is_feasible() {
        return Ok(Evaluation::Pruned);
    }
    let program = build_reduced_program(config, routes, scenario)?;
    Ok(Evaluation::Solved(solve(&program, None, options)))
}

/// Independent per-truck optimum.
pub fn solo_baseline(scenario: &Scenario, options: &PlanOptions) -> Result<PlanResult, PlanError> {
    plan_impl(scenario, &PlanOptions {
        baseline_only: true,
        ..options.clone()
    })
}

/// Searches platoon configurations and returns the cheapest certified plan.
///
/// Ties on the objective go to the configuration enumerated first. The solo
/// configuration is always evaluated, so the result never loses to it.
pub fn plan(scenario: &Scenario, options: &PlanOptions) -> Result<PlanResult, PlanError> {
    plan_impl(scenario, options)
}

fn plan_impl(scenario: &Scenario, options: &PlanOptions) -> Result<PlanResult, PlanError> {
    let (routes, windows) = prepare(scenario)?;
    let solo = PlatoonConfiguration::solo(&routes);

    let (configs, truncated) = if options.baseline_only {
        (vec![solo.clone()], false)
    } else {
        let mut it = ConfigEnumerator::new(&routes, &windows, options.max_configs.max(1))?;
        let configs: Vec<PlatoonConfiguration> = it.by_ref().collect();
        (configs, it.truncated())
    };
    if truncated {
        log::warn!("configuration search stopped at {} configurations", configs.len());
    }

    let evaluations: Vec<Evaluation> = configs
        .par_iter()
        .map(|c| evaluate_configuration(c, &routes, &windows, scenario, &options.solver))
        .collect::<Result<_, _>>()?;

    let mut stats = SearchStats {
        configs_enumerated: configs.len(),
        truncated,
        ..SearchStats::default()
    };
    let mut best: Option<(usize, &SolverResult)> = None;
    let mut baseline: Option<&SolverResult> = None;
    for (idx, (cfg, ev)) in configs.iter().zip(&evaluations).enumerate() {
        let Evaluation::Solved(res) = ev else { continue };
        if res.status == SolverStatus::Infeasible {
            continue;
        }
        stats.configs_feasible += 1;
        stats.max_stationarity = stats.max_stationarity.max(res.stationarity);
        stats.max_primal_violation = stats.max_primal_violation.max(res.primal_violation);
        stats.max_complementarity = stats.max_complementarity.max(res.complementarity);
        if !res.is_optimal() {
            stats.configs_uncertified += 1;
            log::warn!("configuration {idx} not certified: {res:?}");
            continue;
        }
        stats.configs_solved += 1;
        if cfg.is_solo() {
            baseline = Some(res);
        }
        if best.is_none_or(|(_, b)| res.objective < b.objective) {
            best = Some((idx, res));
        }
    }
    let baseline = baseline.ok_or(PlanError::BaselineFailed)?;
    let (best_idx, best) = best.ok_or(PlanError::BaselineFailed)?;
    let config = configs[best_idx].clone();

    let starts: Vec<f64> = scenario.assignments.iter().map(|a| a.start_time_h).collect();
    let speed_plan = SpeedPlan::from_traversal(&routes, &starts, best.traversal_h.clone())?;
    let baseline_plan = SpeedPlan::from_traversal(&routes, &starts, baseline.traversal_h.clone())?;
    let total_fuel_l = total_fuel(&routes, &speed_plan, Some(&config), &scenario.params)?;
    let baseline_fuel_l = total_fuel(&routes, &baseline_plan, Some(&solo), &scenario.params)?;
    let roles = config.roles(&routes)?;
    let speeds_kmh = speed_plan.speeds_kmh(&routes);

    Ok(PlanResult {
        savings_fraction: savings(best.objective, baseline.objective),
        fuel_savings_fraction: savings(total_fuel_l, baseline_fuel_l),
        objective: best.objective,
        baseline_objective: baseline.objective,
        total_fuel_l,
        baseline_fuel_l,
        routes,
        config,
        roles,
        speed_plan,
        speeds_kmh,
        stats,
    })
}

fn savings(value: f64, baseline: f64) -> f64 {
    if baseline > 0.0 {
        1.0 - value / baseline
    } else {
        0.0
    }
}
