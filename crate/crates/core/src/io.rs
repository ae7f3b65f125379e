//! JSON scenario and plan files, CSV trajectories.

use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fuel_model::SpeedPlan;
use crate::oracle::OraclePlan;
use crate::planner::PlanResult;
use crate::platoon_config::PlatoonRole;
use crate::road_graph::{Edge, GraphError, NodeId, RoadNetwork, Route};
use crate::scenario::{deadline_at_reference_speed, FuelParams, Scenario, TransportAssignment};

#[derive(Debug, Error)]
pub enum IoError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("invalid JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("assignment {0} has no deadline_h and there is no deadline_rule")]
    MissingDeadline(u32),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsFile {
    #[serde(default = "default_v_max")]
    pub v_max_kmh: f64,
    #[serde(default = "default_eta")]
    pub eta: f64,
    #[serde(rename = "F_r", default = "default_one")]
    pub f_r: f64,
    #[serde(rename = "F_a", default = "default_one")]
    pub f_a: f64,
}

fn default_v_max() -> f64 {
    FuelParams::default().v_max_kmh
}

fn default_eta() -> f64 {
    FuelParams::default().eta
}

fn default_one() -> f64 {
    1.0
}

impl Default for ParamsFile {
    fn default() -> Self {
        FuelParams::default().into()
    }
}

impl From<FuelParams> for ParamsFile {
    fn from(p: FuelParams) -> Self {
        Self {
            v_max_kmh: p.v_max_kmh,
            eta: p.eta,
            f_r: p.f_r,
            f_a: p.f_a,
        }
    }
}

impl From<&ParamsFile> for FuelParams {
    fn from(p: &ParamsFile) -> Self {
        Self {
            f_r: p.f_r,
            f_a: p.f_a,
            eta: p.eta,
            v_max_kmh: p.v_max_kmh,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AssignmentFile {
    pub id: u32,
    pub origin: NodeId,
    pub destination: NodeId,
    pub start_time_h: f64,
    /// Falls back to the deadline rule when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub deadline_h: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeadlineRule {
    pub reference_speed_kmh: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub nodes: Vec<NodeId>,
    pub edges: Vec<Edge>,
    #[serde(default)]
    pub params: ParamsFile,
    pub assignments: Vec<AssignmentFile>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub deadline_rule: Option<DeadlineRule>,
}

impl ScenarioFile {
    pub fn from_json(text: &str) -> Result<Self, IoError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn read(path: &std::path::Path) -> Result<Self, IoError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> Result<String, IoError> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Builds the scenario; explicit deadlines take precedence over the rule.
    ///
    /// Data errors other than graph structure (ids, infeasible deadlines) are
    /// left to [`Scenario::validate`].
    pub fn to_scenario(&self) -> Result<Scenario, IoError> {
        let network = RoadNetwork::new(&self.nodes, &self.edges)?;
        let mut assignments = Vec::with_capacity(self.assignments.len());
        for a in &self.assignments {
            let deadline_h = match (a.deadline_h, self.deadline_rule) {
                (Some(d), _) => d,
                (None, Some(rule)) => deadline_at_reference_speed(
                    &network,
                    a.origin,
                    a.destination,
                    a.start_time_h,
                    rule.reference_speed_kmh,
                )?,
                (None, None) => return Err(IoError::MissingDeadline(a.id)),
            };
            assignments.push(TransportAssignment {
                id: a.id,
                origin: a.origin,
                destination: a.destination,
                start_time_h: a.start_time_h,
                deadline_h,
            });
        }
        Ok(Scenario::new(network, assignments, (&self.params).into()))
    }

    /// File form of a scenario, with every deadline explicit.
    pub fn from_scenario(s: &Scenario) -> Self {
        Self {
            nodes: s.network.nodes().collect(),
            edges: s.network.edges().to_vec(),
            params: s.params.into(),
            assignments: s
                .assignments
                .iter()
                .map(|a| AssignmentFile {
                    id: a.id,
                    origin: a.origin,
                    destination: a.destination,
                    start_time_h: a.start_time_h,
                    deadline_h: Some(a.deadline_h),
                })
                .collect(),
            deadline_rule: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TruckPlan {
    pub id: u32,
    pub route: Vec<NodeId>,
    pub arrival_times_h: Vec<f64>,
    pub speeds_kmh: Vec<f64>,
    pub predecessors: Vec<u32>,
    pub roles: Vec<PlatoonRole>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlanSummary {
    pub objective: f64,
    pub baseline_objective: f64,
    pub savings_fraction: f64,
    pub total_fuel_l: f64,
    pub baseline_fuel_l: f64,
    pub fuel_savings_fraction: f64,
    pub configs_enumerated: usize,
    pub configs_feasible: usize,
    pub truncated: bool,
}

/// Serialized plan. Numbers are written in shortest round-trip form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlanFile {
    pub trucks: Vec<TruckPlan>,
    pub summary: PlanSummary,
}

impl PlanFile {
    pub fn from_result(scenario: &Scenario, r: &PlanResult) -> Self {
        let trucks = scenario
            .assignments
            .iter()
            .enumerate()
            .map(|(k, a)| TruckPlan {
                id: a.id,
                route: r.routes[k].nodes.clone(),
                arrival_times_h: r.speed_plan.arrival_h[k].clone(),
                speeds_kmh: r.speeds_kmh[k].clone(),
                predecessors: r.config.predecessors(k as u32 + 1).to_vec(),
                roles: r.roles[k].clone(),
            })
            .collect();
        Self {
            trucks,
            summary: PlanSummary {
                objective: r.objective,
                baseline_objective: r.baseline_objective,
                savings_fraction: r.savings_fraction,
                total_fuel_l: r.total_fuel_l,
                baseline_fuel_l: r.baseline_fuel_l,
                fuel_savings_fraction: r.fuel_savings_fraction,
                configs_enumerated: r.stats.configs_enumerated,
                configs_feasible: r.stats.configs_feasible,
                truncated: r.stats.truncated,
            },
        }
    }

    pub fn to_json(&self) -> Result<String, IoError> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    pub fn from_json(text: &str) -> Result<Self, IoError> {
        Ok(serde_json::from_str(text)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleTruck {
    pub id: u32,
    pub arrival_times_h: Vec<f64>,
    pub speeds_kmh: Vec<f64>,
    pub etas: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleFile {
    pub objective: f64,
    pub patterns_examined: usize,
    pub grid_count: usize,
    pub trucks: Vec<OracleTruck>,
}

impl OracleFile {
    pub fn from_plan(scenario: &Scenario, routes: &[Route], plan: &OraclePlan, grid_count: usize) -> Self {
        let speeds = plan.speed_plan.speeds_kmh(routes);
        Self {
            objective: plan.objective,
            patterns_examined: plan.patterns_examined,
            grid_count,
            trucks: scenario
                .assignments
                .iter()
                .enumerate()
                .map(|(k, a)| OracleTruck {
                    id: a.id,
                    arrival_times_h: plan.speed_plan.arrival_h[k].clone(),
                    speeds_kmh: speeds[k].clone(),
                    etas: plan.etas[k].clone(),
                })
                .collect(),
        }
    }

    pub fn to_json(&self) -> Result<String, IoError> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }
}

#[derive(Debug, Serialize)]
struct TrajectoryRow {
    truck_id: u32,
    node_index: usize,
    node_id: NodeId,
    cumulative_km: f64,
    arrival_time_h: f64,
}

/// One CSV row per truck per route node.
pub fn write_trajectories<W: Write>(
    out: W,
    scenario: &Scenario,
    routes: &[Route],
    plan: &SpeedPlan,
) -> Result<(), IoError> {
    let mut w = csv::Writer::from_writer(out);
    for (k, (a, r)) in scenario.assignments.iter().zip(routes).enumerate() {
        for (i, (node, km)) in r.nodes.iter().zip(r.cumulative_km()).enumerate() {
            w.serialize(TrajectoryRow {
                truck_id: a.id,
                node_index: i,
                node_id: *node,
                cumulative_km: km,
                arrival_time_h: plan.arrival_h[k][i],
            })?;
        }
    }
    w.flush()?;
    Ok(())
}
