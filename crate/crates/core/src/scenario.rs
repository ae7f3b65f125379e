//! Scenario data model: road network, transport assignments and fuel parameters.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::road_graph::{GraphError, NodeId, RoadNetwork, Route};

/// One truck's transport task. Times are hours on a free real axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransportAssignment {
    pub id: u32,
    pub origin: NodeId,
    pub destination: NodeId,
    pub start_time_h: f64,
    pub deadline_h: f64,
}

/// Fuel model coefficients and the global speed cap.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FuelParams {
    /// Rolling term, liters per km.
    pub f_r: f64,
    /// Aerodynamic term, liters h^2 / km^3.
    pub f_a: f64,
    /// Air-drag factor applied to platoon followers.
    pub eta: f64,
    pub v_max_kmh: f64,
}

impl Default for FuelParams {
    fn default() -> Self {
        Self {
            f_r: 1.0,
            f_a: 1.0,
            eta: 0.6,
            v_max_kmh: 90.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Scenario {
    pub network: RoadNetwork,
    pub assignments: Vec<TransportAssignment>,
    pub params: FuelParams,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DiagnosticKind {
    InvalidParams,
    InvalidIds,
    InvalidAssignment,
    UnknownNode,
    Unreachable,
    /// The truck cannot make its deadline even driving alone at full speed.
    Infeasible,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Diagnostic {
    pub kind: DiagnosticKind,
    pub assignment: Option<u32>,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.assignment {
            Some(id) => write!(f, "assignment {id} {}", self.message),
            None => f.write_str(&self.message),
        }
    }
}

impl Scenario {
    pub fn new(network: RoadNetwork, assignments: Vec<TransportAssignment>, params: FuelParams) -> Self {
        Self {
            network,
            assignments,
            params,
        }
    }

    pub fn num_trucks(&self) -> usize {
        self.assignments.len()
    }

    /// Assignment with the given id, assuming ids are 1..=K in order.
    pub fn assignment(&self, id: u32) -> &TransportAssignment {
        &self.assignments[id as usize - 1]
    }

    /// Shortest route of every assignment, in id order.
    pub fn routes(&self) -> Result<Vec<Route>, GraphError> {
        self.assignments
            .iter()
            .map(|a| Ok(self.network.shortest_path(a.origin, a.destination)?.route))
            .collect()
    }

    /// Checks all data invariants plus individual (solo, full-speed) feasibility.
    ///
    /// An empty result means the scenario can be planned.
    pub fn validate(&self) -> Vec<Diagnostic> {
        let mut out = Vec::new();
        let p = &self.params;
        let mut push = |kind, assignment, message: String| {
            out.push(Diagnostic {
                kind,
                assignment,
                message,
            })
        };

        if !(p.f_r.is_finite() && p.f_r >= 0.0) {
            push(DiagnosticKind::InvalidParams, None, format!("F_r must be >= 0, got {}", p.f_r));
        }
        if !(p.f_a.is_finite() && p.f_a > 0.0) {
            push(DiagnosticKind::InvalidParams, None, format!("F_a must be > 0, got {}", p.f_a));
        }
        if !(p.eta > 0.0 && p.eta <= 1.0) {
            push(DiagnosticKind::InvalidParams, None, format!("eta must lie in (0, 1], got {}", p.eta));
        }
        let v_ok = p.v_max_kmh.is_finite() && p.v_max_kmh > 0.0;
        if !v_ok {
            push(
                DiagnosticKind::InvalidParams,
                None,
                format!("v_max must be > 0, got {}", p.v_max_kmh),
            );
        }

        for (pos, a) in self.assignments.iter().enumerate() {
            if a.id as usize != pos + 1 {
                push(
                    DiagnosticKind::InvalidIds,
                    Some(a.id),
                    format!("has id {} at position {}; ids must be 1..K in order", a.id, pos + 1),
                );
            }
        }

        for a in &self.assignments {
            let id = Some(a.id);
            if !(a.start_time_h.is_finite() && a.deadline_h.is_finite()) {
                push(DiagnosticKind::InvalidAssignment, id, "has non-finite times".into());
                continue;
            }
            if a.deadline_h <= a.start_time_h {
                push(
                    DiagnosticKind::InvalidAssignment,
                    id,
                    format!("deadline {} is not after start {}", a.deadline_h, a.start_time_h),
                );
            }
            if a.origin == a.destination {
                push(
                    DiagnosticKind::InvalidAssignment,
                    id,
                    format!("origin equals destination ({})", a.origin),
                );
                continue;
            }
            let mut known = true;
            for node in [a.origin, a.destination] {
                if !self.network.contains(node) {
                    push(DiagnosticKind::UnknownNode, id, format!("references unknown node {node}"));
                    known = false;
                }
            }
            if !known || !v_ok {
                continue;
            }
            match self.network.shortest_path(a.origin, a.destination) {
                Ok(sp) => {
                    let arrival = a.start_time_h + sp.route.length() / p.v_max_kmh;
                    if arrival > a.deadline_h + crate::TIME_TOL {
                        push(
                            DiagnosticKind::Infeasible,
                            id,
                            format!(
                                "infeasible: earliest arrival {arrival:.6} h is after deadline {:.6} h",
                                a.deadline_h
                            ),
                        );
                    }
                }
                Err(_) => push(
                    DiagnosticKind::Unreachable,
                    id,
                    format!("destination {} is unreachable from {}", a.destination, a.origin),
                ),
            }
        }
        out
    }
}

/// Deadline for driving the whole shortest path at `reference_speed_kmh`.
pub fn deadline_at_reference_speed(
    network: &RoadNetwork,
    origin: NodeId,
    destination: NodeId,
    start_time_h: f64,
    reference_speed_kmh: f64,
) -> Result<f64, GraphError> {
    let len = network.shortest_path(origin, destination)?.route.length();
    Ok(start_time_h + len / reference_speed_kmh)
}
