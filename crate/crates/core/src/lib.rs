//! Offline coordination of truck platoons.
//!
//! Trucks drive fixed shortest-path routes. For each candidate platoon
//! configuration the fuel-optimal traversal times are the solution of a small
//! convex program; the planner searches configurations and keeps the best.

pub mod feasibility;
pub mod fuel_model;
pub mod io;
pub mod oracle;
pub mod planner;
pub mod platoon_config;
pub mod road_graph;
pub mod scenario;
pub mod speed_solver;
pub mod timing;

/// Absolute tolerance for comparing times in hours.
pub const TIME_TOL: f64 = 1e-9;
