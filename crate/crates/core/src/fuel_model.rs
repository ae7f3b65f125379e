//! Fuel consumption per kilometer and whole-plan fuel accounting.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::platoon_config::PlatoonConfiguration;
use crate::road_graph::Route;
use crate::scenario::FuelParams;
use crate::timing::{arrival_times, TimingError};

/// Entry times closer than this count as simultaneous (hours).
pub const COINCIDENCE_TIME_TOL: f64 = 1e-6;
/// Speeds closer than this count as equal (km/h).
pub const COINCIDENCE_SPEED_TOL: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FuelError {
    #[error("truck {truck} edge {edge}: configured to follow {pred} but times or speeds differ")]
    InconsistentPlan { truck: u32, edge: usize, pred: u32 },
    #[error(transparent)]
    Timing(#[from] TimingError),
}

/// Per-truck traversal and arrival times.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeedPlan {
    /// `traversal_h[k - 1][i]`: hours spent on edge `i` of truck `k`.
    pub traversal_h: Vec<Vec<f64>>,
    /// `arrival_h[k - 1][i]`: arrival time at node `i`; entry 0 is the start time.
    pub arrival_h: Vec<Vec<f64>>,
}

impl SpeedPlan {
    pub fn from_traversal(routes: &[Route], starts: &[f64], traversal_h: Vec<Vec<f64>>) -> Result<Self, TimingError> {
        let arrival_h = routes
            .iter()
            .zip(starts)
            .zip(&traversal_h)
            .map(|((r, &s), t)| arrival_times(r, s, t))
            .collect::<Result<_, _>>()?;
        Ok(Self { traversal_h, arrival_h })
    }

    pub fn speeds_kmh(&self, routes: &[Route]) -> Vec<Vec<f64>> {
        routes
            .iter()
            .zip(&self.traversal_h)
            .map(|(r, t)| r.edge_lengths.iter().zip(t).map(|(w, dt)| w / dt).collect())
            .collect()
    }
}

/// `F_r + eta_eff * F_a * v^2`, liters per km.
pub fn fuel_per_km(v_kmh: f64, eta_eff: f64, params: &FuelParams) -> f64 {
    params.f_r + eta_eff * params.f_a * v_kmh * v_kmh
}

/// Air-drag factor of every truck on every edge, decided by the coincidence
/// rule: a truck gets `eta` when some higher-id truck enters the same edge at
/// the same time with the same speed.
pub fn coincidence_etas(routes: &[Route], plan: &SpeedPlan, eta: f64) -> Vec<Vec<f64>> {
    let speeds = plan.speeds_kmh(routes);
    routes
        .iter()
        .enumerate()
        .map(|(k, r)| {
            (0..r.num_edges())
                .map(|i| {
                    let edge = r.edge(i);
                    let entry = plan.arrival_h[k][i];
                    let v = speeds[k][i];
                    let led = routes.iter().enumerate().skip(k + 1).any(|(kl, rl)| {
                        rl.edges().position(|e| e == edge).is_some_and(|il| {
                            (plan.arrival_h[kl][il] - entry).abs() <= COINCIDENCE_TIME_TOL
                                && (speeds[kl][il] - v).abs() <= COINCIDENCE_SPEED_TOL
                        })
                    });
                    if led {
                        eta
                    } else {
                        1.0
                    }
                })
                .collect()
        })
        .collect()
}

fn check_config(routes: &[Route], plan: &SpeedPlan, config: &PlatoonConfiguration) -> Result<(), FuelError> {
    let speeds = plan.speeds_kmh(routes);
    for (k, r) in routes.iter().enumerate() {
        let truck = k as u32 + 1;
        for (i, &pred) in config.predecessors(truck).iter().enumerate() {
            if pred == truck {
                continue;
            }
            let p = pred as usize - 1;
            let ok = routes[p].edges().position(|e| e == r.edge(i)).is_some_and(|j| {
                (plan.arrival_h[p][j] - plan.arrival_h[k][i]).abs() <= COINCIDENCE_TIME_TOL
                    && (speeds[p][j] - speeds[k][i]).abs() <= COINCIDENCE_SPEED_TOL
            });
            if !ok {
                return Err(FuelError::InconsistentPlan { truck, edge: i, pred });
            }
        }
    }
    Ok(())
}

/// Total fuel in liters, with the follower discount taken from actual
/// coincidences. When `config` is given, every follower link it claims must
/// be backed by equal entry times and speeds.
pub fn total_fuel(
    routes: &[Route],
    plan: &SpeedPlan,
    config: Option<&PlatoonConfiguration>,
    params: &FuelParams,
) -> Result<f64, FuelError> {
    if let Some(cfg) = config {
        check_config(routes, plan, cfg)?;
    }
    let etas = coincidence_etas(routes, plan, params.eta);
    let speeds = plan.speeds_kmh(routes);
    Ok(routes
        .iter()
        .enumerate()
        .flat_map(|(k, r)| {
            let (etas, speeds) = (&etas[k], &speeds[k]);
            r.edge_lengths
                .iter()
                .enumerate()
                .map(move |(i, w)| w * fuel_per_km(speeds[i], etas[i], params))
        })
        .sum())
}

/// `sum eta(k,i) * W^3 / T^2` with eta taken from the configuration.
pub fn speed_dependent_objective(routes: &[Route], plan: &SpeedPlan, config: &PlatoonConfiguration, eta: f64) -> f64 {
    routes
        .iter()
        .enumerate()
        .map(|(k, r)| {
            let truck = k as u32 + 1;
            let preds = config.predecessors(truck);
            r.edge_lengths
                .iter()
                .zip(&plan.traversal_h[k])
                .zip(preds)
                .map(|((w, t), &p)| {
                    let e = if p == truck { 1.0 } else { eta };
                    e * w * w * w / (t * t)
                })
                .sum::<f64>()
        })
        .sum()
}

/// Same objective with per-(truck, edge) factors supplied directly.
pub fn objective_with_etas(routes: &[Route], plan: &SpeedPlan, etas: &[Vec<f64>]) -> f64 {
    routes
        .iter()
        .enumerate()
        .map(|(k, r)| {
            r.edge_lengths
                .iter()
                .zip(&plan.traversal_h[k])
                .zip(&etas[k])
                .map(|((w, t), e)| e * w * w * w / (t * t))
                .sum::<f64>()
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::road_graph::NodeId;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn params() -> FuelParams {
        FuelParams {
            f_r: 0.3,
            f_a: 2e-5,
            eta: 0.6,
            v_max_kmh: 90.0,
        }
    }

    fn route(ids: &[u64], w: f64) -> Route {
        Route {
            nodes: ids.iter().map(|&i| NodeId(i)).collect(),
            edge_lengths: vec![w; ids.len() - 1],
        }
    }

    #[test]
    fn per_km_substitution() {
        let p = params();
        assert_eq!(fuel_per_km(0.0, 1.0, &p), p.f_r);
        assert_relative_eq!(fuel_per_km(80.0, 1.0, &p), p.f_r + 6400.0 * p.f_a);
        assert_relative_eq!(fuel_per_km(80.0, 0.6, &p), p.f_r + 3840.0 * p.f_a);
    }

    #[test]
    fn single_truck_fuel() {
        let p = params();
        let routes = vec![route(&[1, 2], 90.0)];
        let plan = SpeedPlan::from_traversal(&routes, &[0.0], vec![vec![1.0]]).unwrap();
        let cfg = PlatoonConfiguration::solo(&routes);
        assert_relative_eq!(
            total_fuel(&routes, &plan, Some(&cfg), &p).unwrap(),
            90.0 * (p.f_r + 8100.0 * p.f_a)
        );
    }

    #[test]
    fn leader_rule_discounts_lower_id() {
        let p = params();
        let routes = vec![route(&[1, 2], 60.0), route(&[1, 2], 60.0)];
        let plan = SpeedPlan::from_traversal(&routes, &[0.0, 0.0], vec![vec![1.0], vec![1.0]]).unwrap();
        let etas = coincidence_etas(&routes, &plan, p.eta);
        assert_eq!(etas, vec![vec![0.6], vec![1.0]]);
        let cfg = PlatoonConfiguration::from_predecessors(vec![vec![2], vec![2]], &routes).unwrap();
        let expected = 60.0 * (p.f_r + p.f_a * 3600.0) + 60.0 * (p.f_r + 0.6 * p.f_a * 3600.0);
        assert_relative_eq!(total_fuel(&routes, &plan, Some(&cfg), &p).unwrap(), expected);
    }

    #[test]
    fn offset_entry_means_no_platoon() {
        let p = params();
        let routes = vec![route(&[1, 2], 60.0), route(&[1, 2], 60.0)];
        let plan = SpeedPlan::from_traversal(&routes, &[0.0, 0.01], vec![vec![1.0], vec![1.0]]).unwrap();
        assert_eq!(coincidence_etas(&routes, &plan, p.eta), vec![vec![1.0], vec![1.0]]);
        let cfg = PlatoonConfiguration::from_predecessors(vec![vec![2], vec![2]], &routes).unwrap();
        assert_eq!(
            total_fuel(&routes, &plan, Some(&cfg), &p),
            Err(FuelError::InconsistentPlan {
                truck: 1,
                edge: 0,
                pred: 2
            })
        );
    }

    #[test]
    fn objective_values() {
        let routes = vec![route(&[1, 2], 90.0)];
        let plan = SpeedPlan::from_traversal(&routes, &[0.0], vec![vec![1.2]]).unwrap();
        let cfg = PlatoonConfiguration::solo(&routes);
        assert_relative_eq!(speed_dependent_objective(&routes, &plan, &cfg, 0.6), 506_250.0, max_relative = 1e-12);
        let empty: Vec<Route> = Vec::new();
        let plan = SpeedPlan::from_traversal(&empty, &[], vec![]).unwrap();
        assert_eq!(speed_dependent_objective(&empty, &plan, &PlatoonConfiguration::solo(&empty), 0.6), 0.0);
    }

    // F_a * objective + F_r * distance == total fuel on random consistent plans:
    // truck 2 duplicates truck 1's edges 1..=2 exactly, so coincidence and config agree.
    #[test]
    fn objective_fuel_identity_on_random_plans() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let p = params();
        for _ in 0..200 {
            let w: Vec<f64> = (0..4).map(|_| rng.gen_range(5.0..120.0)).collect();
            let r1 = Route {
                nodes: (1..=5).map(NodeId).collect(),
                edge_lengths: w.clone(),
            };
            let r2 = Route {
                nodes: vec![NodeId(9), NodeId(2), NodeId(3), NodeId(4), NodeId(8)],
                edge_lengths: vec![rng.gen_range(5.0..50.0), w[1], w[2], rng.gen_range(5.0..50.0)],
            };
            let t1: Vec<f64> = (0..4).map(|_| rng.gen_range(0.1..3.0)).collect();
            let merge = rng.gen_bool(0.5);
            let mut t2: Vec<f64> = (0..4).map(|_| rng.gen_range(0.1..3.0)).collect();
            let s1 = rng.gen_range(-1.0..1.0);
            let mut s2 = rng.gen_range(-1.0..1.0);
            if merge {
                t2[1] = t1[1];
                t2[2] = t1[2];
                s2 = s1 + t1[0] - t2[0];
            }
            let routes = vec![r1, r2];
            let plan = SpeedPlan::from_traversal(&routes, &[s1, s2], vec![t1, t2]).unwrap();
            let preds = if merge {
                vec![vec![1, 2, 2, 1], vec![2; 4]]
            } else {
                vec![vec![1; 4], vec![2; 4]]
            };
            let cfg = PlatoonConfiguration::from_predecessors(preds, &routes).unwrap();
            let dist: f64 = routes.iter().map(Route::length).sum();
            let fuel = total_fuel(&routes, &plan, Some(&cfg), &p).unwrap();
            let obj = speed_dependent_objective(&routes, &plan, &cfg, p.eta);
            assert_relative_eq!(p.f_a * obj + p.f_r * dist, fuel, max_relative = 1e-12);
        }
    }

    proptest! {
        #[test]
        fn per_km_increasing(v in 0.01f64..200.0, dv in 0.01f64..10.0, eta in 0.05f64..=1.0) {
            let p = params();
            prop_assert!(fuel_per_km(v + dv, eta, &p) > fuel_per_km(v, eta, &p));
        }

        // relabeling a coincident solo truck as follower never raises fuel
        #[test]
        fn follower_discount_never_hurts(t in 0.2f64..3.0, s in -1.0f64..1.0, eta in 0.05f64..=1.0) {
            let routes = vec![route(&[1, 2, 3], 40.0), route(&[1, 2, 3], 40.0)];
            let plan = SpeedPlan::from_traversal(&routes, &[s, s], vec![vec![t, t], vec![t, t]]).unwrap();
            let solo = PlatoonConfiguration::solo(&routes);
            let merged = PlatoonConfiguration::from_predecessors(vec![vec![2, 2], vec![2, 2]], &routes).unwrap();
            let a = speed_dependent_objective(&routes, &plan, &solo, eta);
            let b = speed_dependent_objective(&routes, &plan, &merged, eta);
            prop_assert!(b <= a);
        }
    }
}
