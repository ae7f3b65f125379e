//! Arrival-time recursion and earliest/latest arrival windows along a route.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::road_graph::Route;
use crate::TIME_TOL;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TimingError {
    #[error("expected {expected} traversal times, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
}

/// Feasible arrival interval at every node of one route.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeWindows {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl TimeWindows {
    /// Solo windows: full speed forward from the start, full speed backward from the deadline.
    pub fn solo(route: &Route, start: f64, deadline: f64, v_max: f64) -> Self {
        Self {
            lower: earliest_arrival(route, start, v_max),
            upper: latest_arrival(route, start, deadline, v_max),
        }
    }

    pub fn len(&self) -> usize {
        self.lower.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lower.is_empty()
    }

    /// First node whose window is empty, if any.
    pub fn first_empty(&self) -> Option<usize> {
        self.lower
            .iter()
            .zip(&self.upper)
            .position(|(lo, hi)| lo > &(hi + TIME_TOL))
    }

    pub fn contains(&self, node: usize, t: f64, tol: f64) -> bool {
        t >= self.lower[node] - tol && t <= self.upper[node] + tol
    }
}

/// Arrival time at each node given per-edge traversal times.
pub fn arrival_times(route: &Route, start: f64, traversal: &[f64]) -> Result<Vec<f64>, TimingError> {
    if traversal.len() != route.num_edges() {
        return Err(TimingError::DimensionMismatch {
            expected: route.num_edges(),
            got: traversal.len(),
        });
    }
    let mut t = start;
    let mut out = Vec::with_capacity(traversal.len() + 1);
    out.push(t);
    for dt in traversal {
        t += dt;
        out.push(t);
    }
    Ok(out)
}

pub fn earliest_arrival(route: &Route, start: f64, v_max: f64) -> Vec<f64> {
    let full_speed: Vec<f64> = route.edge_lengths.iter().map(|w| w / v_max).collect();
    arrival_times(route, start, &full_speed).expect("lengths match by construction")
}

/// Latest arrival times: `deadline` at the destination, working backward at
/// full speed down to the second node. The first node is pinned to `start`.
pub fn latest_arrival(route: &Route, start: f64, deadline: f64, v_max: f64) -> Vec<f64> {
    let n = route.nodes.len();
    let mut upper = vec![0.0; n];
    if n == 1 {
        upper[0] = start;
        return upper;
    }
    upper[n - 1] = deadline;
    for i in (1..n - 1).rev() {
        upper[i] = upper[i + 1] - route.edge_lengths[i] / v_max;
    }
    upper[0] = start;
    upper
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::road_graph::NodeId;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn route(lengths: &[f64]) -> Route {
        Route {
            nodes: (0..=lengths.len() as u64).map(NodeId).collect(),
            edge_lengths: lengths.to_vec(),
        }
    }

    #[test]
    fn arrival_recursion() {
        assert_eq!(arrival_times(&route(&[90.0, 45.0]), 0.0, &[1.0, 0.5]).unwrap(), vec![0.0, 1.0, 1.5]);
        assert_eq!(arrival_times(&route(&[]), 3.0, &[]).unwrap(), vec![3.0]);
        assert_eq!(
            arrival_times(&route(&[1.0]), 0.0, &[1.0, 2.0]),
            Err(TimingError::DimensionMismatch { expected: 1, got: 2 })
        );
    }

    #[test]
    fn earliest_windows() {
        assert_eq!(earliest_arrival(&route(&[90.0, 45.0]), 0.0, 90.0), vec![0.0, 1.0, 1.5]);
        assert_eq!(earliest_arrival(&route(&[90.0]), 0.0, 90.0), vec![0.0, 1.0]);
        let slow = earliest_arrival(&route(&[90.0, 45.0]), 0.0, 45.0);
        let fast = earliest_arrival(&route(&[90.0, 45.0]), 0.0, 90.0);
        for i in 1..3 {
            assert_abs_diff_eq!(fast[i] - fast[i - 1], (slow[i] - slow[i - 1]) / 2.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn latest_windows() {
        assert_eq!(latest_arrival(&route(&[90.0, 45.0]), 0.0, 2.0, 90.0), vec![0.0, 1.5, 2.0]);
        assert_eq!(latest_arrival(&route(&[90.0]), 0.0, 5.0, 90.0), vec![0.0, 5.0]);
        let r = route(&[90.0, 45.0, 30.0]);
        let tight = TimeWindows::solo(&r, 0.0, 165.0 / 90.0, 90.0);
        for i in 0..4 {
            assert_abs_diff_eq!(tight.lower[i], tight.upper[i], epsilon = 1e-12);
        }
        assert_eq!(tight.first_empty(), None);
        let infeasible = TimeWindows::solo(&r, 0.0, 1.5, 90.0);
        assert_eq!(infeasible.first_empty(), Some(1));
    }

    proptest! {
        #[test]
        fn arrival_telescopes(ts in prop::collection::vec(0.01f64..5.0, 1..8), start in -3.0f64..3.0) {
            let r = route(&vec![1.0; ts.len()]);
            let t = arrival_times(&r, start, &ts).unwrap();
            let sum: f64 = ts.iter().sum();
            prop_assert!((t[t.len() - 1] - t[0] - sum).abs() < 1e-9);
        }

        // any target within the window is reachable at that node with capped speeds
        #[test]
        fn window_targets_reachable(
            lengths in prop::collection::vec(10.0f64..120.0, 1..6),
            slack in 0.0f64..2.0,
            frac in 0.0f64..=1.0,
            pick in 0usize..6,
        ) {
            let v_max = 90.0;
            let r = route(&lengths);
            let total = r.length() / v_max;
            let w = TimeWindows::solo(&r, 0.0, total + slack, v_max);
            let node = 1 + pick % lengths.len();
            let target = w.lower[node] + frac * (w.upper[node] - w.lower[node]);
            // reach the target node exactly, spreading extra time over the prefix
            let prefix_min: f64 = lengths[..node].iter().map(|l| l / v_max).sum();
            let extra = target - prefix_min;
            prop_assert!(extra >= -1e-9);
            let mut times: Vec<f64> = lengths.iter().map(|l| l / v_max).collect();
            let prefix_len: f64 = lengths[..node].iter().sum();
            for (i, l) in lengths[..node].iter().enumerate() {
                times[i] += extra * l / prefix_len;
            }
            let arr = arrival_times(&r, 0.0, &times).unwrap();
            prop_assert!((arr[node] - target).abs() < 1e-9);
            prop_assert!(arr[arr.len() - 1] <= total + slack + 1e-9);
        }
    }

    // solo feasibility by windows agrees with a speed-grid search on short routes
    #[test]
    fn window_feasibility_matches_speed_grid() {
        let v_max = 90.0;
        let speeds: Vec<f64> = (1..=30).map(|i| v_max * i as f64 / 30.0).collect();
        for (lengths, deadline) in [
            (vec![90.0, 45.0], 1.5),
            (vec![90.0, 45.0], 1.49),
            (vec![30.0, 60.0, 90.0], 2.0),
            (vec![30.0, 60.0, 90.0], 1.99),
            (vec![10.0, 20.0, 30.0, 40.0], 100.0 / 90.0 + 0.3),
        ] {
            let r = route(&lengths);
            let windows_ok = TimeWindows::solo(&r, 0.0, deadline, v_max).first_empty().is_none();
            // fastest grid speed is v_max, so the all-max assignment decides
            let grid_ok = (0..speeds.len().pow(lengths.len() as u32)).any(|mut code| {
                let mut t = 0.0;
                for l in &lengths {
                    t += l / speeds[code % speeds.len()];
                    code /= speeds.len();
                }
                t <= deadline + 1e-12
            });
            assert_eq!(windows_ok, grid_ok, "lengths {lengths:?} deadline {deadline}");
        }
    }
}
