//! Travel time, waiting time, communication cost and their report files.

pub mod chart;
pub mod comm;

use serde::{Deserialize, Serialize};

use crate::sim::{CompletedTrip, SimState};

pub use chart::line_chart_svg;
pub use comm::{comm_cost, CommCost, CommCostModel, CommMethod, RunLog};

/// Mean of `arrival - departure`; `None` without completed trips.
pub fn travel_time(trips: &[CompletedTrip]) -> Option<f64> {
    if trips.is_empty() {
        return None;
    }
    Some(trips.iter().map(CompletedTrip::travel_time).sum::<f64>() / trips.len() as f64)
}

/// Mean of `waiting_steps * dt` over the given vehicles; `None` when empty.
pub fn waiting_time(waiting_steps: impl IntoIterator<Item = u32>, dt: f64) -> Option<f64> {
    let (mut sum, mut n) = (0u64, 0usize);
    for w in waiting_steps {
        sum += u64::from(w);
        n += 1;
    }
    (n > 0).then(|| sum as f64 * dt / n as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeMetrics {
    /// Mean over completed vehicles.
    pub mean_travel_time: Option<f64>,
    /// Mean over vehicles that entered the network, finished or not.
    pub mean_waiting_time: Option<f64>,
    pub completed: usize,
    pub spawned: usize,
    /// Mean reward over agents, one entry per step.
    pub rewards: Vec<f64>,
}

impl EpisodeMetrics {
    pub fn from_sim(sim: &SimState, rewards: Vec<f64>) -> Self {
        let dt = sim.network().spec.dt;
        let waits = sim.completed().iter().map(|t| t.waiting_steps).chain(sim.active_vehicles().map(|v| v.waiting_steps));
        Self {
            mean_travel_time: travel_time(sim.completed()),
            mean_waiting_time: waiting_time(waits, dt),
            completed: sim.completed().len(),
            spawned: sim.spawned(),
            rewards,
        }
    }

    pub fn mean_reward(&self) -> f64 {
        if self.rewards.is_empty() {
            0.0
        } else {
            self.rewards.iter().sum::<f64>() / self.rewards.len() as f64
        }
    }
}

/// Sample mean and standard deviation (`n - 1` denominator, 0 for one value).
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::VehicleId;

    fn trip(depart: f64, arrive: f64, wait: u32) -> CompletedTrip {
        CompletedTrip { id: VehicleId(0), depart_time: depart, arrival_time: arrive, waiting_steps: wait }
    }

    #[test]
    fn travel_times() {
        assert_eq!(travel_time(&[trip(10.0, 70.0, 0)]), Some(60.0));
        assert_eq!(travel_time(&[trip(0.0, 60.0, 0), trip(0.0, 120.0, 0)]), Some(90.0));
        assert_eq!(travel_time(&[]), None);
    }

    #[test]
    fn waiting_times() {
        assert_eq!(waiting_time([0], 1.0), Some(0.0));
        assert_eq!(waiting_time([30], 1.0), Some(30.0));
        assert_eq!(waiting_time([10, 20], 0.5), Some(7.5));
        assert_eq!(waiting_time([], 1.0), None);
    }

    #[test]
    fn sample_std() {
        let (m, s) = mean_std(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m, 2.5);
        assert!((s - (5.0f64 / 3.0).sqrt()).abs() < 1e-15);
        assert_eq!(mean_std(&[7.0]), (7.0, 0.0));
    }
}
