//! Local intersection features and reward.

use serde::{Deserialize, Serialize};

use super::signal::Light;
use super::state::{SimState, HALT_SPEED};
use crate::error::{Error, Result};

/// Length of [`Observation::to_vec`].
pub const OBS_DIM: usize = 6;

/// Per-intersection state, every component in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    /// Mean over controlled lanes of occupied length / lane length.
    pub occupancy: f64,
    /// Same, counting only halted vehicles.
    pub queue_ratio: f64,
    /// Mean vehicle speed over the speed limit; 1 on empty approaches.
    pub avg_speed: f64,
    /// Fraction of signal heads showing green, yellow, red.
    pub phase: [f64; 3],
}

impl Observation {
    pub fn to_vec(&self) -> Vec<f64> {
        vec![self.occupancy, self.queue_ratio, self.avg_speed, self.phase[0], self.phase[1], self.phase[2]]
    }
}

/// `-(o + q)^2`, in `[-4, 0]`.
pub fn local_reward(obs: &Observation) -> f64 {
    let s = obs.occupancy + obs.queue_ratio;
    -(s * s)
}

impl SimState {
    pub fn observe(&self, intersection: usize) -> Result<Observation> {
        if intersection >= self.intersection_count() {
            return Err(Error::UnknownIntersection(intersection));
        }
        let net = self.network();
        let spec = &net.spec;
        let mut lanes = 0usize;
        let (mut occ, mut queue) = (0.0, 0.0);
        let (mut speed_sum, mut vehicles) = (0.0, 0usize);
        let mut heads = [0usize; 3];
        for &link in &net.intersections[intersection].inbound {
            let colour = match self.light(intersection, link) {
                Light::Green => 0,
                Light::Yellow => 1,
                Light::Red => 2,
            };
            for lane in net.links[link].lane_ids() {
                lanes += 1;
                heads[colour] += 1;
                let (mut present, mut halted) = (0usize, 0usize);
                for v in self.lane_vehicles(lane) {
                    present += 1;
                    speed_sum += v.speed;
                    if v.speed <= HALT_SPEED {
                        halted += 1;
                    }
                }
                vehicles += present;
                let ratio = |n: usize| (n as f64 * spec.jam_spacing / spec.lane_length).min(1.0);
                occ += ratio(present);
                queue += ratio(halted);
            }
        }
        let lanes_f = lanes as f64;
        let avg_speed = if vehicles == 0 {
            1.0
        } else {
            (speed_sum / vehicles as f64 / spec.speed_limit).clamp(0.0, 1.0)
        };
        Ok(Observation {
            occupancy: occ / lanes_f,
            queue_ratio: queue / lanes_f,
            avg_speed,
            phase: heads.map(|h| h as f64 / lanes_f),
        })
    }

    pub fn observe_all(&self) -> Vec<Observation> {
        (0..self.intersection_count()).map(|i| self.observe(i).expect("index in range")).collect()
    }
}
