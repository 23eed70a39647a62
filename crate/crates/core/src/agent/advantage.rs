use serde::{Deserialize, Serialize};

use super::params::ModelParams;
use crate::error::{Error, Result};

/// One environment interaction `(s, a, R, s')`. `action` holds one entry per
/// actor head.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub obs: Vec<f64>,
    pub action: Vec<u8>,
    pub reward: f64,
    pub next_obs: Vec<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub steps: Vec<Transition>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn push(&mut self, t: Transition) {
        self.steps.push(t);
    }

    pub fn mean_reward(&self) -> f64 {
        if self.steps.is_empty() {
            return 0.0;
        }
        self.steps.iter().map(|t| t.reward).sum::<f64>() / self.steps.len() as f64
    }
}

/// Where step `tau`'s K-step return bootstraps from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bootstrap {
    /// `sum_{i<k} gamma^i R_{tau+i}`.
    pub reward_sum: f64,
    /// Step whose `next_obs` supplies the bootstrap value.
    pub index: usize,
    /// `gamma^k` for the effective horizon `k`.
    pub discount: f64,
}

/// K-step bootstrap plan, truncated at the end of the slice: near the end the
/// horizon shrinks and the value of the last observed state is used.
pub fn bootstraps(rewards: &[f64], gamma: f64, horizon: usize) -> Vec<Bootstrap> {
    let n = rewards.len();
    (0..n)
        .map(|tau| {
            let k = horizon.min(n - tau);
            let mut sum = 0.0;
            let mut disc = 1.0;
            for r in &rewards[tau..tau + k] {
                sum += disc * r;
                disc *= gamma;
            }
            Bootstrap { reward_sum: sum, index: tau + k - 1, discount: disc }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdvantageEstimate {
    pub advantages: Vec<f64>,
    /// K-step value targets, `advantage + V(s)`.
    pub targets: Vec<f64>,
    pub horizon: usize,
    pub gamma: f64,
}

pub(crate) fn check_discount(gamma: f64, horizon: usize) -> Result<()> {
    if horizon == 0 {
        return Err(Error::InvalidArgument("bootstrap horizon must be at least 1".into()));
    }
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::InvalidArgument(format!("discount must lie in (0, 1), got {gamma}")));
    }
    Ok(())
}

/// K-step advantages from precomputed values: `values[t] = V(s_t)` and
/// `next_values[t] = V(s'_t)`.
pub fn advantages_from_values(
    rewards: &[f64],
    values: &[f64],
    next_values: &[f64],
    gamma: f64,
    horizon: usize,
) -> AdvantageEstimate {
    let plan = bootstraps(rewards, gamma, horizon);
    let targets: Vec<f64> = plan.iter().map(|b| b.reward_sum + b.discount * next_values[b.index]).collect();
    let advantages = targets.iter().zip(values).map(|(t, v)| t - v).collect();
    AdvantageEstimate { advantages, targets, horizon, gamma }
}

/// K-step advantage of every step in `traj` under the critic in `params`.
pub fn compute_advantages(traj: &[Transition], params: &ModelParams, gamma: f64, horizon: usize) -> Result<AdvantageEstimate> {
    if traj.is_empty() {
        return Err(Error::Empty("trajectory"));
    }
    check_discount(gamma, horizon)?;
    let rewards: Vec<f64> = traj.iter().map(|t| t.reward).collect();
    let values = traj.iter().map(|t| params.value(&t.obs)).collect::<Result<Vec<_>>>()?;
    let next_values = traj.iter().map(|t| params.value(&t.next_obs)).collect::<Result<Vec<_>>>()?;
    Ok(advantages_from_values(&rewards, &values, &next_values, gamma, horizon))
}
