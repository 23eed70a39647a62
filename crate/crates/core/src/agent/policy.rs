use rand::Rng;

use super::params::ModelParams;
use crate::error::Result;

/// `(p(0), p(1))` for one head from its two logits.
pub fn softmax2(z0: f64, z1: f64) -> [f64; 2] {
    let p1 = 1.0 / (1.0 + (z0 - z1).exp());
    let p0 = 1.0 / (1.0 + (z1 - z0).exp());
    [p0, p1]
}

/// Log-probabilities of both actions, stable for large logit gaps.
pub fn log_softmax2(z0: f64, z1: f64) -> [f64; 2] {
    let m = z0.max(z1);
    let lse = m + ((z0 - m).exp() + (z1 - m).exp()).ln();
    [z0 - lse, z1 - lse]
}

impl ModelParams {
    /// Per-head action probabilities over `{0, 1}`.
    pub fn action_probs(&self, obs: &[f64]) -> Result<Vec<[f64; 2]>> {
        self.check_obs(obs)?;
        let logits = self.layout().actor.forward(self.as_slice(), obs);
        Ok(logits.chunks_exact(2).map(|z| softmax2(z[0], z[1])).collect())
    }

    /// Critic estimate of the discounted return from `obs`.
    pub fn value(&self, obs: &[f64]) -> Result<f64> {
        self.check_obs(obs)?;
        Ok(self.layout().critic.forward(self.as_slice(), obs)[0])
    }
}

/// Single-head convenience: probabilities of keeping (0) and switching (1).
pub fn forward_actor(params: &ModelParams, obs: &[f64]) -> Result<[f64; 2]> {
    Ok(params.action_probs(obs)?[0])
}

pub fn forward_critic(params: &ModelParams, obs: &[f64]) -> Result<f64> {
    params.value(obs)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ActionMode {
    Sample,
    Greedy,
}

/// Draw one action from `probs`; greedy picks the argmax, preferring 0 on ties.
pub fn sample_action(probs: [f64; 2], mode: ActionMode, rng: &mut impl Rng) -> u8 {
    match mode {
        ActionMode::Greedy => u8::from(probs[1] > probs[0]),
        ActionMode::Sample => {
            let u: f64 = rng.random();
            u8::from(u < probs[1])
        }
    }
}
