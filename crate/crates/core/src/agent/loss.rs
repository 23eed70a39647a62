//! A2C objective and its gradients.
//!
//! Per step the loss is `-log pi(a|s) * A + c_v * (target - V(s))^2 - beta * H(pi(.|s))`,
//! averaged over the steps. Lower is better.

use serde::{Deserialize, Serialize};

use super::advantage::{bootstraps, check_discount, Transition};
use super::nn::ForwardTrace;
use super::params::ModelParams;
use super::policy::{log_softmax2, softmax2};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossConfig {
    pub gamma: f64,
    /// K in the K-step return.
    pub horizon: usize,
    pub value_coef: f64,
    pub entropy_coef: f64,
}

impl Default for LossConfig {
    fn default() -> Self {
        Self { gamma: 0.99, horizon: 5, value_coef: 0.5, entropy_coef: 0.01 }
    }
}

struct ActorStep {
    trace: ForwardTrace,
    log_prob: f64,
    entropy: f64,
    /// d(-log pi(a|s)) / d logits, per head pair.
    dlogp: Vec<f64>,
    /// d(-H) / d logits.
    dneg_entropy: Vec<f64>,
}

fn actor_step(params: &ModelParams, t: &Transition) -> Result<ActorStep> {
    params.check_obs(&t.obs)?;
    let heads = params.architecture().heads;
    if t.action.len() != heads {
        return Err(Error::DimensionMismatch { expected: heads, actual: t.action.len() });
    }
    let trace = params.layout().actor.forward_trace(params.as_slice(), &t.obs);
    let logits = trace.output();
    let mut log_prob = 0.0;
    let mut entropy = 0.0;
    let mut dlogp = vec![0.0; 2 * heads];
    let mut dneg_entropy = vec![0.0; 2 * heads];
    for h in 0..heads {
        let (z0, z1) = (logits[2 * h], logits[2 * h + 1]);
        let p = softmax2(z0, z1);
        let lp = log_softmax2(z0, z1);
        let a = t.action[h] as usize;
        log_prob += lp[a];
        let hh = -(p[0] * lp[0] + p[1] * lp[1]);
        entropy += hh;
        for j in 0..2 {
            dlogp[2 * h + j] = p[j] - if j == a { 1.0 } else { 0.0 };
            dneg_entropy[2 * h + j] = p[j] * (lp[j] + hh);
        }
    }
    Ok(ActorStep { trace, log_prob, entropy, dlogp, dneg_entropy })
}

/// Loss and gradient with advantages and value targets held fixed. This is
/// the quantity the local update descends.
pub fn surrogate_loss_and_grad(
    params: &ModelParams,
    batch: &[Transition],
    advantages: &[f64],
    targets: &[f64],
    cfg: &LossConfig,
) -> Result<(f64, Vec<f64>)> {
    if batch.is_empty() {
        return Err(Error::Empty("batch"));
    }
    let layout = params.layout();
    let w = params.as_slice();
    let scale = 1.0 / batch.len() as f64;
    let mut grad = vec![0.0; params.len()];
    let mut loss = 0.0;
    for ((t, &adv), &target) in batch.iter().zip(advantages).zip(targets) {
        let step = actor_step(params, t)?;
        let critic = layout.critic.forward_trace(w, &t.obs);
        let v = critic.output()[0];
        let err = target - v;
        loss += -step.log_prob * adv + cfg.value_coef * err * err - cfg.entropy_coef * step.entropy;

        let dz: Vec<f64> = step
            .dlogp
            .iter()
            .zip(&step.dneg_entropy)
            .map(|(lp, ne)| scale * (adv * lp + cfg.entropy_coef * ne))
            .collect();
        layout.actor.backward(w, &step.trace, &dz, &mut grad);
        layout.critic.backward(w, &critic, &[-2.0 * cfg.value_coef * err * scale], &mut grad);
    }
    Ok((loss * scale, grad))
}

/// Scalar loss of `params` on a fixed trajectory, with K-step advantages and
/// targets recomputed under the critic in `params`.
pub fn scalar_loss(params: &ModelParams, traj: &[Transition], cfg: &LossConfig) -> Result<f64> {
    Ok(evaluate(params, traj, cfg, false)?.0)
}

/// [`scalar_loss`] and its exact gradient, including the dependence of the
/// advantages and targets on the critic.
pub fn scalar_loss_and_grad(params: &ModelParams, traj: &[Transition], cfg: &LossConfig) -> Result<(f64, Vec<f64>)> {
    let (loss, grad) = evaluate(params, traj, cfg, true)?;
    Ok((loss, grad.expect("gradient requested")))
}

fn evaluate(params: &ModelParams, traj: &[Transition], cfg: &LossConfig, with_grad: bool) -> Result<(f64, Option<Vec<f64>>)> {
    if traj.is_empty() {
        return Err(Error::Empty("trajectory"));
    }
    check_discount(cfg.gamma, cfg.horizon)?;
    let layout = params.layout();
    let w = params.as_slice();
    let n = traj.len();
    let scale = 1.0 / n as f64;
    for t in traj {
        params.check_obs(&t.next_obs)?;
    }
    let rewards: Vec<f64> = traj.iter().map(|t| t.reward).collect();
    let plan = bootstraps(&rewards, cfg.gamma, cfg.horizon);
    let now: Vec<ForwardTrace> = traj.iter().map(|t| layout.critic.forward_trace(w, &t.obs)).collect();
    let next: Vec<ForwardTrace> = traj.iter().map(|t| layout.critic.forward_trace(w, &t.next_obs)).collect();

    let mut grad = with_grad.then(|| vec![0.0; params.len()]);
    let mut loss = 0.0;
    // coefficient of grad V at each s_t and s'_t
    let mut coef_now = vec![0.0; n];
    let mut coef_next = vec![0.0; n];
    for (tau, t) in traj.iter().enumerate() {
        let step = actor_step(params, t)?;
        let b = plan[tau];
        let adv = b.reward_sum + b.discount * next[b.index].output()[0] - now[tau].output()[0];
        // target - V(s) equals the advantage
        loss += -step.log_prob * adv + cfg.value_coef * adv * adv - cfg.entropy_coef * step.entropy;
        if let Some(g) = grad.as_mut() {
            let dz: Vec<f64> = step
                .dlogp
                .iter()
                .zip(&step.dneg_entropy)
                .map(|(lp, ne)| scale * (adv * lp + cfg.entropy_coef * ne))
                .collect();
            layout.actor.backward(w, &step.trace, &dz, g);
            let dadv = scale * (-step.log_prob + 2.0 * cfg.value_coef * adv);
            coef_now[tau] -= dadv;
            coef_next[b.index] += dadv * b.discount;
        }
    }
    if let Some(g) = grad.as_mut() {
        for tau in 0..n {
            if coef_now[tau] != 0.0 {
                layout.critic.backward(w, &now[tau], &[coef_now[tau]], g);
            }
            if coef_next[tau] != 0.0 {
                layout.critic.backward(w, &next[tau], &[coef_next[tau]], g);
            }
        }
    }
    Ok((loss * scale, grad))
}
