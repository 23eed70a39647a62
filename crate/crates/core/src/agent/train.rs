//! Local A2C training: acting, buffering and parameter updates.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::advantage::{advantages_from_values, Trajectory, Transition};
use super::loss::{scalar_loss, surrogate_loss_and_grad, LossConfig};
use super::params::ModelParams;
use super::policy::{sample_action, ActionMode};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum OptimizerKind {
    Sgd,
    Adam { beta1: f64, beta2: f64, eps: f64 },
}

impl OptimizerKind {
    pub fn adam() -> Self {
        OptimizerKind::Adam { beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

/// Minimizing first-order optimizer over a flat parameter vector.
#[derive(Debug, Clone)]
pub struct Optimizer {
    kind: OptimizerKind,
    lr: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Optimizer {
    pub fn new(kind: OptimizerKind, lr: f64, len: usize) -> Self {
        let (m, v) = match kind {
            OptimizerKind::Sgd => (Vec::new(), Vec::new()),
            OptimizerKind::Adam { .. } => (vec![0.0; len], vec![0.0; len]),
        };
        Self { kind, lr, m, v, t: 0 }
    }

    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        match self.kind {
            OptimizerKind::Sgd => {
                for (p, g) in params.iter_mut().zip(grad) {
                    *p -= self.lr * g;
                }
            }
            OptimizerKind::Adam { beta1, beta2, eps } => {
                self.t += 1;
                let c1 = 1.0 - beta1.powi(self.t);
                let c2 = 1.0 - beta2.powi(self.t);
                for i in 0..params.len() {
                    self.m[i] = beta1 * self.m[i] + (1.0 - beta1) * grad[i];
                    self.v[i] = beta2 * self.v[i] + (1.0 - beta2) * grad[i] * grad[i];
                    let mhat = self.m[i] / c1;
                    let vhat = self.v[i] / c2;
                    params[i] -= self.lr * mhat / (vhat.sqrt() + eps);
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub gamma: f64,
    /// K-step bootstrap horizon.
    pub horizon: usize,
    /// Fragment length over which K-step returns are computed; each fragment
    /// bootstraps from its own last next-state.
    pub rollout_len: usize,
    /// Steps collected per update (clamped to the local steps of a round).
    pub batch_size: usize,
    pub minibatch_size: usize,
    pub epochs: usize,
    pub value_coef: f64,
    pub entropy_coef: f64,
    pub optimizer: OptimizerKind,
    /// Global-norm gradient clip.
    pub grad_clip: Option<f64>,
}

impl TrainConfig {
    /// Values from the A2C hyperparameter table.
    pub fn table() -> Self {
        Self {
            learning_rate: 1e-4,
            gamma: 0.99,
            horizon: 5,
            rollout_len: 20,
            batch_size: 4000,
            minibatch_size: 4000,
            epochs: 1,
            value_coef: 0.5,
            entropy_coef: 0.01,
            optimizer: OptimizerKind::Sgd,
            grad_clip: Some(40.0),
        }
    }

    /// Values quoted in the experiment text.
    pub fn prose() -> Self {
        Self {
            learning_rate: 1e-3,
            gamma: 0.95,
            rollout_len: 240,
            batch_size: 3000,
            minibatch_size: 3000,
            ..Self::table()
        }
    }

    /// Tuned for short desk-scale runs: several Adam passes per round.
    pub fn desk() -> Self {
        Self {
            learning_rate: 3e-3,
            gamma: 0.95,
            horizon: 5,
            rollout_len: 240,
            batch_size: 240,
            minibatch_size: 60,
            epochs: 4,
            optimizer: OptimizerKind::adam(),
            grad_clip: Some(40.0),
            ..Self::table()
        }
    }

    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "table" => Ok(Self::table()),
            "prose" => Ok(Self::prose()),
            "desk" => Ok(Self::desk()),
            other => Err(Error::Config(format!("unknown hyperparameter preset {other:?}"))),
        }
    }

    pub fn loss_config(&self) -> LossConfig {
        LossConfig {
            gamma: self.gamma,
            horizon: self.horizon,
            value_coef: self.value_coef,
            entropy_coef: self.entropy_coef,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if !(self.learning_rate >= 0.0) {
            return bad("learning rate must be non-negative");
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return bad("gamma must lie in (0, 1)");
        }
        if self.horizon == 0 || self.rollout_len == 0 || self.batch_size == 0 || self.minibatch_size == 0 || self.epochs == 0 {
            return bad("horizon, rollout, batch, minibatch and epochs must be positive");
        }
        Ok(())
    }
}

/// An A2C agent: parameters, optimizer state, private action stream and the
/// buffer of transitions not yet learned from.
#[derive(Debug, Clone)]
pub struct Learner {
    pub params: ModelParams,
    optimizer: Optimizer,
    rng: ChaCha8Rng,
    buffer: Vec<Transition>,
    cfg: TrainConfig,
}

impl Learner {
    pub fn new(params: ModelParams, cfg: TrainConfig, seed: u64) -> Self {
        let optimizer = Optimizer::new(cfg.optimizer, cfg.learning_rate, params.len());
        Self { params, optimizer, rng: ChaCha8Rng::seed_from_u64(seed), buffer: Vec::new(), cfg }
    }

    pub fn config(&self) -> &TrainConfig {
        &self.cfg
    }

    /// One action per actor head.
    pub fn act(&mut self, obs: &[f64], mode: ActionMode) -> Result<Vec<u8>> {
        let probs = self.params.action_probs(obs)?;
        Ok(probs.into_iter().map(|p| sample_action(p, mode, &mut self.rng)).collect())
    }

    /// Buffer a transition and update once a full batch is available.
    pub fn record(&mut self, t: Transition, batch: usize) -> Result<()> {
        self.buffer.push(t);
        if self.buffer.len() >= batch {
            self.flush()?;
        }
        Ok(())
    }

    /// Buffer a transition without learning from it yet.
    pub fn push(&mut self, t: Transition) {
        self.buffer.push(t);
    }

    pub fn buffered(&self) -> usize {
        self.buffer.len()
    }

    /// Learn from the whole buffer, then return it as a trajectory together
    /// with the [`scalar_loss`] of the updated parameters on it.
    pub fn train_round(&mut self) -> Result<(Trajectory, f64)> {
        let steps = self.buffer.clone();
        self.flush()?;
        let loss = if steps.is_empty() { 0.0 } else { scalar_loss(&self.params, &steps, &self.cfg.loss_config())? };
        Ok((Trajectory { steps }, loss))
    }

    /// Learn from whatever is buffered.
    pub fn flush(&mut self) -> Result<()> {
        if self.buffer.is_empty() {
            return Ok(());
        }
        let batch = std::mem::take(&mut self.buffer);
        let (adv, targets) = self.fragment_targets(&batch)?;
        self.update(&batch, &adv, &targets)
    }

    /// K-step advantages and targets per rollout fragment under the current critic.
    fn fragment_targets(&self, batch: &[Transition]) -> Result<(Vec<f64>, Vec<f64>)> {
        let mut adv = Vec::with_capacity(batch.len());
        let mut targets = Vec::with_capacity(batch.len());
        for frag in batch.chunks(self.cfg.rollout_len) {
            let rewards: Vec<f64> = frag.iter().map(|t| t.reward).collect();
            let values = frag.iter().map(|t| self.params.value(&t.obs)).collect::<Result<Vec<_>>>()?;
            let next = frag.iter().map(|t| self.params.value(&t.next_obs)).collect::<Result<Vec<_>>>()?;
            let est = advantages_from_values(&rewards, &values, &next, self.cfg.gamma, self.cfg.horizon);
            adv.extend(est.advantages);
            targets.extend(est.targets);
        }
        Ok((adv, targets))
    }

    /// Gradient steps on a batch with fixed advantages and targets.
    pub fn update(&mut self, batch: &[Transition], adv: &[f64], targets: &[f64]) -> Result<()> {
        let loss_cfg = self.cfg.loss_config();
        let mb = self.cfg.minibatch_size.max(1);
        for _ in 0..self.cfg.epochs {
            for start in (0..batch.len()).step_by(mb) {
                let end = (start + mb).min(batch.len());
                let (_, mut grad) =
                    surrogate_loss_and_grad(&self.params, &batch[start..end], &adv[start..end], &targets[start..end], &loss_cfg)?;
                if let Some(clip) = self.cfg.grad_clip {
                    let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
                    if norm > clip {
                        grad.iter_mut().for_each(|g| *g *= clip / norm);
                    }
                }
                self.optimizer.step(self.params.as_mut_slice(), &grad);
                if !self.params.is_finite() {
                    let bad = self.params.as_slice().iter().position(|v| !v.is_finite()).unwrap();
                    return Err(Error::Divergence(format!(
                        "parameter {bad} became non-finite (gradient norm {:.3e})",
                        grad.iter().map(|g| g * g).sum::<f64>().sqrt()
                    )));
                }
            }
        }
        Ok(())
    }

    /// Replace parameters (after a federation round); optimizer state is kept.
    pub fn set_params(&mut self, params: ModelParams) {
        self.params = params;
    }
}

/// Single-agent environment interface used by [`local_train`].
pub trait Environment {
    fn observe(&self) -> Result<Vec<f64>>;
    /// Apply `action` and return the reward and the next observation.
    fn step(&mut self, action: &[u8]) -> Result<(f64, Vec<f64>)>;
}

#[derive(Debug, Clone)]
pub struct LocalTrainOutput {
    pub params: ModelParams,
    pub trajectory: Trajectory,
    /// [`scalar_loss`] of the updated parameters on the collected trajectory.
    pub loss: f64,
}

/// Run `steps` environment steps with the sampled policy, learning on the way.
pub fn local_train(
    params: ModelParams,
    env: &mut impl Environment,
    steps: usize,
    cfg: &TrainConfig,
    seed: u64,
) -> Result<LocalTrainOutput> {
    cfg.validate()?;
    let mut learner = Learner::new(params, cfg.clone(), seed);
    let batch = cfg.batch_size.min(steps).max(1);
    let mut trajectory = Trajectory::default();
    let mut obs = env.observe()?;
    for _ in 0..steps {
        let action = learner.act(&obs, ActionMode::Sample)?;
        let (reward, next_obs) = env.step(&action)?;
        let t = Transition { obs, action, reward, next_obs: next_obs.clone() };
        trajectory.push(t.clone());
        learner.record(t, batch)?;
        obs = next_obs;
    }
    learner.flush()?;
    let loss = if trajectory.is_empty() { 0.0 } else { scalar_loss(&learner.params, &trajectory.steps, &cfg.loss_config())? };
    Ok(LocalTrainOutput { params: learner.params, trajectory, loss })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agent::nn::Activation;
    use crate::agent::params::Architecture;

    /// Two-state toy: action 1 moves towards a zero-reward state.
    struct Toy {
        state: f64,
    }

    impl Environment for Toy {
        fn observe(&self) -> Result<Vec<f64>> {
            Ok(vec![self.state, 1.0 - self.state])
        }

        fn step(&mut self, action: &[u8]) -> Result<(f64, Vec<f64>)> {
            self.state = if action[0] == 1 { 0.0 } else { 1.0 };
            Ok((-self.state, self.observe()?))
        }
    }

    fn arch() -> Architecture {
        Architecture::new(2, vec![8], Activation::Tanh)
    }

    #[test]
    fn zero_learning_rate_keeps_params() {
        let p = ModelParams::init(arch(), 1);
        let cfg = TrainConfig { learning_rate: 0.0, batch_size: 10, minibatch_size: 5, ..TrainConfig::table() };
        let out = local_train(p.clone(), &mut Toy { state: 1.0 }, 40, &cfg, 3).unwrap();
        assert_eq!(out.params, p);
        assert_eq!(out.trajectory.len(), 40);
    }

    #[test]
    fn same_seed_same_result() {
        let p = ModelParams::init(arch(), 1);
        let cfg = TrainConfig::desk();
        let a = local_train(p.clone(), &mut Toy { state: 1.0 }, 100, &cfg, 5).unwrap();
        let b = local_train(p.clone(), &mut Toy { state: 1.0 }, 100, &cfg, 5).unwrap();
        assert_eq!(a.params, b.params);
        assert_eq!(a.trajectory, b.trajectory);
        assert_eq!(a.loss, b.loss);
    }

    #[test]
    fn learns_the_toy_task() {
        let p = ModelParams::init(arch(), 2);
        let cfg = TrainConfig { batch_size: 50, minibatch_size: 50, rollout_len: 50, ..TrainConfig::desk() };
        let out = local_train(p, &mut Toy { state: 1.0 }, 3000, &cfg, 7).unwrap();
        let probs = crate::agent::policy::forward_actor(&out.params, &[0.0, 1.0]).unwrap();
        assert!(probs[1] > 0.9, "{probs:?}");
    }

    #[test]
    fn adam_first_step_is_learning_rate_sized() {
        let mut opt = Optimizer::new(OptimizerKind::adam(), 0.1, 2);
        let mut p = [1.0, 1.0];
        opt.step(&mut p, &[3.0, -0.001]);
        assert!((p[0] - 0.9).abs() < 1e-6);
        assert!((p[1] - 1.1).abs() < 1e-4);
    }

    #[test]
    fn divergence_is_reported() {
        let p = ModelParams::init(arch(), 1);
        let cfg = TrainConfig { learning_rate: f64::INFINITY, grad_clip: None, optimizer: OptimizerKind::Sgd, ..TrainConfig::table() };
        let mut learner = Learner::new(p, cfg, 0);
        let t = Transition { obs: vec![1.0, 0.0], action: vec![1], reward: -1.0, next_obs: vec![0.0, 1.0] };
        let err = learner.update(&[t], &[1.0], &[0.0]).unwrap_err();
        assert!(matches!(err, Error::Divergence(_)));
    }
}
