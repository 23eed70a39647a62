use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::nn::{Activation, MlpLayout};
use crate::error::{Error, Result};

/// Shape of an actor-critic pair. The actor has one two-way softmax head per
/// controlled intersection (one for local agents, N for the centralized one).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Architecture {
    pub obs_dim: usize,
    pub hidden: Vec<usize>,
    pub activation: Activation,
    #[serde(default = "one")]
    pub heads: usize,
}

fn one() -> usize {
    1
}

impl Architecture {
    pub fn new(obs_dim: usize, hidden: Vec<usize>, activation: Activation) -> Self {
        Self { obs_dim, hidden, activation, heads: 1 }
    }

    fn sizes(&self, out: usize) -> Vec<usize> {
        let mut s = vec![self.obs_dim];
        s.extend(&self.hidden);
        s.push(out);
        s
    }

    pub fn actor_layout(&self) -> MlpLayout {
        MlpLayout::new(&self.sizes(2 * self.heads), self.activation, 0)
    }

    pub fn critic_layout(&self) -> MlpLayout {
        let actor_len = self.actor_layout().len();
        MlpLayout::new(&self.sizes(1), self.activation, actor_len)
    }

    pub fn layout(&self) -> ParamLayout {
        ParamLayout { actor: self.actor_layout(), critic: self.critic_layout() }
    }

    pub fn param_count(&self) -> usize {
        let l = self.layout();
        l.actor.len() + l.critic.len()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParamLayout {
    pub actor: MlpLayout,
    pub critic: MlpLayout,
}

impl ParamLayout {
    pub fn actor_range(&self) -> std::ops::Range<usize> {
        0..self.actor.len()
    }

    pub fn critic_range(&self) -> std::ops::Range<usize> {
        self.critic.offset()..self.critic.offset() + self.critic.len()
    }
}

/// Actor parameters followed by critic parameters, in one flat vector.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    arch: Arc<Architecture>,
    layout: Arc<ParamLayout>,
    values: Vec<f64>,
}

impl ModelParams {
    pub fn zeros(arch: Architecture) -> Self {
        let layout = arch.layout();
        let n = layout.actor.len() + layout.critic.len();
        Self { arch: Arc::new(arch), layout: Arc::new(layout), values: vec![0.0; n] }
    }

    /// Seeded initialization; the actor's output layer is shrunk so the
    /// initial policy is close to uniform.
    pub fn init(arch: Architecture, seed: u64) -> Self {
        let mut p = Self::zeros(arch);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layout = Arc::clone(&p.layout);
        layout.actor.init(&mut p.values, 0.01, &mut rng);
        layout.critic.init(&mut p.values, 1.0, &mut rng);
        p
    }

    pub fn architecture(&self) -> &Architecture {
        &self.arch
    }

    pub fn layout(&self) -> &ParamLayout {
        &self.layout
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn flatten(&self) -> Vec<f64> {
        self.values.clone()
    }

    /// Same architecture, new values.
    pub fn unflatten(&self, values: Vec<f64>) -> Result<Self> {
        if values.len() != self.values.len() {
            return Err(Error::DimensionMismatch { expected: self.values.len(), actual: values.len() });
        }
        Ok(Self { arch: Arc::clone(&self.arch), layout: Arc::clone(&self.layout), values })
    }

    pub fn from_flat(arch: Architecture, values: Vec<f64>) -> Result<Self> {
        Self::zeros(arch).unflatten(values)
    }

    pub fn actor(&self) -> &[f64] {
        &self.values[self.layout.actor_range()]
    }

    pub fn critic(&self) -> &[f64] {
        &self.values[self.layout.critic_range()]
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub(crate) fn check_obs(&self, obs: &[f64]) -> Result<()> {
        if obs.len() != self.arch.obs_dim {
            return Err(Error::DimensionMismatch { expected: self.arch.obs_dim, actual: obs.len() });
        }
        Ok(())
    }
}
