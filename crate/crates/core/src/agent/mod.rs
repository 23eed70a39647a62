//! Per-intersection advantage actor-critic agents.

pub mod advantage;
pub mod checkpoint;
pub mod loss;
pub mod nn;
pub mod params;
pub mod policy;
pub mod train;

pub use advantage::{compute_advantages, AdvantageEstimate, Trajectory, Transition};
pub use loss::{scalar_loss, scalar_loss_and_grad, LossConfig};
pub use nn::Activation;
pub use params::{Architecture, ModelParams};
pub use policy::{forward_actor, forward_critic, sample_action, ActionMode};
pub use train::{local_train, Environment, Learner, LocalTrainOutput, OptimizerKind, TrainConfig};
