//! Hierarchical federated actor-critic learning for adaptive traffic signal
//! control on grid networks.
//!
//! The crate is split along the lines of the system it models:
//!
//! * [`sim`] is a seeded, discrete-time queue-server simulator of signalized
//!   grid networks. It plays the role of the multi-agent environment.
//! * [`agent`] holds the per-intersection advantage actor-critic learner:
//!   networks with analytic gradients, K-step advantages and local updates.
//! * [`federation`] implements the server side: FedAvg, k-means clustered
//!   averaging and first-order personalized model weighting.
//! * [`metrics`] computes travel time, waiting time and the communication
//!   cost ledger.
//! * [`analysis`] offers post-hoc tooling over trained parameters and round
//!   logs (similarity matrices, dendrograms, top-k neighbours).
//! * [`experiment`] ties everything together into reproducible runs.

pub mod agent;
pub mod analysis;
pub mod error;
pub mod experiment;
pub mod federation;
pub mod metrics;
pub mod sim;

pub use error::{Error, Result};
