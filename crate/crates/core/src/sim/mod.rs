//! Seeded discrete-time queue-server simulator of signalized grid networks.
//!
//! Each directed link has one or more lanes. Vehicles move at the speed limit
//! until they reach the stop line or the back of the queue ahead (jam spacing),
//! and cross an intersection when their approach is green, at most at the
//! saturation flow rate and only if the downstream lane has room. Every
//! intersection runs the fixed cycle NS-green, NS-yellow, EW-green, EW-yellow;
//! agents only decide when a green phase ends.

pub mod demand;
pub mod network;
pub mod observe;
pub mod signal;
pub mod state;

pub use demand::{DemandSpec, Spawn, TurnRatios};
pub use network::{Heading, Network, NetworkSpec, RoadClass, SignalTiming};
pub use observe::{local_reward, Observation, OBS_DIM};
pub use signal::{Light, Phase, PhaseChange, SignalState};
pub use state::{CompletedTrip, SimState, StepReport, Vehicle, VehicleId, HALT_SPEED};
