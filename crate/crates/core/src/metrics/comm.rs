//! Analytic communication-cost ledger.
//!
//! Five components are tracked separately: (1) parameter uploads from the
//! agents to the server, (2) parameter downloads back to the agents, (3)
//! actions sent to the signals, (4) observations sent from the signals and
//! (5) per-vehicle reports sent to the signals. With a centralized controller
//! actions and observations are relayed through the server, so (3) and (4)
//! are paid twice.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CommCostModel {
    pub bytes_per_param: f64,
    pub obs_bytes: f64,
    pub action_bytes: f64,
    pub vehicle_report_bytes: f64,
}

impl Default for CommCostModel {
    fn default() -> Self {
        Self { bytes_per_param: 4.0, obs_bytes: 32.0, action_bytes: 4.0, vehicle_report_bytes: 16.0 }
    }
}

impl CommCostModel {
    pub fn validate(&self) -> Result<()> {
        let all = [self.bytes_per_param, self.obs_bytes, self.action_bytes, self.vehicle_report_bytes];
        if all.iter().all(|v| *v > 0.0 && v.is_finite()) {
            Ok(())
        } else {
            Err(Error::Config("communication byte constants must be positive".into()))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CommMethod {
    Federated,
    Centralized,
    Decentralized,
}

impl CommMethod {
    /// Cost category of a method name as used in configs.
    pub fn for_method(name: &str) -> Result<Self> {
        match name {
            "fedavg" | "cluster" | "fomo" => Ok(CommMethod::Federated),
            "centralized" => Ok(CommMethod::Centralized),
            "decentralized" | "none" | "fixed" | "actuated" => Ok(CommMethod::Decentralized),
            other => Err(Error::Config(format!("no communication model for method {other:?}"))),
        }
    }
}

/// Counters one episode contributes to the ledger.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunLog {
    pub steps: u64,
    pub agents: usize,
    pub vehicle_steps: u64,
    pub rounds: u64,
    /// Parameters per agent model.
    pub params: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct CommCost {
    pub upload: f64,
    pub download: f64,
    pub actions: f64,
    pub observations: f64,
    pub vehicles: f64,
}

impl CommCost {
    pub fn total(&self) -> f64 {
        self.upload + self.download + self.actions + self.observations + self.vehicles
    }
}

pub fn comm_cost(log: &RunLog, model: &CommCostModel, method: CommMethod) -> CommCost {
    let control = (log.steps * log.agents as u64) as f64;
    let relay = if method == CommMethod::Centralized { 2.0 } else { 1.0 };
    let params = if method == CommMethod::Federated {
        log.params as f64 * model.bytes_per_param * log.agents as f64 * log.rounds as f64
    } else {
        0.0
    };
    CommCost {
        upload: params,
        download: params,
        actions: relay * control * model.action_bytes,
        observations: relay * control * model.obs_bytes,
        vehicles: log.vehicle_steps as f64 * model.vehicle_report_bytes,
    }
}
