use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::cluster::cluster_aggregate;
use super::fedavg::fedavg_aggregate;
use super::fomo::{fomo_importance, fomo_update};
use super::kmeans::{kmeans_cluster, standardize};
use crate::agent::{scalar_loss, LossConfig, ModelParams, Trajectory};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    FedAvg,
    Cluster,
    Fomo,
    /// No aggregation: every agent keeps its own model.
    None,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::FedAvg => "fedavg",
            Method::Cluster => "cluster",
            Method::Fomo => "fomo",
            Method::None => "none",
        }
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fedavg" => Ok(Method::FedAvg),
            "cluster" => Ok(Method::Cluster),
            "fomo" => Ok(Method::Fomo),
            "none" | "decentralized" => Ok(Method::None),
            other => Err(Error::Config(format!("unknown federation method {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ServerConfig {
    pub method: Method,
    /// Cluster count for [`Method::Cluster`].
    pub clusters: usize,
    /// Step scale of the importance scores for [`Method::Fomo`].
    pub alpha: f64,
    pub loss: LossConfig,
    pub seed: u64,
}

impl ServerConfig {
    pub fn new(method: Method) -> Self {
        Self { method, clusters: 4, alpha: 1.0, loss: LossConfig::default(), seed: 0 }
    }
}

/// What one agent sends at the end of a round.
#[derive(Debug, Clone)]
pub struct Upload {
    pub agent: usize,
    pub params: ModelParams,
    /// The agent's latest local trajectory, used to score candidate models.
    pub trajectory: Arc<Trajectory>,
    pub loss: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormSummary {
    pub min: f64,
    pub mean: f64,
    pub max: f64,
}

impl NormSummary {
    pub fn of<'a>(params: impl IntoIterator<Item = &'a ModelParams>) -> Self {
        let norms: Vec<f64> = params.into_iter().map(ModelParams::norm).collect();
        let n = norms.len().max(1) as f64;
        Self {
            min: norms.iter().copied().fold(f64::INFINITY, f64::min),
            mean: norms.iter().sum::<f64>() / n,
            max: norms.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        }
    }
}

/// One line of `rounds.jsonl`. Per-agent vectors are indexed by agent id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundDiagnostics {
    pub seed: u64,
    pub round: u32,
    pub method: Method,
    pub agents: usize,
    pub losses: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wcss: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub importance: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub raw_importance: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fallback: Option<Vec<bool>>,
    pub upload_norms: NormSummary,
    pub output_norms: NormSummary,
}

#[derive(Debug, Clone)]
pub struct RoundOutcome {
    /// New parameters, in the order of the uploads passed in.
    pub params: Vec<ModelParams>,
    pub diagnostics: RoundDiagnostics,
}

/// All uploads of one synchronous round together with the models the agents
/// started the round from (indexed by agent id).
#[derive(Debug, Clone, Copy)]
pub struct FederationRound<'a> {
    pub round: u32,
    pub uploads: &'a [Upload],
    pub previous: &'a [ModelParams],
}

fn by_agent<'a>(round: &FederationRound<'a>) -> Result<Vec<&'a Upload>> {
    let n = round.previous.len();
    let mut slots: Vec<Option<&Upload>> = vec![None; n];
    for u in round.uploads {
        if u.agent >= n {
            return Err(Error::InvalidArgument(format!("upload from unknown agent {}", u.agent)));
        }
        if slots[u.agent].replace(u).is_some() {
            return Err(Error::InvalidArgument(format!("agent {} uploaded twice", u.agent)));
        }
    }
    slots.into_iter().enumerate().map(|(i, s)| s.ok_or(Error::MissingUpload(i))).collect()
}

/// Aggregate one round. Results depend on agent ids, not on upload order.
pub fn run_round(cfg: &ServerConfig, round: &FederationRound) -> Result<RoundOutcome> {
    let ups = by_agent(round)?;
    let n = ups.len();
    if n == 0 {
        return Err(Error::Empty("uploads"));
    }
    let params: Vec<&ModelParams> = ups.iter().map(|u| &u.params).collect();
    let mut diag = RoundDiagnostics {
        seed: 0,
        round: round.round,
        method: cfg.method,
        agents: n,
        losses: ups.iter().map(|u| u.loss).collect(),
        labels: None,
        wcss: None,
        importance: None,
        raw_importance: None,
        fallback: None,
        upload_norms: NormSummary::of(params.iter().copied()),
        output_norms: NormSummary { min: 0.0, mean: 0.0, max: 0.0 },
    };
    let out: Vec<ModelParams> = match cfg.method {
        Method::None => params.iter().map(|p| (*p).clone()).collect(),
        Method::FedAvg => {
            let mean = fedavg_aggregate(&params)?;
            vec![mean; n]
        }
        Method::Cluster => {
            let features = standardize(&params.iter().map(|p| p.flatten()).collect::<Vec<_>>());
            let k = cfg.clusters.min(n);
            let a = kmeans_cluster(&features, k, cfg.seed.wrapping_add(round.round as u64))?;
            let out = cluster_aggregate(&a, &params)?;
            diag.labels = Some(a.labels);
            diag.wcss = Some(a.wcss);
            out
        }
        Method::Fomo => {
            let cands: Vec<(usize, &ModelParams)> = params.iter().enumerate().map(|(i, p)| (i, *p)).collect();
            let rows = (0..n)
                .into_par_iter()
                .map(|a| {
                    let traj = &ups[a].trajectory.steps;
                    let row = fomo_importance(a, &cands, &round.previous[a], |w| scalar_loss(w, traj, &cfg.loss), cfg.alpha)?;
                    let updated = fomo_update(&round.previous[a], &params, &row.weights)?;
                    Ok((row, updated))
                })
                .collect::<Result<Vec<_>>>()?;
            let (rows, out): (Vec<_>, Vec<_>) = rows.into_iter().unzip();
            diag.fallback = Some(rows.iter().map(|r| r.fallback).collect());
            diag.raw_importance = Some(rows.iter().map(|r| r.raw.clone()).collect());
            diag.importance = Some(rows.into_iter().map(|r| r.weights).collect());
            out
        }
    };
    diag.output_norms = NormSummary::of(&out);
    let params = round.uploads.iter().map(|u| out[u.agent].clone()).collect();
    Ok(RoundOutcome { params, diagnostics: diag })
}

/// Stateful coordinator: remembers each agent's start-of-round model and
/// enforces increasing round indices.
#[derive(Debug, Clone)]
pub struct Server {
    pub config: ServerConfig,
    previous: Vec<ModelParams>,
    last_round: Option<u32>,
}

impl Server {
    /// `initial` holds the models the agents start the first round from.
    pub fn new(config: ServerConfig, initial: Vec<ModelParams>) -> Self {
        Self { config, previous: initial, last_round: None }
    }

    pub fn previous(&self) -> &[ModelParams] {
        &self.previous
    }

    pub fn run_round(&mut self, round: u32, uploads: &[Upload]) -> Result<RoundOutcome> {
        if let Some(last) = self.last_round {
            if round <= last {
                return Err(Error::InvalidArgument(format!("round {round} does not follow round {last}")));
            }
        }
        let outcome = run_round(&self.config, &FederationRound { round, uploads, previous: &self.previous })?;
        for (u, p) in uploads.iter().zip(&outcome.params) {
            self.previous[u.agent] = p.clone();
        }
        self.last_round = Some(round);
        Ok(outcome)
    }
}
