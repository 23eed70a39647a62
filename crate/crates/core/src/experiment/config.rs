//! Experiment configuration (TOML) and scenario presets.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::agent::{Activation, Architecture, TrainConfig};
use crate::error::{Error, Result};
use crate::federation::Method;
use crate::metrics::CommCostModel;
use crate::sim::{DemandSpec, NetworkSpec, TurnRatios, OBS_DIM};

/// Control strategy of a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunMethod {
    FedAvg,
    Cluster,
    Fomo,
    Decentralized,
    Centralized,
    Fixed,
    Actuated,
}

impl RunMethod {
    pub const ALL: [RunMethod; 7] = [
        RunMethod::FedAvg,
        RunMethod::Cluster,
        RunMethod::Fomo,
        RunMethod::Decentralized,
        RunMethod::Centralized,
        RunMethod::Fixed,
        RunMethod::Actuated,
    ];

    pub fn name(self) -> &'static str {
        match self {
            RunMethod::FedAvg => "fedavg",
            RunMethod::Cluster => "cluster",
            RunMethod::Fomo => "fomo",
            RunMethod::Decentralized => "decentralized",
            RunMethod::Centralized => "centralized",
            RunMethod::Fixed => "fixed",
            RunMethod::Actuated => "actuated",
        }
    }

    /// Server aggregation for per-intersection learners; `None` otherwise.
    pub fn federation(self) -> Option<Method> {
        match self {
            RunMethod::FedAvg => Some(Method::FedAvg),
            RunMethod::Cluster => Some(Method::Cluster),
            RunMethod::Fomo => Some(Method::Fomo),
            RunMethod::Decentralized => Some(Method::None),
            _ => None,
        }
    }

    pub fn is_learned(self) -> bool {
        !matches!(self, RunMethod::Fixed | RunMethod::Actuated)
    }
}

impl std::str::FromStr for RunMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        RunMethod::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown method {s:?}")))
    }
}

impl std::fmt::Display for RunMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// A network together with its traffic demand.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub name: String,
    pub network: NetworkSpec,
    pub demand: DemandSpec,
}

pub const SCENARIOS: [&str; 11] = [
    "single",
    "grid3x3",
    "grid3x3-heavy",
    "grid5x5",
    "grid5x5-heavy",
    "sensitivity1",
    "sensitivity2",
    "sensitivity3",
    "sensitivity4",
    "hetero",
    "urban3x3",
];

/// Corner-intersection entry names of a 3x3 grid (row 0 is the north edge).
fn corner_entries(name: &str) -> Vec<String> {
    let sides: &[&str] = match name {
        "A0" => &["N", "W"],
        "C0" => &["N", "E"],
        "A2" => &["S", "W"],
        "C2" => &["S", "E"],
        "B0" => &["N"],
        "B2" => &["S"],
        _ => &[],
    };
    sides.iter().map(|s| format!("{name}-{s}")).collect()
}

fn doubled(intersections: &[&str]) -> DemandSpec {
    let mut d = DemandSpec::uniform(300.0);
    for i in intersections {
        for e in corner_entries(i) {
            d = d.with_multiplier(&e, 2.0);
        }
    }
    d
}

impl Scenario {
    pub fn preset(name: &str) -> Result<Self> {
        let (network, demand) = match name {
            "single" => (NetworkSpec::uniform(1, 1), DemandSpec::uniform(200.0)),
            "grid3x3" => (NetworkSpec::grid3x3(), DemandSpec::uniform(200.0)),
            "grid3x3-heavy" => (NetworkSpec::grid3x3(), DemandSpec::uniform(400.0)),
            "grid5x5" => (NetworkSpec::grid5x5(), DemandSpec::uniform(200.0)),
            "grid5x5-heavy" => (NetworkSpec::grid5x5(), DemandSpec::uniform(400.0)),
            "sensitivity1" => (NetworkSpec::grid3x3(), doubled(&[])),
            "sensitivity2" => (NetworkSpec::grid3x3(), doubled(&["A0", "C0"])),
            "sensitivity3" => (NetworkSpec::grid3x3(), doubled(&["A0", "C2"])),
            "sensitivity4" => (NetworkSpec::grid3x3(), doubled(&["B0", "B2"])),
            "hetero" => (
                NetworkSpec::grid3x3(),
                DemandSpec::uniform(200.0).with_multiplier("A0-W", 4.0).with_multiplier("C2-E", 4.0),
            ),
            "urban3x3" => {
                let mut d = DemandSpec::uniform(200.0);
                d.turn_ratios = TurnRatios::URBAN;
                (NetworkSpec::grid3x3(), d)
            }
            other => {
                return Err(Error::Config(format!("unknown scenario {other:?}; known: {}", SCENARIOS.join(", "))));
            }
        };
        Ok(Self { name: name.to_string(), network, demand })
    }
}

/// Optional per-field overrides of a hyperparameter preset.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainOverrides {
    pub learning_rate: Option<f64>,
    pub gamma: Option<f64>,
    pub horizon: Option<usize>,
    pub rollout_len: Option<usize>,
    pub batch_size: Option<usize>,
    pub minibatch_size: Option<usize>,
    pub epochs: Option<usize>,
    pub value_coef: Option<f64>,
    pub entropy_coef: Option<f64>,
    pub optimizer: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub scenario: String,
    pub method: RunMethod,
    /// Evaluation episodes per evaluation point (and for baseline controllers).
    pub episodes: usize,
    pub steps_per_episode: usize,
    /// Local steps per communication round.
    pub local_steps: usize,
    /// Global communication rounds.
    pub rounds: u32,
    /// `table`, `prose` or `desk`.
    pub hyperparameters: String,
    pub train: TrainOverrides,
    pub hidden: Vec<usize>,
    pub activation: Activation,
    pub clusters: usize,
    pub alpha: f64,
    pub seeds: Vec<u64>,
    pub output: PathBuf,
    /// Greedy evaluation every this many rounds (plus the first and last).
    pub eval_every: u32,
    /// Save agent checkpoints at evaluation rounds.
    pub checkpoints: bool,
    /// Overrides the scenario's per-lane inflow.
    pub inflow: Option<f64>,
    /// Extra per-entry demand factors on top of the scenario's.
    pub demand_multipliers: BTreeMap<String, f64>,
    pub fixed_green: f64,
    pub actuated_gap: f64,
    pub comm: CommCostModel,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            scenario: "grid3x3".into(),
            method: RunMethod::FedAvg,
            episodes: 1,
            steps_per_episode: 720,
            local_steps: 240,
            rounds: 40,
            hyperparameters: "table".into(),
            train: TrainOverrides::default(),
            hidden: vec![16, 16],
            activation: Activation::Tanh,
            clusters: 4,
            alpha: 1.0,
            seeds: vec![0],
            output: PathBuf::from("runs/default"),
            eval_every: 5,
            checkpoints: true,
            inflow: None,
            demand_multipliers: BTreeMap::new(),
            fixed_green: 42.0,
            actuated_gap: 3.0,
            comm: CommCostModel::default(),
        }
    }
}

impl ExperimentConfig {
    /// Desk-scale preset with the tuned hyperparameters.
    pub fn desk(scenario: &str, method: RunMethod) -> Self {
        Self { scenario: scenario.into(), method, hyperparameters: "desk".into(), ..Self::default() }
    }

    /// Episode length, round count and network width of the original study.
    pub fn paper_scale(scenario: &str, method: RunMethod) -> Self {
        Self {
            scenario: scenario.into(),
            method,
            steps_per_episode: 1000,
            local_steps: 1000,
            rounds: 100,
            hidden: vec![256, 256],
            activation: Activation::Relu,
            ..Self::default()
        }
    }

    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "desk" => Ok(Self::desk("grid3x3", RunMethod::FedAvg)),
            "paper-scale" => Ok(Self::paper_scale("grid3x3", RunMethod::FedAvg)),
            "paper-arch" => Ok(Self { hidden: vec![256, 256], activation: Activation::Relu, ..Self::default() }),
            other => Err(Error::Config(format!("unknown experiment preset {other:?}"))),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.episodes == 0 {
            return bad("episodes must be at least 1".into());
        }
        if self.steps_per_episode == 0 || self.local_steps == 0 {
            return bad("steps_per_episode and local_steps must be positive".into());
        }
        if self.method.is_learned() && self.steps_per_episode % self.local_steps != 0 {
            return bad(format!(
                "local_steps ({}) must divide steps_per_episode ({})",
                self.local_steps, self.steps_per_episode
            ));
        }
        if self.method.is_learned() && self.rounds == 0 {
            return bad("rounds must be at least 1".into());
        }
        if self.seeds.is_empty() {
            return bad("at least one seed is required".into());
        }
        if self.method == RunMethod::Cluster && self.clusters == 0 {
            return bad("clusters must be at least 1".into());
        }
        if self.method == RunMethod::Fomo && !(self.alpha > 0.0) {
            return bad("alpha must be positive".into());
        }
        if self.eval_every == 0 {
            return bad("eval_every must be at least 1".into());
        }
        if !(self.fixed_green > 0.0) || !(self.actuated_gap > 0.0) {
            return bad("fixed_green and actuated_gap must be positive".into());
        }
        if self.hidden.is_empty() || self.hidden.contains(&0) {
            return bad("hidden layer sizes must be positive".into());
        }
        self.comm.validate()?;
        self.train_config()?;
        let s = self.scenario()?;
        crate::sim::Network::build(&s.network).and_then(|n| s.demand.validate(&n))?;
        Ok(())
    }

    pub fn train_config(&self) -> Result<TrainConfig> {
        let mut t = TrainConfig::preset(&self.hyperparameters)?;
        let o = &self.train;
        macro_rules! set {
            ($($f:ident),*) => { $( if let Some(v) = o.$f { t.$f = v; } )* };
        }
        set!(learning_rate, gamma, horizon, rollout_len, batch_size, minibatch_size, epochs, value_coef, entropy_coef);
        if let Some(opt) = &o.optimizer {
            t.optimizer = match opt.as_str() {
                "sgd" => crate::agent::OptimizerKind::Sgd,
                "adam" => crate::agent::OptimizerKind::adam(),
                other => return Err(Error::Config(format!("unknown optimizer {other:?}"))),
            };
        }
        t.validate()?;
        Ok(t)
    }

    /// Scenario preset with the config's demand overrides applied.
    pub fn scenario(&self) -> Result<Scenario> {
        let mut s = Scenario::preset(&self.scenario)?;
        if let Some(inflow) = self.inflow {
            s.demand.inflow_per_lane = inflow;
        }
        for (k, v) in &self.demand_multipliers {
            s.demand.demand_multipliers.insert(k.clone(), *v);
        }
        Ok(s)
    }

    /// Per-intersection agent architecture.
    pub fn local_architecture(&self) -> Architecture {
        Architecture::new(OBS_DIM, self.hidden.clone(), self.activation)
    }

    /// One network over all observations with one head per intersection.
    pub fn central_architecture(&self, intersections: usize) -> Architecture {
        Architecture { heads: intersections, ..Architecture::new(OBS_DIM * intersections, self.hidden.clone(), self.activation) }
    }
}
