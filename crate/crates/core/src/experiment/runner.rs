//! Seeded experiment execution and artifact emission.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use log::info;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, RunMethod, Scenario};
use super::controllers::BaselineController;
use crate::agent::checkpoint::{self, CheckpointHeader};
use crate::agent::{ActionMode, Learner, ModelParams, TrainConfig, Transition};
use crate::error::{Error, Result};
use crate::federation::{RoundDiagnostics, Server, ServerConfig, Upload};
use crate::metrics::{comm_cost, mean_std, CommCost, CommMethod, EpisodeMetrics, RunLog};
use crate::sim::{local_reward, Network, Observation, SimState};

const STREAM_INIT: u64 = 1;
const STREAM_ACT: u64 = 2;
const STREAM_TRAIN_DEMAND: u64 = 3;
const STREAM_EVAL_DEMAND: u64 = 4;
const STREAM_CLUSTER: u64 = 5;

/// Independent sub-seed for a (run seed, purpose, index) triple.
pub fn derive_seed(seed: u64, stream: u64, index: u64) -> u64 {
    let mut z = seed
        .wrapping_mul(0x9E37_79B9_7F4A_7C15)
        .wrapping_add(stream.wrapping_mul(0xD1B5_4A32_D192_ED03))
        .wrapping_add(index.wrapping_mul(0x8CB9_2BA7_2F3D_8DD7));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// One line of `metrics.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub method: String,
    pub seed: u64,
    /// `train` or `eval`.
    pub phase: String,
    pub round: u32,
    pub episode: usize,
    pub travel_time: Option<f64>,
    pub waiting_time: Option<f64>,
    pub completed: usize,
    pub spawned: usize,
    pub mean_reward: f64,
    pub comm_upload: f64,
    pub comm_download: f64,
    pub comm_actions: f64,
    pub comm_observations: f64,
    pub comm_vehicles: f64,
    pub comm_total: f64,
}

/// One line of `rewards.csv`: mean training reward of one agent in one round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardRow {
    pub seed: u64,
    pub round: u32,
    pub agent: usize,
    pub mean_reward: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalPoint {
    pub round: u32,
    pub travel_time: Option<f64>,
    pub waiting_time: Option<f64>,
    pub mean_reward: f64,
    /// Per-episode communication cost, averaged over evaluation episodes.
    pub comm: CommCost,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedSummary {
    pub seed: u64,
    pub evaluations: Vec<EvalPoint>,
    /// Cluster labels of the last round, when the method clusters.
    pub final_labels: Option<Vec<usize>>,
}

impl SeedSummary {
    pub fn final_eval(&self) -> &EvalPoint {
        self.evaluations.last().expect("every run evaluates at least once")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    pub std: f64,
}

impl Stat {
    pub fn of(values: &[f64]) -> Self {
        let (mean, std) = mean_std(values);
        Self { mean, std }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub scenario: String,
    pub method: RunMethod,
    pub hyperparameters: String,
    pub agents: usize,
    pub params_per_agent: usize,
    pub rounds: u32,
    pub local_steps: usize,
    pub steps_per_episode: usize,
    pub travel_time: Stat,
    pub waiting_time: Stat,
    pub reward: Stat,
    pub comm_total: Stat,
    pub seeds: Vec<SeedSummary>,
}

/// Everything one seed produces.
#[derive(Debug, Clone)]
pub struct SeedOutput {
    pub metrics: Vec<MetricsRow>,
    pub rewards: Vec<RewardRow>,
    pub rounds: Vec<RoundDiagnostics>,
    pub summary: SeedSummary,
}

struct Context<'a> {
    cfg: &'a ExperimentConfig,
    scenario: Scenario,
    net: Arc<Network>,
    train: TrainConfig,
    seed: u64,
    comm_method: CommMethod,
    params: usize,
    checkpoint_dir: Option<PathBuf>,
}

impl Context<'_> {
    fn agents(&self) -> usize {
        self.net.intersections.len()
    }

    fn new_episode(&self, demand_seed: u64) -> Result<SimState> {
        let mut sim = SimState::new(Arc::clone(&self.net));
        let horizon = self.cfg.steps_per_episode as f64 * self.net.spec.dt;
        sim.schedule_demand(&self.scenario.demand, demand_seed, horizon)?;
        Ok(sim)
    }

    fn rounds_per_episode(&self) -> u64 {
        match self.comm_method {
            CommMethod::Federated => (self.cfg.steps_per_episode / self.cfg.local_steps) as u64,
            _ => 0,
        }
    }

    fn row(&self, phase: &str, round: u32, episode: usize, sim: &SimState, m: &EpisodeMetrics) -> MetricsRow {
        let log = RunLog {
            steps: sim.steps(),
            agents: self.agents(),
            vehicle_steps: sim.vehicle_steps(),
            rounds: self.rounds_per_episode(),
            params: self.params,
        };
        let c: CommCost = comm_cost(&log, &self.cfg.comm, self.comm_method);
        MetricsRow {
            method: self.cfg.method.name().into(),
            seed: self.seed,
            phase: phase.into(),
            round,
            episode,
            travel_time: m.mean_travel_time,
            waiting_time: m.mean_waiting_time,
            completed: m.completed,
            spawned: m.spawned,
            mean_reward: m.mean_reward(),
            comm_upload: c.upload,
            comm_download: c.download,
            comm_actions: c.actions,
            comm_observations: c.observations,
            comm_vehicles: c.vehicles,
            comm_total: c.total(),
        }
    }

    /// Greedy evaluation on the fixed evaluation demand of this seed.
    fn evaluate(&self, round: u32, policy: &dyn Fn(&SimState) -> Result<Vec<u8>>) -> Result<(Vec<MetricsRow>, EvalPoint)> {
        let mut rows = Vec::new();
        for e in 0..self.cfg.episodes {
            let mut sim = self.new_episode(derive_seed(self.seed, STREAM_EVAL_DEMAND, e as u64))?;
            let mut rewards = Vec::with_capacity(self.cfg.steps_per_episode);
            for _ in 0..self.cfg.steps_per_episode {
                let actions = policy(&sim)?;
                sim.step(&actions)?;
                rewards.push(mean_reward(&sim));
            }
            let m = EpisodeMetrics::from_sim(&sim, rewards);
            rows.push(self.row("eval", round, e, &sim, &m));
        }
        let avg = |f: &dyn Fn(&MetricsRow) -> Option<f64>| {
            let v: Vec<f64> = rows.iter().filter_map(f).collect();
            (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
        };
        let point = EvalPoint {
            round,
            travel_time: avg(&|r| r.travel_time),
            waiting_time: avg(&|r| r.waiting_time),
            mean_reward: avg(&|r| Some(r.mean_reward)).unwrap_or(0.0),
            comm: CommCost {
                upload: avg(&|r| Some(r.comm_upload)).unwrap_or(0.0),
                download: avg(&|r| Some(r.comm_download)).unwrap_or(0.0),
                actions: avg(&|r| Some(r.comm_actions)).unwrap_or(0.0),
                observations: avg(&|r| Some(r.comm_observations)).unwrap_or(0.0),
                vehicles: avg(&|r| Some(r.comm_vehicles)).unwrap_or(0.0),
            },
        };
        Ok((rows, point))
    }

    fn is_eval_round(&self, round: u32) -> bool {
        round == 1 || round % self.cfg.eval_every == 0 || round == self.cfg.rounds
    }

    fn save_checkpoints(&self, round: u32, params: &[&ModelParams]) -> Result<()> {
        let Some(dir) = &self.checkpoint_dir else { return Ok(()) };
        for (agent, p) in params.iter().enumerate() {
            let path = checkpoint_path(dir, self.seed, round, agent);
            let header = CheckpointHeader { architecture: p.architecture().clone(), seed: self.seed, round, agent };
            checkpoint::save(&path, &header, p)?;
        }
        Ok(())
    }
}

pub fn checkpoint_path(run_dir: &Path, seed: u64, round: u32, agent: usize) -> PathBuf {
    run_dir.join("checkpoints").join(format!("seed_{seed}")).join(format!("round_{round}")).join(format!("agent_{agent}.ckpt"))
}

fn mean_reward(sim: &SimState) -> f64 {
    let obs = sim.observe_all();
    obs.iter().map(local_reward).sum::<f64>() / obs.len() as f64
}

fn greedy(params: &ModelParams, obs: &[f64]) -> Result<Vec<u8>> {
    Ok(params.action_probs(obs)?.into_iter().map(|p| u8::from(p[1] > p[0])).collect())
}

fn concat_obs(sim: &SimState) -> Vec<f64> {
    sim.observe_all().iter().flat_map(|o| o.to_vec()).collect()
}

fn with_context(e: Error, seed: u64, round: u32) -> Error {
    match e {
        Error::Divergence(m) => Error::Divergence(format!("seed {seed}, round {round}: {m}")),
        other => other,
    }
}

/// Train and evaluate one seed; checkpoints go under `run_dir` when given.
pub fn run_seed(cfg: &ExperimentConfig, seed: u64, run_dir: Option<&Path>) -> Result<SeedOutput> {
    cfg.validate()?;
    let scenario = cfg.scenario()?;
    let net = Arc::new(Network::build(&scenario.network)?);
    let n = net.intersections.len();
    let params = match cfg.method {
        RunMethod::Centralized => cfg.central_architecture(n).param_count(),
        _ => cfg.local_architecture().param_count(),
    };
    let ctx = Context {
        cfg,
        scenario,
        net,
        train: cfg.train_config()?,
        seed,
        comm_method: CommMethod::for_method(cfg.method.name())?,
        params,
        checkpoint_dir: run_dir.filter(|_| cfg.checkpoints).map(Path::to_path_buf),
    };
    match cfg.method {
        RunMethod::Fixed | RunMethod::Actuated => run_baseline(&ctx),
        RunMethod::Centralized => run_centralized(&ctx),
        _ => run_federated(&ctx),
    }
}

fn run_baseline(ctx: &Context) -> Result<SeedOutput> {
    let controller = match ctx.cfg.method {
        RunMethod::Fixed => BaselineController::Fixed { green: ctx.cfg.fixed_green },
        _ => BaselineController::Actuated { gap: ctx.cfg.actuated_gap },
    };
    let (metrics, point) = ctx.evaluate(0, &|sim| Ok(controller.actions(sim)))?;
    Ok(SeedOutput {
        metrics,
        rewards: Vec::new(),
        rounds: Vec::new(),
        summary: SeedSummary { seed: ctx.seed, evaluations: vec![point], final_labels: None },
    })
}

/// Training episodes of `steps_per_episode` steps, restarted with fresh
/// demand whenever one ends.
struct Schedule {
    sim: SimState,
    episode: usize,
    rewards: Vec<f64>,
}

struct Stepped {
    /// Observations right after the step (before any episode restart).
    next: Vec<Observation>,
    /// Train row of the episode that just ended, if any.
    finished: Option<MetricsRow>,
}

impl Schedule {
    fn start(ctx: &Context) -> Result<Self> {
        Ok(Self { sim: ctx.new_episode(derive_seed(ctx.seed, STREAM_TRAIN_DEMAND, 0))?, episode: 0, rewards: Vec::new() })
    }

    fn step(&mut self, ctx: &Context, round: u32, actions: &[u8]) -> Result<Stepped> {
        self.sim.step(actions)?;
        let next = self.sim.observe_all();
        self.rewards.push(next.iter().map(local_reward).sum::<f64>() / next.len() as f64);
        let mut finished = None;
        if self.sim.steps() as usize == ctx.cfg.steps_per_episode {
            let m = EpisodeMetrics::from_sim(&self.sim, std::mem::take(&mut self.rewards));
            finished = Some(ctx.row("train", round, self.episode, &self.sim, &m));
            self.episode += 1;
            self.sim = ctx.new_episode(derive_seed(ctx.seed, STREAM_TRAIN_DEMAND, self.episode as u64))?;
        }
        Ok(Stepped { next, finished })
    }
}

fn run_federated(ctx: &Context) -> Result<SeedOutput> {
    let cfg = ctx.cfg;
    let n = ctx.agents();
    let method = cfg.method.federation().expect("federated method");
    let init = ModelParams::init(cfg.local_architecture(), derive_seed(ctx.seed, STREAM_INIT, 0));
    let mut learners: Vec<Learner> = (0..n)
        .map(|a| Learner::new(init.clone(), ctx.train.clone(), derive_seed(ctx.seed, STREAM_ACT, a as u64)))
        .collect();
    let server_cfg = ServerConfig {
        method,
        clusters: cfg.clusters,
        alpha: cfg.alpha,
        loss: ctx.train.loss_config(),
        seed: derive_seed(ctx.seed, STREAM_CLUSTER, 0),
    };
    let mut server = Server::new(server_cfg, vec![init; n]);
    let mut out = SeedOutput {
        metrics: Vec::new(),
        rewards: Vec::new(),
        rounds: Vec::new(),
        summary: SeedSummary { seed: ctx.seed, evaluations: Vec::new(), final_labels: None },
    };
    let mut schedule = Schedule::start(ctx)?;
    for round in 1..=cfg.rounds {
        for _ in 0..cfg.local_steps {
            let obs: Vec<Vec<f64>> = schedule.sim.observe_all().iter().map(|o| o.to_vec()).collect();
            let actions = learners
                .iter_mut()
                .zip(&obs)
                .map(|(l, o)| Ok(l.act(o, ActionMode::Sample)?[0]))
                .collect::<Result<Vec<u8>>>()?;
            let Stepped { next, finished } = schedule.step(ctx, round, &actions)?;
            for (a, l) in learners.iter_mut().enumerate() {
                l.push(Transition {
                    obs: obs[a].clone(),
                    action: vec![actions[a]],
                    reward: local_reward(&next[a]),
                    next_obs: next[a].to_vec(),
                });
            }
            out.metrics.extend(finished);
        }
        let trained = learners
            .par_iter_mut()
            .map(|l| l.train_round())
            .collect::<Result<Vec<_>>>()
            .map_err(|e| with_context(e, ctx.seed, round))?;
        let uploads: Vec<Upload> = trained
            .into_iter()
            .enumerate()
            .map(|(agent, (traj, loss))| {
                out.rewards.push(RewardRow { seed: ctx.seed, round, agent, mean_reward: traj.mean_reward() });
                Upload { agent, params: learners[agent].params.clone(), trajectory: Arc::new(traj), loss }
            })
            .collect();
        let mut outcome = server.run_round(round, &uploads)?;
        for (l, p) in learners.iter_mut().zip(outcome.params.drain(..)) {
            l.set_params(p);
        }
        outcome.diagnostics.seed = ctx.seed;
        out.summary.final_labels = outcome.diagnostics.labels.clone();
        out.rounds.push(outcome.diagnostics);
        if ctx.is_eval_round(round) {
            let models: Vec<&ModelParams> = learners.iter().map(|l| &l.params).collect();
            ctx.save_checkpoints(round, &models)?;
            let policy = |sim: &SimState| -> Result<Vec<u8>> {
                sim.observe_all().iter().zip(&models).map(|(o, p)| Ok(greedy(p, &o.to_vec())?[0])).collect()
            };
            let (rows, point) = ctx.evaluate(round, &policy)?;
            info!(
                "seed {} round {round}: eval reward {:.4}, travel time {:?}",
                ctx.seed, point.mean_reward, point.travel_time
            );
            out.metrics.extend(rows);
            out.summary.evaluations.push(point);
        }
    }
    Ok(out)
}

fn run_centralized(ctx: &Context) -> Result<SeedOutput> {
    let cfg = ctx.cfg;
    let n = ctx.agents();
    let init = ModelParams::init(cfg.central_architecture(n), derive_seed(ctx.seed, STREAM_INIT, 0));
    let mut learner = Learner::new(init, ctx.train.clone(), derive_seed(ctx.seed, STREAM_ACT, 0));
    let mut out = SeedOutput {
        metrics: Vec::new(),
        rewards: Vec::new(),
        rounds: Vec::new(),
        summary: SeedSummary { seed: ctx.seed, evaluations: Vec::new(), final_labels: None },
    };
    let mut schedule = Schedule::start(ctx)?;
    for round in 1..=cfg.rounds {
        for _ in 0..cfg.local_steps {
            let obs = concat_obs(&schedule.sim);
            let actions = learner.act(&obs, ActionMode::Sample)?;
            let Stepped { next, finished } = schedule.step(ctx, round, &actions)?;
            let reward = next.iter().map(local_reward).sum::<f64>() / n as f64;
            let next_obs = next.iter().flat_map(|o| o.to_vec()).collect();
            learner.push(Transition { obs, action: actions, reward, next_obs });
            out.metrics.extend(finished);
        }
        let (traj, _) = learner.train_round().map_err(|e| with_context(e, ctx.seed, round))?;
        out.rewards.push(RewardRow { seed: ctx.seed, round, agent: 0, mean_reward: traj.mean_reward() });
        if ctx.is_eval_round(round) {
            ctx.save_checkpoints(round, &[&learner.params])?;
            let p = &learner.params;
            let (rows, point) = ctx.evaluate(round, &|sim: &SimState| greedy(p, &concat_obs(sim)))?;
            out.metrics.extend(rows);
            out.summary.evaluations.push(point);
        }
    }
    Ok(out)
}
