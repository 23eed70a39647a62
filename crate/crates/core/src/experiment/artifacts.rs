//! Whole-run orchestration, output files and cross-run comparison.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, RunMethod};
use super::runner::{run_seed, RunSummary, SeedOutput, Stat};
use crate::error::{Error, Result};
use crate::metrics::line_chart_svg;

pub const METRICS_FILE: &str = "metrics.csv";
pub const REWARDS_FILE: &str = "rewards.csv";
pub const ROUNDS_FILE: &str = "rounds.jsonl";
pub const SUMMARY_FILE: &str = "summary.json";
pub const CONFIG_FILE: &str = "config.toml";

fn write_csv<T: Serialize>(path: &Path, rows: &[T], header: &[&str]) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(!rows.is_empty()).from_path(path)?;
    if rows.is_empty() {
        w.write_record(header)?;
    }
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Run every seed of `cfg` and write all artifacts into `cfg.output`.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunSummary> {
    cfg.validate()?;
    let dir = &cfg.output;
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join(CONFIG_FILE), cfg.to_toml()?)?;
    let train = cfg.train_config()?;
    info!(
        "{} on {} with the {:?} hyperparameters: lr {}, gamma {}, K {}, optimizer {:?}",
        cfg.method, cfg.scenario, cfg.hyperparameters, train.learning_rate, train.gamma, train.horizon, train.optimizer
    );
    let outputs: Vec<SeedOutput> = cfg.seeds.par_iter().map(|&s| run_seed(cfg, s, Some(dir))).collect::<Result<_>>()?;

    let metrics: Vec<_> = outputs.iter().flat_map(|o| o.metrics.iter().cloned()).collect();
    write_csv(&dir.join(METRICS_FILE), &metrics, &[])?;
    if cfg.method.is_learned() {
        let rewards: Vec<_> = outputs.iter().flat_map(|o| o.rewards.iter().cloned()).collect();
        write_csv(&dir.join(REWARDS_FILE), &rewards, &["seed", "round", "agent", "mean_reward"])?;
    }
    if outputs.iter().any(|o| !o.rounds.is_empty()) {
        let mut w = BufWriter::new(File::create(dir.join(ROUNDS_FILE))?);
        for d in outputs.iter().flat_map(|o| &o.rounds) {
            serde_json::to_writer(&mut w, d)?;
            w.write_all(b"\n")?;
        }
        w.flush()?;
    }

    let summary = summarize(cfg, &outputs)?;
    std::fs::write(dir.join(SUMMARY_FILE), serde_json::to_string_pretty(&summary)?)?;
    if cfg.method.is_learned() {
        std::fs::write(dir.join("reward_curve.svg"), reward_chart(&outputs))?;
    }
    Ok(summary)
}

fn summarize(cfg: &ExperimentConfig, outputs: &[SeedOutput]) -> Result<RunSummary> {
    let scenario = cfg.scenario()?;
    let agents = scenario.network.rows * scenario.network.cols;
    let finals: Vec<_> = outputs.iter().map(|o| o.summary.final_eval()).collect();
    let collect = |f: &dyn Fn(&super::runner::EvalPoint) -> Option<f64>| Stat::of(&finals.iter().filter_map(|p| f(p)).collect::<Vec<_>>());
    Ok(RunSummary {
        scenario: cfg.scenario.clone(),
        method: cfg.method,
        hyperparameters: cfg.hyperparameters.clone(),
        agents,
        params_per_agent: match cfg.method {
            RunMethod::Centralized => cfg.central_architecture(agents).param_count(),
            _ => cfg.local_architecture().param_count(),
        },
        rounds: if cfg.method.is_learned() { cfg.rounds } else { 0 },
        local_steps: cfg.local_steps,
        steps_per_episode: cfg.steps_per_episode,
        travel_time: collect(&|p| p.travel_time),
        waiting_time: collect(&|p| p.waiting_time),
        reward: collect(&|p| Some(p.mean_reward)),
        comm_total: collect(&|p| Some(p.comm.total())),
        seeds: outputs.iter().map(|o| o.summary.clone()).collect(),
    })
}

fn reward_chart(outputs: &[SeedOutput]) -> String {
    let mut series = Vec::new();
    for o in outputs {
        let mut per_round: BTreeMap<u32, (f64, usize)> = BTreeMap::new();
        for r in &o.rewards {
            let e = per_round.entry(r.round).or_default();
            e.0 += r.mean_reward;
            e.1 += 1;
        }
        let train = per_round.into_iter().map(|(k, (s, c))| (k as f64, s / c as f64)).collect();
        series.push((format!("train seed {}", o.summary.seed), train));
        let eval = o.summary.evaluations.iter().map(|p| (p.round as f64, p.mean_reward)).collect();
        series.push((format!("eval seed {}", o.summary.seed), eval));
    }
    line_chart_svg("Mean reward per round", "round", "reward", &series)
}

pub fn load_summary(dir: &Path) -> Result<RunSummary> {
    Ok(serde_json::from_str(&std::fs::read_to_string(dir.join(SUMMARY_FILE))?)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareRow {
    pub method: RunMethod,
    pub runs: Vec<PathBuf>,
    pub seeds: usize,
    pub travel_time: Stat,
    pub waiting_time: Stat,
    pub comm_upload: Stat,
    pub comm_download: Stat,
    pub comm_actions: Stat,
    pub comm_observations: Stat,
    pub comm_vehicles: Stat,
    pub comm_total: Stat,
    /// 1 is the lowest mean travel time.
    pub rank: usize,
    /// Set for learned methods whose mean travel time is not below fixed time.
    pub not_better_than_fixed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub scenario: String,
    pub rows: Vec<CompareRow>,
}

/// Per-method statistics of the final evaluations of several runs.
pub fn compare(dirs: &[PathBuf]) -> Result<Comparison> {
    if dirs.len() < 2 {
        return Err(Error::InvalidArgument("compare needs at least two run directories".into()));
    }
    let summaries = dirs.iter().map(|d| load_summary(d)).collect::<Result<Vec<_>>>()?;
    let scenario = summaries[0].scenario.clone();
    if let Some(other) = summaries.iter().find(|s| s.scenario != scenario) {
        return Err(Error::ScenarioMismatch(scenario, other.scenario.clone()));
    }
    let mut groups: BTreeMap<&'static str, (RunMethod, Vec<PathBuf>, Vec<&super::runner::EvalPoint>)> = BTreeMap::new();
    for (dir, s) in dirs.iter().zip(&summaries) {
        let g = groups.entry(s.method.name()).or_insert_with(|| (s.method, Vec::new(), Vec::new()));
        g.1.push(dir.clone());
        g.2.extend(s.seeds.iter().map(|x| x.final_eval()));
    }
    let mut rows: Vec<CompareRow> = groups
        .into_values()
        .map(|(method, runs, points)| {
            let st = |f: &dyn Fn(&super::runner::EvalPoint) -> Option<f64>| Stat::of(&points.iter().filter_map(|p| f(p)).collect::<Vec<_>>());
            CompareRow {
                method,
                runs,
                seeds: points.len(),
                travel_time: st(&|p| p.travel_time),
                waiting_time: st(&|p| p.waiting_time),
                comm_upload: st(&|p| Some(p.comm.upload)),
                comm_download: st(&|p| Some(p.comm.download)),
                comm_actions: st(&|p| Some(p.comm.actions)),
                comm_observations: st(&|p| Some(p.comm.observations)),
                comm_vehicles: st(&|p| Some(p.comm.vehicles)),
                comm_total: st(&|p| Some(p.comm.total())),
                rank: 0,
                not_better_than_fixed: false,
            }
        })
        .collect();
    rows.sort_by(|a, b| a.travel_time.mean.total_cmp(&b.travel_time.mean).then(a.method.name().cmp(b.method.name())));
    for (i, r) in rows.iter_mut().enumerate() {
        r.rank = i + 1;
    }
    if let Some(fixed) = rows.iter().find(|r| r.method == RunMethod::Fixed).map(|r| r.travel_time.mean) {
        for r in rows.iter_mut().filter(|r| r.method.is_learned()) {
            r.not_better_than_fixed = !(r.travel_time.mean < fixed);
            if r.not_better_than_fixed {
                warn!("{} does not beat fixed-time control ({:.2} s vs {:.2} s)", r.method, r.travel_time.mean, fixed);
            }
        }
    }
    Ok(Comparison { scenario, rows })
}

impl std::fmt::Display for Comparison {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "scenario: {}", self.scenario)?;
        writeln!(f, "{:<4} {:<14} {:>5} {:>20} {:>20} {:>24}", "rank", "method", "seeds", "travel time (s)", "waiting time (s)", "comm (bytes/episode)")?;
        for r in &self.rows {
            let pm = |s: &Stat| format!("{:.2} ± {:.2}", s.mean, s.std);
            writeln!(
                f,
                "{:<4} {:<14} {:>5} {:>20} {:>20} {:>24}{}",
                r.rank,
                r.method.name(),
                r.seeds,
                pm(&r.travel_time),
                pm(&r.waiting_time),
                format!("{:.0} ± {:.0}", r.comm_total.mean, r.comm_total.std),
                if r.not_better_than_fixed { "  (not better than fixed)" } else { "" }
            )?;
        }
        Ok(())
    }
}
