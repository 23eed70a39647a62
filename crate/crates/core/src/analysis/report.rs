//! `analyze` command: per-round similarity files, groupings and heatmaps.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::hierarchy::{hierarchical_cluster, Dendrogram};
use super::similarity::{importance_affinity, param_similarity, top_k_similar, Metric, SimilarityMatrix};
use super::snapshots::{read_rounds, snapshot_series};
use crate::agent::checkpoint;
use crate::error::{Error, Result};
use crate::experiment::{checkpoint_path, ExperimentConfig};
use crate::sim::Network;

#[derive(Debug, Clone)]
pub struct AnalyzeOptions {
    /// Rounds to analyze; all checkpointed rounds when `None`.
    pub rounds: Option<Vec<u32>>,
    pub top_k: usize,
    /// Seed to analyze; the first configured seed when `None`.
    pub seed: Option<u64>,
    pub groups: usize,
    pub metric: Metric,
}

impl Default for AnalyzeOptions {
    fn default() -> Self {
        Self { rounds: None, top_k: 4, seed: None, groups: 2, metric: Metric::Cosine }
    }
}

#[derive(Debug, Serialize)]
struct ClusterReport<'a> {
    round: u32,
    seed: u64,
    metric: Metric,
    agents: &'a [String],
    #[serde(skip_serializing_if = "Option::is_none")]
    parameter_dendrogram: Option<Dendrogram>,
    #[serde(skip_serializing_if = "Option::is_none")]
    parameter_groups: Option<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    kmeans_labels: Option<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    importance: Option<Vec<Vec<f64>>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    importance_groups: Option<Vec<usize>>,
}

fn checkpointed_rounds(run: &Path, seed: u64) -> Vec<u32> {
    let dir = run.join("checkpoints").join(format!("seed_{seed}"));
    let mut rounds: Vec<u32> = std::fs::read_dir(dir)
        .into_iter()
        .flatten()
        .filter_map(|e| e.ok()?.file_name().to_str()?.strip_prefix("round_")?.parse().ok())
        .collect();
    rounds.sort_unstable();
    rounds
}

fn load_params(run: &Path, seed: u64, round: u32, agents: usize) -> Result<Option<Vec<Vec<f64>>>> {
    if !checkpoint_path(run, seed, round, 0).exists() {
        return Ok(None);
    }
    (0..agents)
        .map(|a| Ok(checkpoint::load(&checkpoint_path(run, seed, round, a))?.1.flatten()))
        .collect::<Result<Vec<_>>>()
        .map(Some)
}

fn write_matrix_csv(path: &Path, names: &[String], m: &SimilarityMatrix) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec![String::from("agent")];
    header.extend(names.iter().cloned());
    w.write_record(&header)?;
    for (name, row) in names.iter().zip(&m.values) {
        let mut rec = vec![name.clone()];
        rec.extend(row.iter().map(|v| v.to_string()));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Square heatmap, blue for low and red for high values.
pub fn heatmap_svg(title: &str, names: &[String], values: &[Vec<f64>]) -> String {
    let n = values.len();
    let cell = 36.0;
    let margin = 60.0;
    let size = margin + cell * n as f64 + 10.0;
    let (lo, hi) = values.iter().flatten().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(*v), b.max(*v)));
    let span = if hi > lo { hi - lo } else { 1.0 };
    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{}" font-family="sans-serif" font-size="10">"#, size + 20.0);
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="16" text-anchor="middle" font-size="13">{title}</text>"#, size / 2.0);
    for (i, row) in values.iter().enumerate() {
        let y = margin + cell * i as f64;
        let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#, margin - 4.0, y + cell / 2.0 + 3.0, names[i]);
        for (j, v) in row.iter().enumerate() {
            let x = margin + cell * j as f64;
            let t = (v - lo) / span;
            let (r, b) = ((255.0 * t) as u8, (255.0 * (1.0 - t)) as u8);
            let _ = writeln!(s, r#"<rect x="{x}" y="{y}" width="{cell}" height="{cell}" fill="rgb({r},80,{b})"><title>{v:.4}</title></rect>"#);
        }
    }
    for (j, name) in names.iter().enumerate() {
        let x = margin + cell * j as f64 + cell / 2.0;
        let _ = writeln!(s, r#"<text x="{x}" y="{}" text-anchor="middle">{name}</text>"#, margin - 6.0);
    }
    s.push_str("</svg>\n");
    s
}

/// Write `similarity_round_<t>.csv/.svg`, `clusters_round_<t>.json` and
/// `top_k.json` into the run directory. Returns the written paths.
pub fn analyze_run(run: &Path, opts: &AnalyzeOptions) -> Result<Vec<PathBuf>> {
    let cfg = ExperimentConfig::load(&run.join(crate::experiment::artifacts::CONFIG_FILE))?;
    let seed = opts.seed.unwrap_or(cfg.seeds[0]);
    if !cfg.seeds.contains(&seed) {
        return Err(Error::InvalidArgument(format!("seed {seed} is not part of this run ({:?})", cfg.seeds)));
    }
    let net = Network::build(&cfg.scenario()?.network)?;
    let names: Vec<String> = net.intersections.iter().map(|i| i.name.clone()).collect();
    let n = names.len();
    let rounds_path = run.join(crate::experiment::artifacts::ROUNDS_FILE);
    let log = if rounds_path.exists() { read_rounds(&rounds_path)? } else { Vec::new() };
    let available = checkpointed_rounds(run, seed);
    let requested = opts.rounds.clone().unwrap_or_else(|| available.clone());
    if requested.is_empty() {
        return Err(Error::MissingRound { requested: 0, available });
    }
    let mut written = Vec::new();
    let mut last_matrix = None;
    for &round in &requested {
        let params = load_params(run, seed, round, n)?;
        let snapshot = snapshot_series(&log, seed, &[round]).ok().and_then(|mut v| v.pop());
        if params.is_none() && snapshot.is_none() {
            let mut known = available.clone();
            known.extend(log.iter().filter(|d| d.seed == seed).map(|d| d.round));
            known.sort_unstable();
            known.dedup();
            return Err(Error::MissingRound { requested: round, available: known });
        }
        let mut report = ClusterReport {
            round,
            seed,
            metric: opts.metric,
            agents: &names,
            parameter_dendrogram: None,
            parameter_groups: None,
            kmeans_labels: snapshot.as_ref().and_then(|s| s.labels.clone()),
            importance: snapshot.as_ref().and_then(|s| s.importance.clone()),
            importance_groups: None,
        };
        if let Some(p) = &params {
            let mut m = param_similarity(p, opts.metric)?;
            m.round = Some(round);
            let (d, groups) = hierarchical_cluster(&m, opts.groups.min(n))?;
            report.parameter_dendrogram = Some(d);
            report.parameter_groups = Some(groups);
            let csv_path = run.join(format!("similarity_round_{round}.csv"));
            write_matrix_csv(&csv_path, &names, &m)?;
            let svg_path = run.join(format!("similarity_round_{round}.svg"));
            std::fs::write(&svg_path, heatmap_svg(&format!("Parameter similarity, round {round}"), &names, &m.values))?;
            written.extend([csv_path, svg_path]);
            last_matrix = Some(m);
        }
        if let Some(rho) = &report.importance {
            let aff = importance_affinity(rho)?;
            report.importance_groups = Some(hierarchical_cluster(&aff, opts.groups.min(n))?.1);
        }
        let json_path = run.join(format!("clusters_round_{round}.json"));
        std::fs::write(&json_path, serde_json::to_string_pretty(&report)?)?;
        written.push(json_path);
    }
    if let Some(m) = last_matrix {
        let k = opts.top_k.min(n.saturating_sub(1));
        let mut top: BTreeMap<String, Vec<String>> = BTreeMap::new();
        for a in 0..n {
            top.insert(names[a].clone(), top_k_similar(&m, a, k)?.into_iter().map(|j| names[j].clone()).collect());
        }
        let path = run.join("top_k.json");
        std::fs::write(&path, serde_json::to_string_pretty(&serde_json::json!({ "round": m.round, "seed": seed, "k": k, "similar": top }))?)?;
        written.push(path);
    }
    Ok(written)
}
