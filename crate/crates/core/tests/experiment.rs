use std::path::{Path, PathBuf};
use std::process::Command;

use hfrl::analysis::{analyze_run, AnalyzeOptions, Metric};
use hfrl::experiment::{compare, load_summary, run_experiment, ExperimentConfig, RunMethod};
use hfrl::metrics::mean_std;
use hfrl::Error;

fn config(dir: &Path, name: &str, scenario: &str, method: RunMethod, rounds: u32) -> ExperimentConfig {
    ExperimentConfig {
        rounds,
        eval_every: 1,
        output: dir.join(name),
        ..ExperimentConfig::desk(scenario, method)
    }
}

fn csv_rows(path: &Path) -> Vec<csv::StringRecord> {
    csv::Reader::from_path(path).unwrap().records().map(|r| r.unwrap()).collect()
}

#[test]
fn fixed_time_run_writes_one_evaluation_and_no_round_log() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), "fixed", "grid3x3", RunMethod::Fixed, 40);
    let summary = run_experiment(&cfg).unwrap();
    let rows = csv_rows(&cfg.output.join("metrics.csv"));
    assert_eq!(rows.len(), 1);
    assert!(!cfg.output.join("rounds.jsonl").exists());
    assert!(!cfg.output.join("rewards.csv").exists());
    assert_eq!(summary.rounds, 0);
    assert_eq!(summary.seeds[0].evaluations.len(), 1);
    let comm = summary.seeds[0].evaluations[0].comm;
    assert_eq!(comm.upload + comm.download, 0.0);
}

#[test]
fn federated_run_logs_every_round() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), "fedavg", "grid3x3", RunMethod::FedAvg, 2);
    let summary = run_experiment(&cfg).unwrap();
    let log = std::fs::read_to_string(cfg.output.join("rounds.jsonl")).unwrap();
    let rounds: Vec<serde_json::Value> = log.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(rounds.len(), 2);
    for (t, r) in rounds.iter().enumerate() {
        assert_eq!(r["round"], t as u64 + 1);
        assert_eq!(r["agents"], 9);
        assert_eq!(r["losses"].as_array().unwrap().len(), 9);
    }
    let rewards = csv_rows(&cfg.output.join("rewards.csv"));
    assert_eq!(rewards.len(), 2 * 9);
    assert_eq!(summary.seeds[0].evaluations.iter().map(|e| e.round).collect::<Vec<_>>(), [1, 2]);
    for agent in 0..9 {
        assert!(hfrl::experiment::checkpoint_path(&cfg.output, 0, 2, agent).exists());
    }
}

#[test]
fn identical_configs_produce_identical_files() {
    let dir = tempfile::tempdir().unwrap();
    let a = ExperimentConfig { seeds: vec![0, 1], ..config(dir.path(), "a", "grid3x3", RunMethod::Fomo, 2) };
    let b = ExperimentConfig { output: dir.path().join("b"), ..a.clone() };
    run_experiment(&a).unwrap();
    run_experiment(&b).unwrap();
    for file in ["metrics.csv", "rounds.jsonl", "rewards.csv", "summary.json"] {
        let x = std::fs::read(a.output.join(file)).unwrap();
        let y = std::fs::read(b.output.join(file)).unwrap();
        assert!(x == y, "{file} differs");
    }
}

#[test]
fn compare_aggregates_final_evaluations() {
    let dir = tempfile::tempdir().unwrap();
    let mut dirs = Vec::new();
    for (name, method) in [("fixed", RunMethod::Fixed), ("actuated", RunMethod::Actuated), ("dec", RunMethod::Decentralized)] {
        let cfg = ExperimentConfig { seeds: vec![0, 1, 2], ..config(dir.path(), name, "grid3x3", method, 2) };
        run_experiment(&cfg).unwrap();
        dirs.push(cfg.output);
    }
    let table = compare(&dirs).unwrap();
    assert_eq!(table.rows.len(), 3);
    for row in &table.rows {
        let summary = load_summary(&row.runs[0]).unwrap();
        let finals: Vec<f64> = summary.seeds.iter().map(|s| s.final_eval().travel_time.unwrap()).collect();
        let mean = finals.iter().sum::<f64>() / 3.0;
        let sd = (finals.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / 2.0).sqrt();
        assert!((row.travel_time.mean - mean).abs() < 1e-9);
        assert!((row.travel_time.std - sd).abs() < 1e-9);
        assert_eq!(mean_std(&finals).0, row.travel_time.mean);
    }
    let ranks: Vec<usize> = table.rows.iter().map(|r| r.rank).collect();
    assert_eq!(ranks, [1, 2, 3]);
    assert!(table.rows.windows(2).all(|w| w[0].travel_time.mean <= w[1].travel_time.mean));
    let text = table.to_string();
    assert!(text.contains("actuated") && text.contains("fixed"));
}

#[test]
fn compare_refuses_mixed_scenarios() {
    let dir = tempfile::tempdir().unwrap();
    let a = config(dir.path(), "a", "grid3x3", RunMethod::Fixed, 1);
    let b = config(dir.path(), "b", "single", RunMethod::Fixed, 1);
    run_experiment(&a).unwrap();
    run_experiment(&b).unwrap();
    assert!(matches!(compare(&[a.output, b.output]), Err(Error::ScenarioMismatch(..))));
}

#[test]
fn analysis_of_a_clustered_run() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = ExperimentConfig { clusters: 2, ..config(dir.path(), "cluster", "sensitivity2", RunMethod::Cluster, 2) };
    run_experiment(&cfg).unwrap();
    let opts = AnalyzeOptions { rounds: Some(vec![2]), top_k: 3, seed: None, groups: 2, metric: Metric::Cosine };
    let written = analyze_run(&cfg.output, &opts).unwrap();
    let names: Vec<String> = written.iter().map(|p| p.file_name().unwrap().to_string_lossy().into_owned()).collect();
    for f in ["similarity_round_2.csv", "similarity_round_2.svg", "clusters_round_2.json", "top_k.json"] {
        assert!(names.iter().any(|n| n == f), "{f} missing from {names:?}");
    }
    let top: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(cfg.output.join("top_k.json")).unwrap()).unwrap();
    assert_eq!(top["similar"]["A0"].as_array().unwrap().len(), 3);
    let missing = AnalyzeOptions { rounds: Some(vec![17]), ..opts };
    assert!(matches!(analyze_run(&cfg.output, &missing), Err(Error::MissingRound { requested: 17, .. })));
}

#[test]
fn unknown_config_keys_are_rejected() {
    assert!(ExperimentConfig::from_toml("rounds = 3\nround = 4\n").is_err());
    let cfg = ExperimentConfig::from_toml("method = \"cluster\"\nclusters = 2\n").unwrap();
    assert_eq!(cfg.method, RunMethod::Cluster);
    assert_eq!(cfg.hyperparameters, "table");
}

fn hfrl(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_hfrl")).args(args).env("RUST_LOG", "warn").output().unwrap()
}

#[test]
fn command_line_run_and_compare() {
    let dir = tempfile::tempdir().unwrap();
    let out = |n: &str| -> PathBuf { dir.path().join(n) };
    for m in ["fixed", "actuated"] {
        let o = hfrl(&["run", "--preset", "desk", "--method", m, "--scenario", "single", "--seed", "0,1", "--out", out(m).to_str().unwrap()]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let json = out("table.json");
    let o = hfrl(&["compare", out("fixed").to_str().unwrap(), out("actuated").to_str().unwrap(), "--json", json.to_str().unwrap()]);
    assert!(o.status.success());
    assert!(String::from_utf8_lossy(&o.stdout).contains("scenario: single"));
    assert!(json.exists());
    let bad = hfrl(&["run", "--method", "nonsense"]);
    assert!(!bad.status.success());
}
