use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use hfrl::analysis::{analyze_run, AnalyzeOptions, Metric};
use hfrl::experiment::{compare, run_experiment, ExperimentConfig, RunMethod};

#[derive(Parser)]
#[command(name = "hfrl", version, about = "Hierarchical federated actor-critic traffic signal control")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train and evaluate one configuration over its seeds.
    Run {
        /// TOML experiment file; defaults apply when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Named preset used instead of a file: desk, paper-scale or paper-arch.
        #[arg(long, conflicts_with = "config")]
        preset: Option<String>,
        #[arg(long)]
        method: Option<RunMethod>,
        #[arg(long)]
        scenario: Option<String>,
        /// Replaces the configured seed list.
        #[arg(long, value_delimiter = ',')]
        seed: Option<Vec<u64>>,
        #[arg(long)]
        rounds: Option<u32>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Similarity matrices, dendrogram cuts and top-k neighbours of a run.
    Analyze {
        #[arg(long)]
        run: PathBuf,
        #[arg(long, value_delimiter = ',')]
        rounds: Option<Vec<u32>>,
        #[arg(long, default_value_t = 4)]
        top_k: usize,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value_t = 2)]
        groups: usize,
        #[arg(long, default_value = "cosine")]
        metric: Metric,
    },
    /// Per-method summary table over several run directories.
    Compare {
        #[arg(required = true, num_args = 2..)]
        dirs: Vec<PathBuf>,
        /// Also write the table as JSON.
        #[arg(long)]
        json: Option<PathBuf>,
    },
}

fn configure_threads() -> Result<()> {
    if let Ok(v) = std::env::var("HFRL_THREADS") {
        let n: usize = v.parse().with_context(|| format!("HFRL_THREADS must be a positive integer, got {v:?}"))?;
        rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global()?;
    }
    Ok(())
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    configure_threads()?;
    match Cli::parse().command {
        Command::Run { config, preset, method, scenario, seed, rounds, out } => {
            let mut cfg = match (config, preset) {
                (Some(path), _) => ExperimentConfig::load(&path).with_context(|| format!("reading {}", path.display()))?,
                (None, Some(p)) => ExperimentConfig::preset(&p)?,
                (None, None) => ExperimentConfig::default(),
            };
            if let Some(m) = method {
                cfg.method = m;
            }
            if let Some(s) = scenario {
                cfg.scenario = s;
            }
            if let Some(s) = seed {
                cfg.seeds = s;
            }
            if let Some(r) = rounds {
                cfg.rounds = r;
            }
            if let Some(o) = out {
                cfg.output = o;
            }
            let summary = run_experiment(&cfg)?;
            println!(
                "{} on {}: travel time {:.2} ± {:.2} s, waiting time {:.2} ± {:.2} s, reward {:.4}, comm {:.0} B/episode",
                summary.method,
                summary.scenario,
                summary.travel_time.mean,
                summary.travel_time.std,
                summary.waiting_time.mean,
                summary.waiting_time.std,
                summary.reward.mean,
                summary.comm_total.mean
            );
            println!("artifacts in {}", cfg.output.display());
        }
        Command::Analyze { run, rounds, top_k, seed, groups, metric } => {
            let opts = AnalyzeOptions { rounds, top_k, seed, groups, metric };
            let written = analyze_run(&run, &opts)?;
            for p in written {
                println!("{}", p.display());
            }
        }
        Command::Compare { dirs, json } => {
            let table = compare(&dirs)?;
            print!("{table}");
            if let Some(path) = json {
                std::fs::write(&path, serde_json::to_string_pretty(&table)?)?;
            }
        }
    }
    Ok(())
}
