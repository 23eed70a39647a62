//! Reproducible experiment orchestration.

pub mod artifacts;
pub mod config;
pub mod controllers;
pub mod runner;

pub use artifacts::{compare, load_summary, run_experiment, Comparison, CompareRow};
pub use config::{ExperimentConfig, RunMethod, Scenario, TrainOverrides, SCENARIOS};
pub use controllers::{actuated_controller, fixed_time_controller, BaselineController};
pub use runner::{checkpoint_path, derive_seed, run_seed, EvalPoint, MetricsRow, RewardRow, RunSummary, SeedOutput, SeedSummary, Stat};
