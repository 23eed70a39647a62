//! Server-side aggregation of agent models.

pub mod cluster;
pub mod fedavg;
pub mod fomo;
pub mod kmeans;
pub mod server;

pub use cluster::cluster_aggregate;
pub use fedavg::fedavg_aggregate;
pub use fomo::{fomo_importance, fomo_update, normalize_row, raw_importance, ImportanceRow};
pub use kmeans::{canonicalize, kmeans_cluster, standardize, wcss, ClusterAssignment};
pub use server::{run_round, FederationRound, Method, NormSummary, RoundDiagnostics, RoundOutcome, Server, ServerConfig, Upload};
