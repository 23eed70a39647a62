//! Post-hoc tooling over trained agents and round logs.

pub mod hierarchy;
pub mod report;
pub mod similarity;
pub mod snapshots;

pub use hierarchy::{hierarchical_cluster, Dendrogram, Merge};
pub use report::{analyze_run, heatmap_svg, AnalyzeOptions};
pub use similarity::{importance_affinity, param_similarity, similarity, top_k_similar, Metric, SimilarityMatrix};
pub use snapshots::{importance_evolution, read_rounds, snapshot_series, Snapshot};
