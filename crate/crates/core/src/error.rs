use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid network: {0}")]
    InvalidNetwork(String),

    #[error("invalid demand: {0}")]
    InvalidDemand(String),

    #[error("expected {expected} actions, got {actual}")]
    ActionCount { expected: usize, actual: usize },

    #[error("unknown intersection {0}")]
    UnknownIntersection(usize),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("training diverged: {0}")]
    Divergence(String),

    #[error("missing upload for agent {0}")]
    MissingUpload(usize),

    #[error("round {requested} not found; available rounds: {available:?}")]
    MissingRound { requested: u32, available: Vec<u32> },

    #[error("invalid config: {0}")]
    Config(String),

    #[error("scenario mismatch: {0} vs {1}")]
    ScenarioMismatch(String, String),

    #[error("malformed checkpoint: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Toml(#[from] toml::de::Error),
}
