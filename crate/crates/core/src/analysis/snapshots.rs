//! Lookups over `rounds.jsonl`.

use std::io::BufRead;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::federation::{canonicalize, RoundDiagnostics};

pub fn read_rounds(path: &Path) -> Result<Vec<RoundDiagnostics>> {
    let f = std::io::BufReader::new(std::fs::File::open(path)?);
    let mut out = Vec::new();
    for line in f.lines() {
        let line = line?;
        if !line.trim().is_empty() {
            out.push(serde_json::from_str(&line)?);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub round: u32,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub labels: Option<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub importance: Option<Vec<Vec<f64>>>,
}

/// Records of one seed at the requested rounds, in request order.
pub fn snapshot_series(rounds: &[RoundDiagnostics], seed: u64, requested: &[u32]) -> Result<Vec<Snapshot>> {
    let of_seed: Vec<&RoundDiagnostics> = rounds.iter().filter(|d| d.seed == seed).collect();
    requested
        .iter()
        .map(|&r| {
            let d = of_seed.iter().find(|d| d.round == r).ok_or_else(|| Error::MissingRound {
                requested: r,
                available: of_seed.iter().map(|d| d.round).collect(),
            })?;
            Ok(Snapshot { round: r, labels: d.labels.as_deref().map(canonicalize), importance: d.importance.clone() })
        })
        .collect()
}

/// Importance row of `agent` at every logged round of `seed`.
pub fn importance_evolution(rounds: &[RoundDiagnostics], seed: u64, agent: usize) -> Vec<(u32, Vec<f64>)> {
    rounds
        .iter()
        .filter(|d| d.seed == seed)
        .filter_map(|d| d.importance.as_ref().and_then(|m| m.get(agent)).map(|row| (d.round, row.clone())))
        .collect()
}
