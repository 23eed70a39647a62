//! First-order personalized model weighting.
//!
//! Agent `n` scores every candidate model `w_i` by the loss improvement it
//! brings on `n`'s own data per unit of parameter distance from `n`'s
//! previous model, keeps the positive scores and mixes the candidates with
//! the normalized weights.

use serde::{Deserialize, Serialize};

use super::fedavg::check_dims;
use crate::agent::ModelParams;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceRow {
    /// Unnormalized scores, one per candidate.
    pub raw: Vec<f64>,
    /// Non-negative weights summing to one.
    pub weights: Vec<f64>,
    /// Set when no candidate had a positive score and the row is one-hot on self.
    pub fallback: bool,
}

fn distance(a: &ModelParams, b: &ModelParams) -> f64 {
    a.as_slice().iter().zip(b.as_slice()).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Raw score `-alpha (L(w_i) - L(w_prev)) / ||w_i - w_prev||`, zero for a
/// candidate equal to `w_prev`.
pub fn raw_importance(alpha: f64, candidate_loss: f64, prev_loss: f64, distance: f64) -> f64 {
    if distance == 0.0 {
        0.0
    } else {
        -alpha * (candidate_loss - prev_loss) / distance
    }
}

/// Clip negative scores and normalize. `self_index` is the position of the
/// receiving agent among the candidates; it gets the whole weight when
/// nothing is positive.
pub fn normalize_row(raw: &[f64], self_index: usize) -> ImportanceRow {
    let clipped: Vec<f64> = raw.iter().map(|r| r.max(0.0)).collect();
    let total: f64 = clipped.iter().sum();
    if total > 0.0 && total.is_finite() {
        ImportanceRow { raw: raw.to_vec(), weights: clipped.iter().map(|c| c / total).collect(), fallback: false }
    } else {
        let mut weights = vec![0.0; raw.len()];
        weights[self_index] = 1.0;
        ImportanceRow { raw: raw.to_vec(), weights, fallback: true }
    }
}

/// Importance row of agent `n`. `candidates` pairs agent ids with their new
/// models and must include `n` itself.
pub fn fomo_importance(
    n: usize,
    candidates: &[(usize, &ModelParams)],
    w_prev: &ModelParams,
    loss_oracle: impl Fn(&ModelParams) -> Result<f64>,
    alpha: f64,
) -> Result<ImportanceRow> {
    if !(alpha > 0.0) {
        return Err(Error::InvalidArgument(format!("alpha must be positive, got {alpha}")));
    }
    let mut all: Vec<&ModelParams> = candidates.iter().map(|(_, p)| *p).collect();
    all.push(w_prev);
    check_dims(&all)?;
    let self_index = candidates.iter().position(|(i, _)| *i == n).ok_or(Error::MissingUpload(n))?;
    let prev_loss = loss_oracle(w_prev)?;
    let raw = candidates
        .iter()
        .map(|(_, w)| {
            let d = distance(w, w_prev);
            if d == 0.0 {
                Ok(0.0)
            } else {
                Ok(raw_importance(alpha, loss_oracle(w)?, prev_loss, d))
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(normalize_row(&raw, self_index))
}

/// `w_prev + sum_i rho_i (w_i - w_prev)`, evaluated as
/// `(1 - sum rho) w_prev + sum_i rho_i w_i`.
pub fn fomo_update(w_prev: &ModelParams, candidates: &[&ModelParams], weights: &[f64]) -> Result<ModelParams> {
    if candidates.len() != weights.len() {
        return Err(Error::DimensionMismatch { expected: candidates.len(), actual: weights.len() });
    }
    let mut all = candidates.to_vec();
    all.push(w_prev);
    check_dims(&all)?;
    // A vertex of the simplex is returned as is, signed zeros included.
    if let Some(j) = weights.iter().position(|&w| w == 1.0) {
        if weights.iter().enumerate().all(|(i, &w)| i == j || w == 0.0) {
            return Ok(candidates[j].clone());
        }
    }
    let rest = 1.0 - weights.iter().sum::<f64>();
    let mut out: Vec<f64> = w_prev.as_slice().iter().map(|v| rest * v).collect();
    for (w, &rho) in candidates.iter().zip(weights) {
        if rho == 0.0 {
            continue;
        }
        for (o, v) in out.iter_mut().zip(w.as_slice()) {
            *o += rho * v;
        }
    }
    w_prev.unflatten(out)
}
