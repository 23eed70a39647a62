use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::federation::standardize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Metric {
    Cosine,
    NegEuclidean,
}

impl std::str::FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cosine" => Ok(Metric::Cosine),
            "neg-euclidean" => Ok(Metric::NegEuclidean),
            other => Err(Error::InvalidArgument(format!("unknown similarity metric {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimilarityMatrix {
    pub metric: Metric,
    pub round: Option<u32>,
    pub values: Vec<Vec<f64>>,
}

impl SimilarityMatrix {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i][j]
    }

    /// Distance used for linkage: `(s_ii + s_jj) / 2 - s_ij`.
    pub fn distance(&self, i: usize, j: usize) -> f64 {
        0.5 * (self.values[i][i] + self.values[j][j]) - self.values[i][j]
    }

    pub fn from_values(metric: Metric, values: Vec<Vec<f64>>) -> Result<Self> {
        let n = values.len();
        for (i, row) in values.iter().enumerate() {
            if row.len() != n {
                return Err(Error::DimensionMismatch { expected: n, actual: row.len() });
            }
            for j in 0..n {
                if !row[j].is_finite() || row[j] != values[j][i] {
                    return Err(Error::InvalidArgument(format!("similarity matrix must be finite and symmetric at ({i}, {j})")));
                }
            }
        }
        Ok(Self { metric, round: None, values })
    }
}

fn cosine(a: &[f64], b: &[f64]) -> Option<f64> {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    (na > 0.0 && nb > 0.0).then(|| (dot / (na * nb)).clamp(-1.0, 1.0))
}

/// Pairwise similarity of the given vectors as they are.
pub fn similarity(vectors: &[Vec<f64>], metric: Metric) -> Result<SimilarityMatrix> {
    if vectors.len() < 2 {
        return Err(Error::InvalidArgument("similarity needs at least two agents".into()));
    }
    let dim = vectors[0].len();
    if let Some(v) = vectors.iter().find(|v| v.len() != dim) {
        return Err(Error::DimensionMismatch { expected: dim, actual: v.len() });
    }
    let n = vectors.len();
    let mut values = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..=i {
            let s = match metric {
                Metric::Cosine if i == j => 1.0,
                Metric::Cosine => cosine(&vectors[i], &vectors[j]).unwrap_or_else(|| {
                    warn!("zero vector in cosine similarity between agents {j} and {i}; using 0");
                    0.0
                }),
                Metric::NegEuclidean => {
                    -vectors[i].iter().zip(&vectors[j]).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
                }
            };
            values[i][j] = s;
            values[j][i] = s;
        }
    }
    Ok(SimilarityMatrix { metric, round: None, values })
}

/// Similarity of flattened agent parameters after per-coordinate
/// standardization across agents.
pub fn param_similarity(params: &[Vec<f64>], metric: Metric) -> Result<SimilarityMatrix> {
    if let Some(v) = params.iter().find(|v| v.len() != params[0].len()) {
        return Err(Error::DimensionMismatch { expected: params[0].len(), actual: v.len() });
    }
    similarity(&standardize(params), metric)
}

/// The `k` agents most similar to `agent`, most similar first; ties go to the
/// lower id.
pub fn top_k_similar(matrix: &SimilarityMatrix, agent: usize, k: usize) -> Result<Vec<usize>> {
    let n = matrix.len();
    if agent >= n {
        return Err(Error::UnknownIntersection(agent));
    }
    if k >= n {
        return Err(Error::InvalidArgument(format!("k = {k} must be below the agent count {n}")));
    }
    let mut others: Vec<usize> = (0..n).filter(|&j| j != agent).collect();
    others.sort_by(|&a, &b| matrix.get(agent, b).total_cmp(&matrix.get(agent, a)).then(a.cmp(&b)));
    others.truncate(k);
    Ok(others)
}

/// `(rho + rho^T) / 2` with a unit diagonal.
pub fn importance_affinity(importance: &[Vec<f64>]) -> Result<SimilarityMatrix> {
    let n = importance.len();
    let mut values = vec![vec![0.0; n]; n];
    for i in 0..n {
        if importance[i].len() != n {
            return Err(Error::DimensionMismatch { expected: n, actual: importance[i].len() });
        }
        for j in 0..n {
            values[i][j] = if i == j { 1.0 } else { 0.5 * (importance[i][j] + importance[j][i]) };
        }
    }
    Ok(SimilarityMatrix { metric: Metric::Cosine, round: None, values })
}
