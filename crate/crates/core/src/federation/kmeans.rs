//! K-means over flat vectors. Small instances are solved exactly by
//! enumerating partitions; larger ones use farthest-point seeding, Lloyd
//! iterations, a single-point-move refinement and best-of-restarts selection.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const RESTARTS: usize = 10;
pub const MAX_ITERATIONS: usize = 100;
/// Instances with at most this many partitions into `1..=k` groups are
/// solved by enumeration.
pub const EXACT_PARTITIONS: u64 = 4096;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterAssignment {
    /// Number of non-empty clusters.
    pub k: usize,
    /// Cluster of every point, numbered by smallest member index.
    pub labels: Vec<usize>,
    pub centroids: Vec<Vec<f64>>,
    pub wcss: f64,
}

impl ClusterAssignment {
    pub fn members(&self, cluster: usize) -> Vec<usize> {
        (0..self.labels.len()).filter(|&i| self.labels[i] == cluster).collect()
    }
}

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn centroids(points: &[Vec<f64>], labels: &[usize], k: usize) -> (Vec<Vec<f64>>, Vec<usize>) {
    let dim = points[0].len();
    let mut c = vec![vec![0.0; dim]; k];
    let mut counts = vec![0usize; k];
    for (p, &l) in points.iter().zip(labels) {
        counts[l] += 1;
        for (acc, v) in c[l].iter_mut().zip(p) {
            *acc += v;
        }
    }
    for (row, &n) in c.iter_mut().zip(&counts) {
        if n > 0 {
            row.iter_mut().for_each(|v| *v /= n as f64);
        }
    }
    (c, counts)
}

/// Within-cluster sum of squares of a labelling.
pub fn wcss(points: &[Vec<f64>], labels: &[usize]) -> f64 {
    let k = labels.iter().max().map_or(0, |m| m + 1);
    let (c, _) = centroids(points, labels, k);
    points.iter().zip(labels).map(|(p, &l)| dist2(p, &c[l])).sum()
}

fn nearest(p: &[f64], centers: &[Vec<f64>]) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (j, c) in centers.iter().enumerate() {
        let d = dist2(p, c);
        if d < best_d {
            best = j;
            best_d = d;
        }
    }
    best
}

fn farthest_point_seeds(points: &[Vec<f64>], k: usize, first: usize) -> Vec<Vec<f64>> {
    let mut centers = vec![points[first].clone()];
    let mut d: Vec<f64> = points.iter().map(|p| dist2(p, &centers[0])).collect();
    while centers.len() < k {
        let (far, _) = d.iter().enumerate().fold((0, -1.0), |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc });
        centers.push(points[far].clone());
        for (di, p) in d.iter_mut().zip(points) {
            *di = di.min(dist2(p, centers.last().unwrap()));
        }
    }
    centers
}

/// Move the point farthest from its centroid in the largest cluster into each
/// empty cluster. Clusters whose members all coincide are not split.
fn repair_empty(points: &[Vec<f64>], labels: &mut [usize], k: usize) {
    loop {
        let (c, counts) = centroids(points, labels, k);
        let Some(empty) = counts.iter().position(|&n| n == 0) else { return };
        let largest = (0..k).max_by_key(|&j| (counts[j], std::cmp::Reverse(j))).unwrap();
        let far = (0..points.len())
            .filter(|&i| labels[i] == largest)
            .map(|i| (i, dist2(&points[i], &c[largest])))
            .fold(None, |acc: Option<(usize, f64)>, x| match acc {
                Some(a) if a.1 >= x.1 => Some(a),
                _ => Some(x),
            });
        match far {
            Some((i, d)) if counts[largest] > 1 && d > 0.0 => labels[i] = empty,
            _ => return,
        }
    }
}

fn lloyd(points: &[Vec<f64>], mut centers: Vec<Vec<f64>>) -> Vec<usize> {
    let k = centers.len();
    let mut labels: Vec<usize> = points.iter().map(|p| nearest(p, &centers)).collect();
    for _ in 0..MAX_ITERATIONS {
        repair_empty(points, &mut labels, k);
        centers = centroids(points, &labels, k).0;
        let next: Vec<usize> = points.iter().map(|p| nearest(p, &centers)).collect();
        if next == labels {
            break;
        }
        labels = next;
    }
    repair_empty(points, &mut labels, k);
    labels
}

/// Single-point moves that strictly lower the objective, using the exact
/// change `m/(m+1) d_to^2 - n/(n-1) d_from^2`.
fn refine(points: &[Vec<f64>], labels: &mut [usize], k: usize) {
    for _ in 0..MAX_ITERATIONS {
        let mut moved = false;
        for i in 0..points.len() {
            let (c, counts) = centroids(points, labels, k);
            let from = labels[i];
            if counts[from] < 2 {
                continue;
            }
            let n = counts[from] as f64;
            let removal = n / (n - 1.0) * dist2(&points[i], &c[from]);
            let mut best: Option<(usize, f64)> = None;
            for to in 0..k {
                if to == from || counts[to] == 0 {
                    continue;
                }
                let m = counts[to] as f64;
                let gain = removal - m / (m + 1.0) * dist2(&points[i], &c[to]);
                if gain > 1e-12 * (1.0 + removal) && best.is_none_or(|b| gain > b.1) {
                    best = Some((to, gain));
                }
            }
            if let Some((to, _)) = best {
                labels[i] = to;
                moved = true;
            }
        }
        if !moved {
            break;
        }
    }
}

/// Number of partitions of `n` points into at most `k` non-empty groups,
/// saturating.
pub fn partition_count(n: usize, k: usize) -> u64 {
    // Stirling numbers of the second kind, row by row
    let mut row = vec![0u64; k + 1];
    row[0] = 1;
    for _ in 0..n {
        for j in (1..=k).rev() {
            row[j] = (j as u64).saturating_mul(row[j]).saturating_add(row[j - 1]);
        }
        row[0] = 0;
    }
    row[1..].iter().fold(0u64, |a, b| a.saturating_add(*b))
}

/// Minimum-WCSS labelling by walking restricted growth strings in
/// lexicographic order, so ties resolve to the smallest canonical labels.
fn exhaustive(points: &[Vec<f64>], k: usize) -> Vec<usize> {
    let n = points.len();
    let mut labels = vec![0usize; n];
    let mut best: Option<(f64, Vec<usize>)> = None;
    loop {
        let score = wcss(points, &labels);
        if best.as_ref().is_none_or(|(s, _)| score < *s) {
            best = Some((score, labels.clone()));
        }
        // next restricted growth string with values below k
        let mut i = n;
        loop {
            if i <= 1 {
                return best.expect("at least one partition").1;
            }
            i -= 1;
            let prefix_max = labels[..i].iter().copied().max().unwrap_or(0);
            if labels[i] <= prefix_max && labels[i] + 1 < k {
                labels[i] += 1;
                labels[i + 1..].fill(0);
                break;
            }
        }
    }
}

/// Relabel so clusters are numbered in order of their smallest member.
pub fn canonicalize(labels: &[usize]) -> Vec<usize> {
    let mut map = std::collections::HashMap::new();
    labels
        .iter()
        .map(|l| {
            let next = map.len();
            *map.entry(*l).or_insert(next)
        })
        .collect()
}

/// Cluster `points` into at most `k` groups.
///
/// When there are at most [`EXACT_PARTITIONS`] candidate partitions the
/// optimum is found by enumeration. Otherwise, with at most [`RESTARTS`]
/// points every point serves once as the first
/// seed, which makes the result independent of the seed and of point order
/// up to relabelling; otherwise first seeds are drawn from `seed`.
pub fn kmeans_cluster(points: &[Vec<f64>], k: usize, seed: u64) -> Result<ClusterAssignment> {
    if points.is_empty() {
        return Err(Error::Empty("points"));
    }
    if k == 0 || k > points.len() {
        return Err(Error::InvalidArgument(format!("cluster count {k} must lie in 1..={}", points.len())));
    }
    let dim = points[0].len();
    if let Some(p) = points.iter().find(|p| p.len() != dim) {
        return Err(Error::DimensionMismatch { expected: dim, actual: p.len() });
    }
    if partition_count(points.len(), k) <= EXACT_PARTITIONS {
        let labels = exhaustive(points, k);
        return Ok(assignment(points, labels));
    }
    let firsts: Vec<usize> = if points.len() <= RESTARTS {
        (0..points.len()).collect()
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..RESTARTS).map(|_| rng.random_range(0..points.len())).collect()
    };
    let mut best: Option<(f64, Vec<usize>)> = None;
    for first in firsts {
        let mut labels = lloyd(points, farthest_point_seeds(points, k, first));
        refine(points, &mut labels, k);
        let labels = canonicalize(&labels);
        let score = wcss(points, &labels);
        let better = match &best {
            None => true,
            Some((s, l)) => score < *s || (score == *s && labels < *l),
        };
        if better {
            best = Some((score, labels));
        }
    }
    let (_, labels) = best.expect("at least one restart");
    Ok(assignment(points, labels))
}

fn assignment(points: &[Vec<f64>], labels: Vec<usize>) -> ClusterAssignment {
    let used = labels.iter().max().unwrap() + 1;
    let (centroids, _) = centroids(points, &labels, used);
    let score = wcss(points, &labels);
    ClusterAssignment { k: used, labels, centroids, wcss: score }
}

/// Per-coordinate standardization across points; constant coordinates map to 0.
pub fn standardize(points: &[Vec<f64>]) -> Vec<Vec<f64>> {
    if points.is_empty() {
        return Vec::new();
    }
    let n = points.len() as f64;
    let dim = points[0].len();
    let mut out = vec![vec![0.0; dim]; points.len()];
    for j in 0..dim {
        let mean = points.iter().map(|p| p[j]).sum::<f64>() / n;
        let var = points.iter().map(|p| (p[j] - mean).powi(2)).sum::<f64>() / n;
        let sd = var.sqrt();
        if sd > 1e-12 * (1.0 + mean.abs()) {
            for (o, p) in out.iter_mut().zip(points) {
                o[j] = (p[j] - mean) / sd;
            }
        }
    }
    out
}
