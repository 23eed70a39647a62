//! Agglomerative average-linkage clustering over a similarity matrix.

use serde::{Deserialize, Serialize};

use super::similarity::SimilarityMatrix;
use crate::error::{Error, Result};
use crate::federation::canonicalize;

/// Merge of clusters `a` and `b` into cluster `n + step`. Ids below `n` are
/// single agents.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Merge {
    pub a: usize,
    pub b: usize,
    pub height: f64,
    pub size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dendrogram {
    pub leaves: usize,
    pub linkage: String,
    pub merges: Vec<Merge>,
}

impl Dendrogram {
    /// Labels after undoing all but the first `leaves - groups` merges.
    pub fn cut(&self, groups: usize) -> Result<Vec<usize>> {
        let n = self.leaves;
        if groups == 0 || groups > n {
            return Err(Error::InvalidArgument(format!("cannot cut {n} leaves into {groups} groups")));
        }
        let mut owner: Vec<usize> = (0..n).collect();
        // members of every cluster id
        let mut members: Vec<Vec<usize>> = (0..n).map(|i| vec![i]).collect();
        for m in &self.merges[..n - groups] {
            let mut joined = members[m.a].clone();
            joined.extend(&members[m.b]);
            let id = members.len();
            for &leaf in &joined {
                owner[leaf] = id;
            }
            members.push(joined);
        }
        Ok(canonicalize(&owner))
    }
}

/// Average linkage with distance `(s_ii + s_jj) / 2 - s_ij` (for cosine,
/// `1 - s_ij`). Ties merge the pair with the smallest ids first.
pub fn hierarchical_cluster(matrix: &SimilarityMatrix, target_groups: usize) -> Result<(Dendrogram, Vec<usize>)> {
    let n = matrix.len();
    if n == 0 {
        return Err(Error::Empty("similarity matrix"));
    }
    if target_groups == 0 || target_groups > n {
        return Err(Error::InvalidArgument(format!("target groups {target_groups} must lie in 1..={n}")));
    }
    // active cluster ids, their sizes and pairwise linkage distances
    let mut active: Vec<usize> = (0..n).collect();
    let mut size: Vec<usize> = vec![1; n];
    let mut dist: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| matrix.distance(i, j)).collect()).collect();
    let mut merges = Vec::with_capacity(n - 1);
    while active.len() > 1 {
        let mut best = (0, 1, f64::INFINITY);
        for x in 0..active.len() {
            for y in x + 1..active.len() {
                let d = dist[active[x]][active[y]];
                if d < best.2 {
                    best = (x, y, d);
                }
            }
        }
        let (x, y, height) = best;
        let (a, b) = (active[x], active[y]);
        let id = size.len();
        let s = size[a] + size[b];
        size.push(s);
        let mut row = vec![0.0; id + 1];
        for &k in &active {
            if k != a && k != b {
                row[k] = (size[a] as f64 * dist[a][k] + size[b] as f64 * dist[b][k]) / s as f64;
            }
        }
        for (k, r) in dist.iter_mut().enumerate() {
            r.push(row[k]);
        }
        dist.push(row);
        merges.push(Merge { a, b, height, size: s });
        active.remove(y);
        active.remove(x);
        active.push(id);
    }
    let d = Dendrogram { leaves: n, linkage: "average".into(), merges };
    let labels = d.cut(target_groups)?;
    Ok((d, labels))
}
