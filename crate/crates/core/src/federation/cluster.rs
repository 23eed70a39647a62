use super::fedavg::{check_dims, fedavg_aggregate};
use super::kmeans::ClusterAssignment;
use crate::agent::ModelParams;
use crate::error::{Error, Result};

/// Replace every agent's parameters by the mean of its cluster.
pub fn cluster_aggregate(assignment: &ClusterAssignment, uploads: &[&ModelParams]) -> Result<Vec<ModelParams>> {
    check_dims(uploads)?;
    if assignment.labels.len() != uploads.len() {
        return Err(Error::MissingUpload(assignment.labels.len().min(uploads.len())));
    }
    let k = assignment.labels.iter().max().map_or(0, |m| m + 1);
    let means = (0..k)
        .map(|c| {
            let members: Vec<&ModelParams> =
                assignment.labels.iter().zip(uploads).filter(|(l, _)| **l == c).map(|(_, p)| *p).collect();
            match members.len() {
                0 => Ok(None),
                1 => Ok(Some(members[0].clone())),
                _ => fedavg_aggregate(&members).map(Some),
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(assignment.labels.iter().map(|&l| means[l].clone().expect("labelled cluster is non-empty")).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agent::{Activation, Architecture};

    fn scalar(v: f64) -> ModelParams {
        let arch = Architecture::new(1, vec![1], Activation::Tanh);
        let mut p = ModelParams::zeros(arch);
        p.as_mut_slice()[0] = v;
        p
    }

    fn assignment(labels: Vec<usize>) -> ClusterAssignment {
        ClusterAssignment { k: labels.iter().max().unwrap() + 1, labels, centroids: Vec::new(), wcss: 0.0 }
    }

    #[test]
    fn per_cluster_means() {
        let ps: Vec<_> = [1.0, 3.0, 10.0, 20.0].into_iter().map(scalar).collect();
        let refs: Vec<_> = ps.iter().collect();
        let out = cluster_aggregate(&assignment(vec![0, 0, 1, 1]), &refs).unwrap();
        let got: Vec<f64> = out.iter().map(|p| p.as_slice()[0]).collect();
        assert_eq!(got, [2.0, 2.0, 15.0, 15.0]);
    }

    #[test]
    fn singletons_keep_their_params() {
        let ps: Vec<_> = [1.0, 3.0, 10.0].into_iter().map(scalar).collect();
        let refs: Vec<_> = ps.iter().collect();
        let out = cluster_aggregate(&assignment(vec![0, 1, 2]), &refs).unwrap();
        assert_eq!(out, ps);
    }

    #[test]
    fn label_count_must_match() {
        let ps: Vec<_> = [1.0, 3.0].into_iter().map(scalar).collect();
        let refs: Vec<_> = ps.iter().collect();
        assert!(cluster_aggregate(&assignment(vec![0]), &refs).is_err());
    }
}
