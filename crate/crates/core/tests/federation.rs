mod common;

use std::sync::Arc;

use common::{brute_force_two_means, compensated_sum, random_params, random_points, random_trajectory, rng};
use hfrl::agent::{Activation, Architecture, LossConfig, ModelParams, Trajectory};
use hfrl::federation::{
    cluster_aggregate, fedavg_aggregate, fomo_importance, fomo_update, kmeans_cluster, normalize_row, raw_importance,
    run_round, wcss, FederationRound, Method, ServerConfig, Upload,
};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::Rng;

fn small_arch() -> Architecture {
    Architecture::new(3, vec![4], Activation::Tanh)
}

fn models(n: usize, seed: u64, scale: f64) -> Vec<ModelParams> {
    let mut r = rng(seed);
    (0..n)
        .map(|_| {
            let mut p = random_params(small_arch(), &mut r, 1.0);
            p.as_mut_slice().iter_mut().for_each(|v| *v *= scale);
            p
        })
        .collect()
}

#[test]
fn fedavg_matches_compensated_mean() {
    let mut r = rng(1);
    for trial in 0..50 {
        let n = r.random_range(2..=20);
        let scale = 10f64.powi(r.random_range(-3..=3));
        let ms = models(n, trial, scale);
        let refs: Vec<&ModelParams> = ms.iter().collect();
        let mean = fedavg_aggregate(&refs).unwrap();
        for j in 0..mean.len() {
            let expected = compensated_sum(ms.iter().map(|m| m.as_slice()[j])) / n as f64;
            assert!((mean.as_slice()[j] - expected).abs() <= 1e-12 * scale.max(1.0));
        }
    }
}

#[test]
fn fedavg_rejects_mismatched_shapes() {
    let a = ModelParams::zeros(small_arch());
    let b = ModelParams::zeros(Architecture::new(3, vec![5], Activation::Tanh));
    assert!(fedavg_aggregate(&[&a, &b]).is_err());
    assert!(fedavg_aggregate(&[]).is_err());
}

#[test]
fn single_cluster_equals_fedavg_exactly() {
    for seed in 0..20 {
        let ms = models(9, seed, 1.0);
        let refs: Vec<&ModelParams> = ms.iter().collect();
        let points: Vec<Vec<f64>> = ms.iter().map(|m| m.flatten()).collect();
        let a = kmeans_cluster(&points, 1, seed).unwrap();
        let mean = fedavg_aggregate(&refs).unwrap();
        for out in cluster_aggregate(&a, &refs).unwrap() {
            assert_eq!(out, mean);
        }
    }
}

#[test]
fn cluster_members_share_their_cluster_mean() {
    let ms = models(6, 4, 1.0);
    let refs: Vec<&ModelParams> = ms.iter().collect();
    let points: Vec<Vec<f64>> = ms.iter().map(|m| m.flatten()).collect();
    let a = kmeans_cluster(&points, 2, 0).unwrap();
    let out = cluster_aggregate(&a, &refs).unwrap();
    for c in 0..a.k {
        let members = a.members(c);
        let group: Vec<&ModelParams> = members.iter().map(|&i| &ms[i]).collect();
        let mean = if group.len() == 1 { group[0].clone() } else { fedavg_aggregate(&group).unwrap() };
        for i in members {
            assert_eq!(out[i], mean);
        }
    }
}

#[test]
fn one_hot_importance_returns_candidate_bits() {
    let mut r = rng(2);
    for _ in 0..20 {
        let mut ms = models(5, r.random(), 1.0);
        ms[2].as_mut_slice()[0] = -0.0;
        let refs: Vec<&ModelParams> = ms.iter().collect();
        let prev = models(1, r.random(), 3.0).pop().unwrap();
        let pick = r.random_range(0..5);
        let mut w = vec![0.0; 5];
        w[pick] = 1.0;
        let out = fomo_update(&prev, &refs, &w).unwrap();
        let bits = |p: &ModelParams| p.as_slice().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&out), bits(&ms[pick]));
    }
}

/// Loss oracle with a known minimum, so scores have both signs.
fn quadratic_loss(center: &[f64]) -> impl Fn(&ModelParams) -> hfrl::Result<f64> + '_ {
    move |w| Ok(w.as_slice().iter().zip(center).map(|(a, b)| (a - b) * (a - b)).sum())
}

#[test]
fn importance_scores_match_direct_evaluation() {
    let mut r = rng(3);
    let mut fallbacks = 0;
    for trial in 0..100 {
        let n = r.random_range(2..=9);
        let ms = models(n, 1000 + trial, 1.0);
        let prev = models(1, 5000 + trial, 1.0).pop().unwrap();
        let center: Vec<f64> = (0..prev.len()).map(|_| r.random_range(-1.0..1.0)).collect();
        let alpha = r.random_range(0.1..3.0);
        let me = r.random_range(0..n);
        let cands: Vec<(usize, &ModelParams)> = ms.iter().enumerate().collect();
        let loss = quadratic_loss(&center);
        let row = fomo_importance(me, &cands, &prev, &loss, alpha).unwrap();

        let prev_loss = loss(&prev).unwrap();
        for (i, m) in ms.iter().enumerate() {
            let d = m.as_slice().iter().zip(prev.as_slice()).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            let direct = -alpha * (loss(m).unwrap() - prev_loss) / d;
            assert!((row.raw[i] - direct).abs() <= 1e-12 * direct.abs().max(1.0), "trial {trial}");
        }
        let sum: f64 = row.weights.iter().sum();
        assert!((sum - 1.0).abs() <= 1e-12);
        assert!(row.weights.iter().all(|w| *w >= 0.0));
        let all_non_positive = row.raw.iter().all(|x| *x <= 0.0);
        assert_eq!(row.fallback, all_non_positive);
        if all_non_positive {
            fallbacks += 1;
            assert_eq!(row.weights[me], 1.0);
        }
    }
    // make sure both branches were exercised
    assert!(fallbacks > 0 && fallbacks < 100, "{fallbacks} fallback rows");
}

#[test]
fn all_negative_rows_fall_back_to_self() {
    let mut r = rng(4);
    for _ in 0..100 {
        let n = r.random_range(1..=10);
        let raw: Vec<f64> = (0..n).map(|_| -r.random_range(0.0..5.0)).collect();
        let me = r.random_range(0..n);
        let row = normalize_row(&raw, me);
        assert!(row.fallback);
        let mut expected = vec![0.0; n];
        expected[me] = 1.0;
        assert_eq!(row.weights, expected);
    }
    assert_eq!(raw_importance(2.0, 3.0, 1.0, 4.0), -1.0);
}

#[test]
fn kmeans_reaches_the_exhaustive_optimum() {
    let mut r = rng(5);
    for trial in 0..200 {
        let n = r.random_range(2..=6);
        let dim = r.random_range(1..=4);
        let points = random_points(&mut r, n, dim);
        let a = kmeans_cluster(&points, 2, trial).unwrap();
        let best = brute_force_two_means(&points);
        assert!(a.wcss <= best + 1e-9, "trial {trial}: {} > {best}", a.wcss);
    }
}

#[test]
fn kmeans_with_identical_points_uses_one_cluster() {
    let points = vec![vec![1.0, 2.0]; 4];
    let a = kmeans_cluster(&points, 2, 0).unwrap();
    assert_eq!(a.k, 1);
    assert_eq!(a.labels, [0, 0, 0, 0]);
    assert_eq!(a.wcss, 0.0);
}

fn uploads(ms: &[ModelParams], trajectories: &[Arc<Trajectory>]) -> Vec<Upload> {
    ms.iter()
        .enumerate()
        .map(|(agent, p)| Upload { agent, params: p.clone(), trajectory: Arc::clone(&trajectories[agent]), loss: 0.0 })
        .collect()
}

fn round_inputs(n: usize, seed: u64) -> (Vec<ModelParams>, Vec<ModelParams>, Vec<Arc<Trajectory>>) {
    let mut r = rng(seed);
    let arch = small_arch();
    let prev: Vec<ModelParams> = (0..n).map(|_| random_params(arch.clone(), &mut r, 0.5)).collect();
    let new: Vec<ModelParams> = prev
        .iter()
        .map(|p| {
            let mut q = p.clone();
            q.as_mut_slice().iter_mut().for_each(|v| *v += r.random_range(-0.2..0.2));
            q
        })
        .collect();
    let trajs = (0..n).map(|_| Arc::new(Trajectory { steps: random_trajectory(&arch, 8, &mut r) })).collect();
    (prev, new, trajs)
}

fn server(method: Method) -> ServerConfig {
    ServerConfig { method, clusters: 2, alpha: 1.0, loss: LossConfig { gamma: 0.9, horizon: 3, ..LossConfig::default() }, seed: 3 }
}

fn coordinate_hull(points: &[&ModelParams], j: usize) -> (f64, f64) {
    points.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| (lo.min(p.as_slice()[j]), hi.max(p.as_slice()[j])))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn normalized_rows_are_stochastic(raw in prop::collection::vec(-10.0f64..10.0, 1..12), pick in 0usize..12) {
        let me = pick % raw.len();
        let row = normalize_row(&raw, me);
        prop_assert!(row.weights.iter().all(|w| *w >= 0.0));
        prop_assert!((row.weights.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        for (w, x) in row.weights.iter().zip(&raw) {
            if *x <= 0.0 && !row.fallback {
                prop_assert_eq!(*w, 0.0);
            }
        }
    }

    #[test]
    fn fomo_output_stays_in_the_convex_hull(seed in any::<u64>(), n in 1usize..8) {
        let (prev, new, _) = round_inputs(n, seed);
        let mut r = rng(seed ^ 0x55);
        let raw: Vec<f64> = (0..n).map(|_| r.random_range(-1.0..1.0)).collect();
        let row = normalize_row(&raw, 0);
        let refs: Vec<&ModelParams> = new.iter().collect();
        let out = fomo_update(&prev[0], &refs, &row.weights).unwrap();
        let mut all = refs.clone();
        all.push(&prev[0]);
        for j in 0..out.len() {
            let (lo, hi) = coordinate_hull(&all, j);
            let v = out.as_slice()[j];
            prop_assert!(v >= lo - 1e-12 && v <= hi + 1e-12);
        }
    }

    #[test]
    fn fedavg_stays_in_the_convex_hull(seed in any::<u64>(), n in 1usize..10) {
        let ms = models(n, seed, 1.0);
        let refs: Vec<&ModelParams> = ms.iter().collect();
        let mean = fedavg_aggregate(&refs).unwrap();
        for j in 0..mean.len() {
            let (lo, hi) = coordinate_hull(&refs, j);
            prop_assert!(mean.as_slice()[j] >= lo - 1e-12 && mean.as_slice()[j] <= hi + 1e-12);
        }
    }

    #[test]
    fn rounds_are_permutation_equivariant(seed in any::<u64>(), n in 2usize..7, which in 0usize..3) {
        let method = [Method::FedAvg, Method::Cluster, Method::Fomo][which];
        let cfg = server(method);
        let (prev, new, trajs) = round_inputs(n, seed);
        let ordered = uploads(&new, &trajs);
        let mut shuffled = ordered.clone();
        shuffled.shuffle(&mut rng(seed.wrapping_add(1)));
        let a = run_round(&cfg, &FederationRound { round: 1, uploads: &ordered, previous: &prev }).unwrap();
        let b = run_round(&cfg, &FederationRound { round: 1, uploads: &shuffled, previous: &prev }).unwrap();
        for (u, p) in shuffled.iter().zip(&b.params) {
            prop_assert_eq!(p, &a.params[u.agent]);
        }
        prop_assert_eq!(a.diagnostics.labels, b.diagnostics.labels);
        prop_assert_eq!(a.diagnostics.importance, b.diagnostics.importance);
    }

    #[test]
    fn kmeans_result_is_locally_optimal(seed in any::<u64>(), n in 2usize..14, k in 1usize..5, dim in 1usize..4) {
        let k = k.min(n);
        let points = random_points(&mut rng(seed), n, dim);
        let a = kmeans_cluster(&points, k, seed).unwrap();
        prop_assert!((a.wcss - wcss(&points, &a.labels)).abs() <= 1e-9);
        prop_assert!(a.wcss <= wcss(&points, &vec![0; n]) + 1e-9);
        // neither a Lloyd reassignment nor moving a single point lowers the objective
        let nearest: Vec<usize> = points
            .iter()
            .map(|p| {
                (0..a.k)
                    .min_by(|&x, &y| {
                        let d = |c: &Vec<f64>| c.iter().zip(p).map(|(u, v)| (u - v).powi(2)).sum::<f64>();
                        d(&a.centroids[x]).total_cmp(&d(&a.centroids[y]))
                    })
                    .unwrap()
            })
            .collect();
        prop_assert!(wcss(&points, &nearest) >= a.wcss - 1e-9);
        for i in 0..n {
            for to in 0..a.k {
                let mut moved = a.labels.clone();
                moved[i] = to;
                if (0..a.k).all(|c| moved.contains(&c)) {
                    prop_assert!(wcss(&points, &moved) >= a.wcss - 1e-9);
                }
            }
        }
    }
}
