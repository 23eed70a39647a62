#![allow(dead_code)]

use hfrl::agent::{scalar_loss, scalar_loss_and_grad, Activation, Architecture, LossConfig, ModelParams, Transition};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Neumaier-compensated sum, used as the reference for plain averaging.
pub fn compensated_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0f64;
    let mut c = 0.0f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            c += (sum - t) + v;
        } else {
            c += (v - t) + sum;
        }
        sum = t;
    }
    sum + c
}

pub fn random_architecture(rng: &mut impl Rng) -> Architecture {
    let obs_dim = rng.random_range(1..=7);
    let depth = rng.random_range(1..=2);
    let hidden = (0..depth).map(|_| rng.random_range(2..=8)).collect();
    let mut arch = Architecture::new(obs_dim, hidden, Activation::Tanh);
    arch.heads = rng.random_range(1..=3);
    arch
}

/// Seeded initialization plus Gaussian noise so the policy is far from uniform.
pub fn random_params(arch: Architecture, rng: &mut impl Rng, noise: f64) -> ModelParams {
    let mut p = ModelParams::init(arch, rng.random());
    let normal = Normal::new(0.0, noise).unwrap();
    for v in p.as_mut_slice() {
        *v += normal.sample(rng);
    }
    p
}

pub fn random_obs(dim: usize, rng: &mut impl Rng) -> Vec<f64> {
    (0..dim).map(|_| rng.random::<f64>()).collect()
}

pub fn random_trajectory(arch: &Architecture, len: usize, rng: &mut impl Rng) -> Vec<Transition> {
    let mut current = random_obs(arch.obs_dim, rng);
    (0..len)
        .map(|_| {
            let next = random_obs(arch.obs_dim, rng);
            let t = Transition {
                obs: current.clone(),
                action: (0..arch.heads).map(|_| rng.random_range(0..2u8)).collect(),
                reward: -4.0 * rng.random::<f64>(),
                next_obs: next.clone(),
            };
            current = next;
            t
        })
        .collect()
}

pub fn random_loss_config(rng: &mut impl Rng) -> LossConfig {
    LossConfig {
        gamma: rng.random_range(0.5..0.999),
        horizon: rng.random_range(1..=6),
        value_coef: rng.random_range(0.1..1.0),
        entropy_coef: rng.random_range(0.0..0.1),
    }
}

pub struct GradientCheck {
    pub max_rel_error: f64,
    pub params: usize,
}

/// Compares the analytic gradient of the scalar loss with central
/// differences, component by component. The relative error of a component is
/// `|a - n| / max(|a|, |n|, floor)`; the floor keeps components whose true
/// value is zero from dividing round-off by round-off.
pub fn gradient_check(params: &ModelParams, traj: &[Transition], cfg: &LossConfig) -> GradientCheck {
    const H: f64 = 1e-5;
    const FLOOR: f64 = 1e-6;
    let (loss, grad) = scalar_loss_and_grad(params, traj, cfg).unwrap();
    assert_eq!(loss, scalar_loss(params, traj, cfg).unwrap());
    let mut probe = params.clone();
    let mut worst = 0.0f64;
    for i in 0..params.len() {
        let w = params.as_slice()[i];
        probe.as_mut_slice()[i] = w + H;
        let up = scalar_loss(&probe, traj, cfg).unwrap();
        probe.as_mut_slice()[i] = w - H;
        let down = scalar_loss(&probe, traj, cfg).unwrap();
        probe.as_mut_slice()[i] = w;
        let numeric = (up - down) / (2.0 * H);
        let rel = (grad[i] - numeric).abs() / grad[i].abs().max(numeric.abs()).max(FLOOR);
        worst = worst.max(rel);
    }
    GradientCheck { max_rel_error: worst, params: params.len() }
}

/// One random (network, trajectory, loss) instance for gradient checking.
pub fn gradient_instance(seed: u64) -> (ModelParams, Vec<Transition>, LossConfig) {
    let mut r = rng(seed);
    let arch = random_architecture(&mut r);
    let params = random_params(arch.clone(), &mut r, 0.5);
    let len = r.random_range(1..=12);
    let traj = random_trajectory(&arch, len, &mut r);
    let cfg = random_loss_config(&mut r);
    (params, traj, cfg)
}

/// Exhaustive minimum of the within-cluster sum of squares over all
/// partitions into at most two groups.
pub fn brute_force_two_means(points: &[Vec<f64>]) -> f64 {
    let n = points.len();
    let mut best = f64::INFINITY;
    for mask in 0u32..(1 << (n - 1)) {
        let mut total = 0.0;
        for group in [0u32, 1] {
            let members: Vec<&Vec<f64>> =
                (0..n).filter(|&i| ((mask >> i) & 1) == group).map(|i| &points[i]).collect();
            if members.is_empty() {
                continue;
            }
            let dim = members[0].len();
            for j in 0..dim {
                let mean = members.iter().map(|p| p[j]).sum::<f64>() / members.len() as f64;
                total += members.iter().map(|p| (p[j] - mean).powi(2)).sum::<f64>();
            }
        }
        best = best.min(total);
    }
    best
}

pub fn random_points(rng: &mut impl Rng, n: usize, dim: usize) -> Vec<Vec<f64>> {
    (0..n).map(|_| (0..dim).map(|_| rng.random_range(-5.0..5.0)).collect()).collect()
}

pub struct EpisodeAudit {
    pub steps: usize,
    pub spawned: usize,
    pub completed: usize,
    pub conservation_violations: usize,
    pub crossing_green_violations: usize,
    pub green_duration_violations: usize,
    pub yellow_duration_violations: usize,
    pub phase_changes: usize,
}

/// Run one seeded 3x3 episode under uniformly random actions and check the
/// invariants after every step.
pub fn audit_random_episode(seed: u64, steps: usize, inflow: f64) -> EpisodeAudit {
    use hfrl::sim::{DemandSpec, Light, NetworkSpec, Phase, SimState};

    let mut sim = SimState::build(&NetworkSpec::grid3x3()).unwrap();
    sim.schedule_demand(&DemandSpec::uniform(inflow), seed, steps as f64).unwrap();
    let timing = sim.network().spec.signal.clone();
    let n = sim.intersection_count();
    let mut r = rng(seed.wrapping_mul(31).wrapping_add(7));
    let mut audit = EpisodeAudit {
        steps,
        spawned: 0,
        completed: 0,
        conservation_violations: 0,
        crossing_green_violations: 0,
        green_duration_violations: 0,
        yellow_duration_violations: 0,
        phase_changes: 0,
    };
    for _ in 0..steps {
        let actions: Vec<u8> = (0..n).map(|_| r.random_range(0..2u8)).collect();
        let report = sim.step(&actions).unwrap();
        let on_lanes: usize = (0..sim.network().lane_count).map(|l| sim.lane_len(l)).sum();
        if sim.spawned() != sim.active_count() + sim.completed().len() + sim.pending_count()
            || on_lanes != sim.active_count()
            || sim.active_vehicles().count() != sim.active_count()
        {
            audit.conservation_violations += 1;
        }
        for i in 0..n {
            let net = sim.network();
            let green = |vertical: bool| {
                net.intersections[i]
                    .inbound
                    .iter()
                    .any(|&l| net.links[l].heading.is_vertical() == vertical && sim.light(i, l) == Light::Green)
            };
            if green(true) && green(false) {
                audit.crossing_green_violations += 1;
            }
            let s = sim.signal(i).unwrap();
            if s.phase.is_green() && s.time_in_phase > timing.max_green + 1e-9 {
                audit.green_duration_violations += 1;
            }
        }
        for c in &report.phase_changes {
            audit.phase_changes += 1;
            match c.from {
                Phase::NsGreen | Phase::EwGreen => {
                    if c.duration + 1e-9 < timing.min_green || c.duration > timing.max_green + 1e-9 {
                        audit.green_duration_violations += 1;
                    }
                }
                Phase::NsYellow | Phase::EwYellow => {
                    if (c.duration - timing.yellow).abs() > 1e-9 {
                        audit.yellow_duration_violations += 1;
                    }
                }
            }
        }
    }
    audit.spawned = sim.spawned();
    audit.completed = sim.completed().len();
    audit
}

impl EpisodeAudit {
    pub fn clean(&self) -> bool {
        self.conservation_violations == 0
            && self.crossing_green_violations == 0
            && self.green_duration_violations == 0
            && self.yellow_duration_violations == 0
    }
}
