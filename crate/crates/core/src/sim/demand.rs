//! Seeded boundary demand: Poisson arrivals per entry lane with routes drawn
//! from turn ratios at spawn time.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use super::network::{Endpoint, LinkId, Network};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TurnRatios {
    pub straight: f64,
    pub right: f64,
    pub left: f64,
}

impl TurnRatios {
    /// Mixed through/right lane used on the synthetic grids.
    pub const GRID: TurnRatios = TurnRatios { straight: 0.9, right: 0.1, left: 0.0 };
    /// Calibrated-city mix.
    pub const URBAN: TurnRatios = TurnRatios { straight: 0.8, right: 0.15, left: 0.05 };
}

impl Default for TurnRatios {
    fn default() -> Self {
        Self::GRID
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Movement {
    Straight,
    Right,
    Left,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemandSpec {
    /// Vehicles per lane per hour at every boundary entry.
    pub inflow_per_lane: f64,
    #[serde(default)]
    pub turn_ratios: TurnRatios,
    /// Per-entry scale factors keyed by entry name (`A0-N`, ...).
    #[serde(default)]
    pub demand_multipliers: BTreeMap<String, f64>,
}

impl DemandSpec {
    pub fn uniform(inflow_per_lane: f64) -> Self {
        Self { inflow_per_lane, turn_ratios: TurnRatios::GRID, demand_multipliers: BTreeMap::new() }
    }

    pub fn with_multiplier(mut self, entry: &str, factor: f64) -> Self {
        self.demand_multipliers.insert(entry.to_string(), factor);
        self
    }

    pub fn validate(&self, net: &Network) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidDemand(msg));
        if !(self.inflow_per_lane >= 0.0) || !self.inflow_per_lane.is_finite() {
            return bad(format!("inflow must be non-negative, got {}", self.inflow_per_lane));
        }
        let t = self.turn_ratios;
        if [t.straight, t.right, t.left].iter().any(|x| !(*x >= 0.0)) {
            return bad("turn ratios must be non-negative".into());
        }
        if ((t.straight + t.right + t.left) - 1.0).abs() > 1e-9 {
            return bad("turn ratios must sum to 1".into());
        }
        for (name, factor) in &self.demand_multipliers {
            if net.entry_by_name(name).is_none() {
                return bad(format!("unknown entry {name}"));
            }
            if !(*factor >= 0.0) || !factor.is_finite() {
                return bad(format!("multiplier for {name} must be non-negative"));
            }
        }
        Ok(())
    }

    pub fn rate_for(&self, net: &Network, entry: LinkId) -> f64 {
        let m = self.demand_multipliers.get(&net.entry_name(entry)).copied().unwrap_or(1.0);
        self.inflow_per_lane * m
    }

    fn draw_movement(&self, rng: &mut impl Rng) -> Movement {
        let u: f64 = rng.random();
        let t = self.turn_ratios;
        if u < t.straight {
            Movement::Straight
        } else if u < t.straight + t.right {
            Movement::Right
        } else if t.left > 0.0 {
            Movement::Left
        } else {
            Movement::Straight
        }
    }
}

/// One scheduled insertion at a boundary lane.
#[derive(Debug, Clone, PartialEq)]
pub struct Spawn {
    /// Scheduled arrival at the boundary, seconds.
    pub time: f64,
    pub lane: usize,
    pub route: Vec<LinkId>,
}

/// Mean headway in seconds for a per-lane hourly flow.
pub fn mean_headway(inflow_per_lane: f64) -> f64 {
    3600.0 / inflow_per_lane
}

/// Follow straight-ahead from `link` until the network is left.
pub fn straight_route(net: &Network, link: LinkId) -> Vec<LinkId> {
    let mut route = vec![link];
    let mut current = link;
    while let Endpoint::Node(n) = net.links[current].to {
        current = net.outbound(n, net.links[current].heading);
        route.push(current);
    }
    route
}

/// Draw a route starting on `entry`, choosing a movement at every intersection.
pub fn draw_route(net: &Network, demand: &DemandSpec, entry: LinkId, rng: &mut impl Rng) -> Vec<LinkId> {
    // Four consecutive right turns loop around a block; cap the hops so every
    // route terminates, then go straight out.
    let max_hops = 4 * (net.spec.rows + net.spec.cols) + 4;
    let mut route = vec![entry];
    let mut current = entry;
    while let Endpoint::Node(n) = net.links[current].to {
        let heading = net.links[current].heading;
        let movement =
            if route.len() > max_hops { Movement::Straight } else { demand.draw_movement(rng) };
        let next_heading = match movement {
            Movement::Straight => heading,
            Movement::Right => heading.right(),
            Movement::Left => heading.left(),
        };
        current = net.outbound(n, next_heading);
        route.push(current);
    }
    route
}

/// Build the full spawn schedule up to `horizon` seconds, sorted by time then lane.
///
/// Every entry lane draws from its own ChaCha stream so adding demand at one
/// entry never perturbs another.
pub fn schedule(net: &Network, demand: &DemandSpec, seed: u64, horizon: f64) -> Result<Vec<Spawn>> {
    demand.validate(net)?;
    let mut spawns = Vec::new();
    for &entry in &net.entries {
        let rate = demand.rate_for(net, entry);
        for lane in net.links[entry].lane_ids() {
            if rate <= 0.0 {
                continue;
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(lane as u64);
            let exp = Exp::new(rate / 3600.0).expect("positive rate");
            let mut t = 0.0;
            loop {
                t += exp.sample(&mut rng);
                if t >= horizon {
                    break;
                }
                let route = draw_route(net, demand, entry, &mut rng);
                spawns.push(Spawn { time: t, lane, route });
            }
        }
    }
    spawns.sort_by(|a, b| a.time.total_cmp(&b.time).then(a.lane.cmp(&b.lane)));
    Ok(spawns)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::network::NetworkSpec;

    fn one_lane_net() -> Network {
        Network::build(&NetworkSpec::uniform(1, 1)).unwrap()
    }

    #[test]
    fn light_demand_headway() {
        assert_eq!(mean_headway(200.0), 18.0);
    }

    #[test]
    fn zero_inflow_never_spawns() {
        let net = one_lane_net();
        let s = schedule(&net, &DemandSpec::uniform(0.0), 7, 1e6).unwrap();
        assert!(s.is_empty());
    }

    #[test]
    fn poisson_counts_match_rate() {
        // 400 veh/h on one lane for 1000 s: Poisson mean 111.1, sd 10.5.
        let net = one_lane_net();
        let entry = net.entries[0];
        let lane = net.links[entry].first_lane;
        let mean = 400.0 * 1000.0 / 3600.0;
        let sd = f64::sqrt(mean);
        let seeds = 1000;
        let mut total = 0usize;
        for seed in 0..seeds {
            let spawns = schedule(&net, &DemandSpec::uniform(400.0), seed, 1000.0).unwrap();
            let count = spawns.iter().filter(|s| s.lane == lane).count();
            assert!((count as f64 - mean).abs() <= 4.5 * sd, "seed {seed}: {count}");
            total += count;
        }
        let empirical = total as f64 / seeds as f64;
        // standard error of the mean over 1000 seeds is ~0.33
        assert!((empirical - mean).abs() <= 3.0 * sd / (seeds as f64).sqrt(), "{empirical}");
    }

    #[test]
    fn schedule_is_deterministic_and_sorted() {
        let net = Network::build(&NetworkSpec::grid3x3()).unwrap();
        let d = DemandSpec::uniform(300.0);
        let a = schedule(&net, &d, 11, 600.0).unwrap();
        let b = schedule(&net, &d, 11, 600.0).unwrap();
        assert_eq!(a, b);
        assert!(a.windows(2).all(|w| w[0].time <= w[1].time));
        let c = schedule(&net, &d, 12, 600.0).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn routes_end_at_the_boundary() {
        let net = Network::build(&NetworkSpec::grid3x3()).unwrap();
        let d = DemandSpec { turn_ratios: TurnRatios::URBAN, ..DemandSpec::uniform(400.0) };
        for s in schedule(&net, &d, 3, 900.0).unwrap() {
            assert!(net.links[s.route[0]].is_entry());
            assert!(net.links[*s.route.last().unwrap()].is_exit());
            for w in s.route.windows(2) {
                assert_eq!(net.links[w[0]].to, net.links[w[1]].from);
            }
        }
    }

    #[test]
    fn multipliers_scale_one_entry_only() {
        let net = Network::build(&NetworkSpec::grid3x3()).unwrap();
        let base = DemandSpec::uniform(300.0);
        let doubled = base.clone().with_multiplier("A0-N", 2.0);
        let a = schedule(&net, &base, 5, 3600.0).unwrap();
        let b = schedule(&net, &doubled, 5, 3600.0).unwrap();
        let entry = net.entry_by_name("A0-N").unwrap();
        let lane = net.links[entry].first_lane;
        let count = |s: &[Spawn], keep: bool| s.iter().filter(|x| (x.lane == lane) == keep).count();
        assert_eq!(count(&a, false), count(&b, false));
        assert!(count(&b, true) as f64 > 1.5 * count(&a, true) as f64);
    }

    #[test]
    fn invalid_demand_rejected() {
        let net = one_lane_net();
        let mut d = DemandSpec::uniform(100.0);
        d.turn_ratios = TurnRatios { straight: 0.5, right: 0.1, left: 0.0 };
        assert!(d.validate(&net).is_err());
        let d = DemandSpec::uniform(100.0).with_multiplier("Z9-N", 2.0);
        assert!(d.validate(&net).is_err());
        assert!(DemandSpec::uniform(-1.0).validate(&net).is_err());
    }
}
