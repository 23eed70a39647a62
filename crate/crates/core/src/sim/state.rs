//! Mutable simulation state and the queue-server step.

use std::collections::VecDeque;
use std::sync::Arc;

use serde::Serialize;

use super::demand::{self, DemandSpec, Spawn};
use super::network::{LinkId, Network, NetworkSpec};
use super::signal::{Light, PhaseChange, SignalState};
use crate::error::{Error, Result};

/// Speed at or below which a vehicle counts as halted, m/s.
pub const HALT_SPEED: f64 = 0.1;
const EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct VehicleId(pub u32);

#[derive(Debug, Clone)]
pub struct Vehicle {
    pub id: VehicleId,
    pub route: Vec<LinkId>,
    /// Index into `route` of the link currently occupied.
    pub route_pos: usize,
    pub lane: usize,
    /// Distance from the upstream end of the lane, meters.
    pub position: f64,
    pub speed: f64,
    /// Time the vehicle actually entered the network.
    pub depart_time: f64,
    pub waiting_steps: u32,
}

impl Vehicle {
    pub fn link(&self) -> LinkId {
        self.route[self.route_pos]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CompletedTrip {
    pub id: VehicleId,
    pub depart_time: f64,
    pub arrival_time: f64,
    pub waiting_steps: u32,
}

impl CompletedTrip {
    pub fn travel_time(&self) -> f64 {
        self.arrival_time - self.depart_time
    }
}

#[derive(Debug, Clone, Default)]
struct LaneState {
    /// Vehicle slots ordered from the stop line backwards.
    queue: VecDeque<usize>,
    /// Fractional discharge allowance accumulated under green.
    credit: f64,
}

#[derive(Debug, Clone, Default)]
pub struct StepReport {
    pub phase_changes: Vec<PhaseChange>,
    /// Vehicles discharged across each intersection this step.
    pub discharged: Vec<u32>,
    pub completed: u32,
}

/// Full network state: lanes, signals, in-flight and pending vehicles, clock.
#[derive(Debug, Clone)]
pub struct SimState {
    net: Arc<Network>,
    steps: u64,
    lanes: Vec<LaneState>,
    signals: Vec<SignalState>,
    slots: Vec<Option<Vehicle>>,
    free_slots: Vec<usize>,
    active: usize,
    next_id: u32,
    schedule: Vec<Spawn>,
    next_spawn: usize,
    pending: Vec<VecDeque<usize>>,
    pending_total: usize,
    spawned: usize,
    completed: Vec<CompletedTrip>,
    vehicle_steps: u64,
    /// Clock time of the last discharge (or green onset) per intersection.
    last_activity: Vec<f64>,
    all_red: bool,
}

impl SimState {
    /// Empty network with every signal at the start of NS green.
    pub fn build(spec: &NetworkSpec) -> Result<Self> {
        Ok(Self::new(Arc::new(Network::build(spec)?)))
    }

    pub fn new(net: Arc<Network>) -> Self {
        let n = net.intersections.len();
        Self {
            steps: 0,
            lanes: vec![LaneState::default(); net.lane_count],
            signals: vec![SignalState::new(&net.spec.signal); n],
            slots: Vec::new(),
            free_slots: Vec::new(),
            active: 0,
            next_id: 0,
            schedule: Vec::new(),
            next_spawn: 0,
            pending: vec![VecDeque::new(); net.lane_count],
            pending_total: 0,
            spawned: 0,
            completed: Vec::new(),
            vehicle_steps: 0,
            last_activity: vec![0.0; n],
            all_red: false,
            net,
        }
    }

    /// Replace the spawn schedule with seeded arrivals up to `horizon` seconds.
    pub fn schedule_demand(&mut self, demand: &DemandSpec, seed: u64, horizon: f64) -> Result<()> {
        self.schedule = demand::schedule(&self.net, demand, seed, horizon)?;
        self.next_spawn = 0;
        Ok(())
    }

    pub fn network(&self) -> &Network {
        &self.net
    }

    pub fn network_arc(&self) -> Arc<Network> {
        Arc::clone(&self.net)
    }

    pub fn intersection_count(&self) -> usize {
        self.signals.len()
    }

    pub fn clock(&self) -> f64 {
        self.steps as f64 * self.net.spec.dt
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn signal(&self, intersection: usize) -> Result<&SignalState> {
        self.signals.get(intersection).ok_or(Error::UnknownIntersection(intersection))
    }

    pub fn signals(&self) -> &[SignalState] {
        &self.signals
    }

    /// Hold every signal at red regardless of phase, for what-if runs.
    pub fn set_all_red(&mut self, on: bool) {
        self.all_red = on;
    }

    pub fn light(&self, intersection: usize, link: LinkId) -> Light {
        if self.all_red {
            return Light::Red;
        }
        self.signals[intersection].phase.light_for(self.net.links[link].heading)
    }

    /// Seconds since the last discharge at `intersection`, or since its green began.
    pub fn gap_since_activity(&self, intersection: usize) -> f64 {
        self.clock() - self.last_activity[intersection]
    }

    pub fn spawned(&self) -> usize {
        self.spawned
    }

    pub fn active_count(&self) -> usize {
        self.active
    }

    pub fn pending_count(&self) -> usize {
        self.pending_total
    }

    pub fn completed(&self) -> &[CompletedTrip] {
        &self.completed
    }

    /// Sum over elapsed steps of vehicles present in the network.
    pub fn vehicle_steps(&self) -> u64 {
        self.vehicle_steps
    }

    pub fn active_vehicles(&self) -> impl Iterator<Item = &Vehicle> {
        self.slots.iter().flatten()
    }

    pub fn lane_vehicles(&self, lane: usize) -> impl Iterator<Item = &Vehicle> + '_ {
        self.lanes[lane].queue.iter().map(|s| self.slots[*s].as_ref().expect("queued slot is live"))
    }

    pub fn lane_len(&self, lane: usize) -> usize {
        self.lanes[lane].queue.len()
    }

    fn has_room(&self, lane: usize) -> bool {
        let q = &self.lanes[lane].queue;
        q.len() < self.net.lane_capacity()
            && q.back().is_none_or(|s| {
                self.slots[*s].as_ref().unwrap().position + EPS >= self.net.spec.jam_spacing
            })
    }

    /// Least-loaded lane of `link` that can accept a vehicle at its upstream end.
    fn lane_with_room(&self, link: LinkId) -> Option<usize> {
        self.net.links[link]
            .lane_ids()
            .filter(|l| self.has_room(*l))
            .min_by_key(|l| (self.lanes[*l].queue.len(), *l))
    }

    fn alloc(&mut self, v: Vehicle) -> usize {
        self.active += 1;
        match self.free_slots.pop() {
            Some(s) => {
                self.slots[s] = Some(v);
                s
            }
            None => {
                self.slots.push(Some(v));
                self.slots.len() - 1
            }
        }
    }

    fn new_vehicle(&mut self, route: Vec<LinkId>, lane: usize, position: f64, speed: f64) -> VehicleId {
        let id = VehicleId(self.next_id);
        self.next_id += 1;
        let depart_time = self.clock();
        let slot = self.alloc(Vehicle {
            id,
            route,
            route_pos: 0,
            lane,
            position,
            speed,
            depart_time,
            waiting_steps: 0,
        });
        self.lanes[lane].queue.push_back(slot);
        id
    }

    /// Place a vehicle directly on a lane, continuing straight to the boundary.
    ///
    /// The lane is kept ordered by position; placing a vehicle closer than jam
    /// spacing to a neighbour is rejected. Counts as a spawn.
    pub fn place_vehicle(&mut self, link: LinkId, lane_offset: usize, position: f64, speed: f64) -> Result<VehicleId> {
        let l = self.net.links.get(link).ok_or_else(|| Error::InvalidArgument(format!("no link {link}")))?;
        if lane_offset >= l.lanes || !(0.0..=l.length).contains(&position) {
            return Err(Error::InvalidArgument("lane or position out of range".into()));
        }
        let lane = l.first_lane + lane_offset;
        let spacing = self.net.spec.jam_spacing;
        if self.lane_vehicles(lane).any(|v| (v.position - position).abs() + EPS < spacing)
            || self.lanes[lane].queue.len() >= self.net.lane_capacity()
        {
            return Err(Error::InvalidArgument("lane position already taken".into()));
        }
        let route = demand::straight_route(&self.net, link);
        let id = self.new_vehicle(route, lane, position, speed.clamp(0.0, self.net.spec.speed_limit));
        let slot = self.lanes[lane].queue.pop_back().unwrap();
        let at = self
            .lanes[lane]
            .queue
            .iter()
            .position(|s| self.slots[*s].as_ref().unwrap().position < position)
            .unwrap_or(self.lanes[lane].queue.len());
        self.lanes[lane].queue.insert(at, slot);
        self.spawned += 1;
        Ok(id)
    }

    /// Advance the simulation by one `dt` with one binary action per intersection.
    pub fn step(&mut self, actions: &[u8]) -> Result<StepReport> {
        let n = self.signals.len();
        if actions.len() != n {
            return Err(Error::ActionCount { expected: n, actual: actions.len() });
        }
        let net = Arc::clone(&self.net);
        let spec = &net.spec;
        let dt = spec.dt;
        let clock = self.clock();
        let mut report = StepReport { discharged: vec![0; n], ..Default::default() };

        for (i, signal) in self.signals.iter_mut().enumerate() {
            if let Some((from, duration, forced)) = signal.apply(actions[i] == 1) {
                report.phase_changes.push(PhaseChange { intersection: i, from, duration, forced });
                if signal.phase.is_green() {
                    self.last_activity[i] = clock;
                }
            }
        }

        while let Some(spawn) = self.schedule.get(self.next_spawn) {
            if spawn.time >= clock + dt {
                break;
            }
            self.pending[spawn.lane].push_back(self.next_spawn);
            self.pending_total += 1;
            self.spawned += 1;
            self.next_spawn += 1;
        }

        self.discharge(&net, clock, &mut report);

        for &entry in &net.entries {
            for lane in net.links[entry].lane_ids() {
                while let Some(&idx) = self.pending[lane].front() {
                    if !self.has_room(lane) {
                        break;
                    }
                    self.pending[lane].pop_front();
                    self.pending_total -= 1;
                    let route = self.schedule[idx].route.clone();
                    self.new_vehicle(route, lane, 0.0, 0.0);
                }
            }
        }

        self.vehicle_steps += self.active as u64;
        self.advance_vehicles(&net, clock, &mut report);

        self.steps += 1;
        for s in &mut self.signals {
            s.tick(dt);
        }
        Ok(report)
    }

    fn discharge(&mut self, net: &Network, clock: f64, report: &mut StepReport) {
        let spec = &net.spec;
        let per_step = spec.saturation_flow * spec.dt / 3600.0;
        let cap = per_step.max(1.0);
        for i in 0..net.intersections.len() {
            for &link in &net.intersections[i].inbound {
                let green = self.light(i, link) == Light::Green;
                for lane in net.links[link].lane_ids() {
                    if !green {
                        self.lanes[lane].credit = 0.0;
                        continue;
                    }
                    let credit = (self.lanes[lane].credit + per_step).min(cap);
                    self.lanes[lane].credit = credit;
                    while self.lanes[lane].credit + EPS >= 1.0 {
                        let Some(&slot) = self.lanes[lane].queue.front() else { break };
                        let v = self.slots[slot].as_ref().unwrap();
                        if v.position + EPS < spec.lane_length {
                            break;
                        }
                        let next_link = v.route[v.route_pos + 1];
                        let Some(target) = self.lane_with_room(next_link) else { break };
                        self.lanes[lane].queue.pop_front();
                        let v = self.slots[slot].as_mut().unwrap();
                        v.route_pos += 1;
                        v.lane = target;
                        v.position = 0.0;
                        self.lanes[target].queue.push_back(slot);
                        self.lanes[lane].credit -= 1.0;
                        self.last_activity[i] = clock;
                        report.discharged[i] += 1;
                    }
                }
            }
        }
    }

    fn advance_vehicles(&mut self, net: &Network, clock: f64, report: &mut StepReport) {
        let spec = &net.spec;
        let dt = spec.dt;
        let reach = spec.speed_limit * dt;
        for lane in 0..self.lanes.len() {
            let exit = net.links[net.lane_link[lane]].is_exit();
            let mut ahead: Option<f64> = None;
            let mut finished = 0;
            for k in 0..self.lanes[lane].queue.len() {
                let slot = self.lanes[lane].queue[k];
                let v = self.slots[slot].as_mut().unwrap();
                let limit = ahead.map_or(spec.lane_length, |p| p - spec.jam_spacing);
                let new = (v.position + reach).min(limit).max(v.position);
                v.speed = (new - v.position) / dt;
                v.position = new;
                if v.speed <= HALT_SPEED {
                    v.waiting_steps += 1;
                }
                if exit && new + EPS >= spec.lane_length {
                    finished += 1;
                    ahead = None;
                } else {
                    ahead = Some(new);
                }
            }
            for _ in 0..finished {
                let slot = self.lanes[lane].queue.pop_front().unwrap();
                let v = self.slots[slot].take().unwrap();
                self.free_slots.push(slot);
                self.active -= 1;
                self.completed.push(CompletedTrip {
                    id: v.id,
                    depart_time: v.depart_time,
                    arrival_time: clock + dt,
                    waiting_steps: v.waiting_steps,
                });
                report.completed += 1;
            }
        }
    }
}
