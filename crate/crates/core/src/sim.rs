//! Mesoscopic simulation with a rolling-horizon route controller.
//!
//! Streets are FIFO buckets bounded by their capacity. A vehicle entering a
//! street may leave once the travel time for the street's congestion band at
//! entry has passed, and only if it is at the head of the queue and the next
//! street has room. The clock ticks in whole seconds.
//!
//! A vehicle is routed when it enters the network, i.e. once its origin has
//! room; vehicles entering in the same second are routed one at a time, in
//! arrival order. The optimized policy builds an instance from the live
//! state, with every vehicle on the network as a committed vehicle, and
//! solves it; the shortest policy takes the shortest route.

use std::collections::VecDeque;
use std::fmt::{self, Write};
use std::time::Duration;

use thiserror::Error;

use crate::ids::{RouteId, StreetId, VehicleId};
use crate::net::{ceil_tolerant, Band, Network, Step};
use crate::routes::{candidate_routes, enumerate_routes, Route, RouteBounds, RouteError, SearchConfig};
use crate::schedule::{build_instance, check_schedule, Candidate, InstanceError, Vehicle};
use crate::solver::{solve_exact, SolveError, SolveStatus, SolverConfig};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error(transparent)]
    Route(#[from] RouteError),
    #[error(transparent)]
    Instance(#[from] InstanceError),
    #[error("no vehicle moved for {timeout} s (at t = {clock} s, {remaining} vehicles left)")]
    Stalled { clock: u64, timeout: u64, remaining: usize },
    #[error("vehicle {0}: {1}")]
    BadDemand(VehicleId, String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DemandKind {
    /// Routed by the policy on arrival.
    Controlled,
    /// Drives a fixed route, or the shortest one when none is given.
    Simulated(Option<Vec<StreetId>>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Demand {
    pub id: VehicleId,
    pub origin: StreetId,
    pub destination: StreetId,
    /// Requested entry, seconds.
    pub arrival: u64,
    pub kind: DemandKind,
}

impl Demand {
    pub fn controlled(
        id: impl Into<VehicleId>,
        origin: impl Into<StreetId>,
        destination: impl Into<StreetId>,
        arrival: u64,
    ) -> Self {
        Self {
            id: id.into(),
            origin: origin.into(),
            destination: destination.into(),
            arrival,
            kind: DemandKind::Controlled,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PolicyKind {
    Optimized,
    Shortest,
}

impl PolicyKind {
    pub fn name(self) -> &'static str {
        match self {
            PolicyKind::Optimized => "optimized",
            PolicyKind::Shortest => "shortest",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Policy {
    pub kind: PolicyKind,
    pub solver: SolverConfig,
    pub search: SearchConfig,
    /// Seconds per optimizer step.
    pub quantum: u32,
}

impl Policy {
    pub fn new(kind: PolicyKind) -> Self {
        Self {
            kind,
            solver: SolverConfig::default(),
            search: SearchConfig::default(),
            quantum: 5,
        }
    }

    pub fn optimized() -> Self {
        Self::new(PolicyKind::Optimized)
    }

    pub fn shortest() -> Self {
        Self::new(PolicyKind::Shortest)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    /// Seconds without any movement before the run is declared stalled.
    pub stall_timeout: u64,
    /// Seeds the solver's tie-breaking.
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            stall_timeout: 3600,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventKind {
    /// Requested entry into the network.
    Arrive,
    Enter,
    Exit,
    /// Left the network at the end of the destination street.
    Finish,
}

impl EventKind {
    pub fn name(self) -> &'static str {
        match self {
            EventKind::Arrive => "arrive",
            EventKind::Enter => "enter",
            EventKind::Exit => "exit",
            EventKind::Finish => "finish",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Event {
    pub second: u64,
    pub kind: EventKind,
    pub vehicle: VehicleId,
    pub street: StreetId,
}

impl fmt::Display for Event {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {} {}", self.second, self.kind.name(), self.vehicle, self.street)
    }
}

/// Line-oriented record of everything that happened, in order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct EventLog {
    pub events: Vec<Event>,
}

impl fmt::Display for EventLog {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for e in &self.events {
            writeln!(f, "{e}")?;
        }
        Ok(())
    }
}

/// Per-vehicle trace.
#[derive(Debug, Clone, PartialEq)]
pub struct VehicleRecord {
    pub id: VehicleId,
    pub route: Vec<StreetId>,
    pub route_length: f64,
    pub requested: u64,
    pub entered: Option<u64>,
    pub finished: Option<u64>,
    /// (street, enter second, exit second).
    pub streets: Vec<(StreetId, u64, u64)>,
    /// Seconds spent able to leave a street but blocked.
    pub waiting: u64,
}

/// One controller call.
#[derive(Debug, Clone, PartialEq)]
pub struct SolveRecord {
    pub second: u64,
    /// Vehicles in the instance, committed and new.
    pub active: usize,
    /// `None` when the solver returned no schedule.
    pub status: Option<SolveStatus>,
    pub error: Option<SolveError>,
    pub elapsed: Duration,
    /// Rule violations of the returned schedule.
    pub violations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct KpiReport {
    pub total_duration: f64,
    pub avg_route_length: f64,
    pub avg_speed: f64,
    pub avg_duration: f64,
    pub avg_waiting_time: f64,
    pub avg_depart_delay: f64,
}

impl KpiReport {
    pub const ROWS: [&'static str; 6] = [
        "Total Duration [s]",
        "Avg. Route Length [m]",
        "Avg. Speed [m/s]",
        "Avg. Duration [s]",
        "Avg. Waiting Time [s]",
        "Avg. Depart Delay [s]",
    ];

    pub fn values(&self) -> [f64; 6] {
        [
            self.total_duration,
            self.avg_route_length,
            self.avg_speed,
            self.avg_duration,
            self.avg_waiting_time,
            self.avg_depart_delay,
        ]
    }

    fn from_values(v: [f64; 6]) -> Self {
        Self {
            total_duration: v[0],
            avg_route_length: v[1],
            avg_speed: v[2],
            avg_duration: v[3],
            avg_waiting_time: v[4],
            avg_depart_delay: v[5],
        }
    }

    /// KPIs of a finished run; all zero without vehicles.
    pub fn from_records(records: &[VehicleRecord]) -> Self {
        let done: Vec<&VehicleRecord> = records.iter().filter(|r| r.finished.is_some()).collect();
        if done.is_empty() {
            return Self::default();
        }
        let n = done.len() as f64;
        let duration = |r: &VehicleRecord| (r.finished.unwrap() - r.entered.unwrap()) as f64;
        let mean = |f: &dyn Fn(&VehicleRecord) -> f64| done.iter().map(|r| f(r)).sum::<f64>() / n;
        Self {
            total_duration: done.iter().map(|r| r.finished.unwrap()).max().unwrap() as f64,
            avg_route_length: mean(&|r| r.route_length),
            avg_speed: mean(&|r| r.route_length / duration(r).max(1.0)),
            avg_duration: mean(&duration),
            avg_waiting_time: mean(&|r| r.waiting as f64),
            avg_depart_delay: mean(&|r| (r.entered.unwrap() - r.requested) as f64),
        }
    }

    pub fn mean(reports: &[KpiReport]) -> Self {
        if reports.is_empty() {
            return Self::default();
        }
        let mut acc = [0.0; 6];
        for r in reports {
            for (a, v) in acc.iter_mut().zip(r.values()) {
                *a += v;
            }
        }
        Self::from_values(acc.map(|a| a / reports.len() as f64))
    }

    pub fn csv_header() -> String {
        Self::ROWS.join(",")
    }

    pub fn csv_row(&self) -> String {
        self.values().map(|v| format!("{v:.3}")).join(",")
    }
}

/// Renders reports as a key/value table, one column per report.
pub fn render_kpi_table(columns: &[(&str, &KpiReport)]) -> String {
    let width = KpiReport::ROWS.iter().map(|r| r.len()).max().unwrap_or(0);
    let mut out = format!("{:width$}", "KPI");
    for (name, _) in columns {
        write!(out, "  {name:>12}").unwrap();
    }
    out.push('\n');
    for (i, row) in KpiReport::ROWS.iter().enumerate() {
        write!(out, "{row:width$}").unwrap();
        for (_, r) in columns {
            write!(out, "  {:>12.2}", r.values()[i]).unwrap();
        }
        out.push('\n');
    }
    out
}

impl fmt::Display for KpiReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let width = Self::ROWS.iter().map(|r| r.len()).max().unwrap_or(0);
        for (row, v) in Self::ROWS.iter().zip(self.values()) {
            writeln!(f, "{row:width$}  {v:.2}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SimOutcome {
    pub kpis: KpiReport,
    pub log: EventLog,
    pub vehicles: Vec<VehicleRecord>,
    pub solves: Vec<SolveRecord>,
    /// Highest queue length seen per street, with the street's capacity.
    pub peak_load: Vec<(StreetId, u32, u32)>,
}

#[derive(Debug, Clone, Copy)]
struct Slot {
    vehicle: usize,
    earliest_exit: u64,
}

#[derive(Debug, Clone)]
struct Live {
    demand: Demand,
    origin: usize,
    record: VehicleRecord,
    /// Street indices; empty until routed.
    route: Vec<usize>,
    /// Planned steps per street of the route.
    plan: Vec<Step>,
    /// Index into `route` of the current street.
    pos: usize,
    moved_at: Option<u64>,
}

/// Picks the route of a vehicle about to enter the network.
pub type Router<'a> = dyn FnMut(&SimState<'_>, &Demand) -> Result<Routed, SimError> + 'a;

/// Live simulator state.
pub struct SimState<'n> {
    network: &'n Network,
    quantum: u32,
    pub clock: u64,
    queues: Vec<VecDeque<Slot>>,
    /// Vehicles waiting to enter their origin, in arrival order.
    waiting: VecDeque<usize>,
    vehicles: Vec<Live>,
    log: EventLog,
    peak: Vec<u32>,
}

impl<'n> SimState<'n> {
    /// Empty network; `quantum` converts planned steps to seconds.
    pub fn new(network: &'n Network, quantum: u32) -> Self {
        Self {
            network,
            quantum,
            clock: 0,
            queues: vec![VecDeque::new(); network.streets().len()],
            waiting: VecDeque::new(),
            vehicles: Vec::new(),
            log: EventLog::default(),
            peak: vec![0; network.streets().len()],
        }
    }

    pub fn network(&self) -> &'n Network {
        self.network
    }

    /// Vehicles currently on a street.
    pub fn in_network(&self) -> usize {
        self.queues.iter().map(VecDeque::len).sum()
    }

    /// Vehicles that have arrived but not entered yet.
    pub fn waiting(&self) -> usize {
        self.waiting.len()
    }

    pub fn queue_len(&self, street: &StreetId) -> Option<usize> {
        self.network.index_of(street).map(|i| self.queues[i].len())
    }

    pub fn log(&self) -> &EventLog {
        &self.log
    }

    fn emit(&mut self, kind: EventKind, v: usize, street: usize) {
        self.log.events.push(Event {
            second: self.clock,
            kind,
            vehicle: self.vehicles[v].record.id.clone(),
            street: self.network.street(street).id.clone(),
        });
    }

    /// Registers a vehicle requesting entry at the current second.
    pub fn arrive(&mut self, demand: &Demand) -> Result<(), SimError> {
        let origin = self
            .network
            .index_of(&demand.origin)
            .ok_or_else(|| SimError::Route(RouteError::UnknownStreet(demand.origin.clone())))?;
        if self.network.index_of(&demand.destination).is_none() {
            return Err(SimError::Route(RouteError::UnknownStreet(demand.destination.clone())));
        }
        self.vehicles.push(Live {
            demand: demand.clone(),
            origin,
            record: VehicleRecord {
                id: demand.id.clone(),
                route: Vec::new(),
                route_length: 0.0,
                requested: self.clock,
                entered: None,
                finished: None,
                streets: Vec::new(),
                waiting: 0,
            },
            route: Vec::new(),
            plan: Vec::new(),
            pos: 0,
            moved_at: None,
        });
        let v = self.vehicles.len() - 1;
        self.emit(EventKind::Arrive, v, origin);
        self.waiting.push_back(v);
        Ok(())
    }

    fn commit(&mut self, v: usize, routed: Routed) {
        let streets: Vec<usize> = routed
            .route
            .streets
            .iter()
            .map(|s| self.network.index_of(s).expect("route street in network"))
            .collect();
        let plan = routed.plan.unwrap_or_else(|| {
            streets
                .iter()
                .map(|&s| self.network.travel_steps(s, Band::Low, self.quantum))
                .collect()
        });
        let live = &mut self.vehicles[v];
        live.record.route = routed.route.streets;
        live.record.route_length = routed.route.length;
        live.route = streets;
        live.plan = plan;
    }

    fn travel_seconds(&self, street: usize, occupancy: u32) -> u64 {
        let s = self.network.street(street);
        let band = self.network.bands().band_for(self.network.capacity(street), occupancy);
        (ceil_tolerant(self.network.bands().travel_seconds(s.length, band)) as u64).max(1)
    }

    fn push(&mut self, v: usize, street: usize) {
        let occ = self.queues[street].len() as u32 + 1;
        let earliest_exit = self.clock + self.travel_seconds(street, occ);
        self.queues[street].push_back(Slot { vehicle: v, earliest_exit });
        self.peak[street] = self.peak[street].max(self.queues[street].len() as u32);
        let clock = self.clock;
        let live = &mut self.vehicles[v];
        live.moved_at = Some(clock);
        live.record.streets.push((self.network.street(street).id.clone(), clock, 0));
        self.emit(EventKind::Enter, v, street);
    }

    fn has_room(&self, street: usize) -> bool {
        (self.queues[street].len() as u32) < self.network.capacity(street)
    }

    /// Advances one second. A waiting vehicle is routed by `router` once its
    /// origin has room. Returns whether any vehicle moved.
    pub fn step(&mut self, router: &mut Router<'_>) -> Result<bool, SimError> {
        let t = self.clock;
        let mut any = false;
        loop {
            let mut changed = false;
            for s in 0..self.queues.len() {
                let Some(&head) = self.queues[s].front() else { continue };
                if head.earliest_exit > t || self.vehicles[head.vehicle].moved_at == Some(t) {
                    continue;
                }
                let v = head.vehicle;
                let live = &self.vehicles[v];
                let next = live.route.get(live.pos + 1).copied();
                if let Some(n) = next {
                    if !self.has_room(n) {
                        continue;
                    }
                }
                self.queues[s].pop_front();
                self.vehicles[v].record.streets.last_mut().unwrap().2 = t;
                self.emit(EventKind::Exit, v, s);
                match next {
                    Some(n) => {
                        self.vehicles[v].pos += 1;
                        self.push(v, n);
                    }
                    None => {
                        self.vehicles[v].record.finished = Some(t);
                        self.vehicles[v].moved_at = Some(t);
                        self.emit(EventKind::Finish, v, s);
                    }
                }
                changed = true;
            }
            let mut still = VecDeque::new();
            while let Some(v) = self.waiting.pop_front() {
                let origin = self.vehicles[v].origin;
                // FIFO per origin: nobody overtakes an earlier vehicle waiting
                // for the same street
                let blocked = still.iter().any(|&w: &usize| self.vehicles[w].origin == origin);
                if !blocked && self.has_room(origin) {
                    let demand = self.vehicles[v].demand.clone();
                    let routed = router(self, &demand)?;
                    self.commit(v, routed);
                    self.vehicles[v].record.entered = Some(t);
                    self.push(v, origin);
                    changed = true;
                } else {
                    still.push_back(v);
                }
            }
            self.waiting = still;
            any |= changed;
            if !changed {
                break;
            }
        }
        for q in &self.queues {
            for slot in q {
                if slot.earliest_exit <= t && self.vehicles[slot.vehicle].moved_at != Some(t) {
                    self.vehicles[slot.vehicle].record.waiting += 1;
                }
            }
        }
        for (s, q) in self.queues.iter().enumerate() {
            debug_assert!(q.len() as u32 <= self.network.capacity(s));
        }
        self.clock += 1;
        Ok(any)
    }

    /// Vehicles on the network as committed vehicles of an instance, with
    /// the time axis restarted now: the current street is entered at step 0.
    fn committed_vehicles(&self) -> Vec<Vehicle> {
        let q = self.quantum as u64;
        let mut out = Vec::new();
        for queue in &self.queues {
            for slot in queue {
                let live = &self.vehicles[slot.vehicle];
                let remaining = slot.earliest_exit.saturating_sub(self.clock);
                let first = remaining.div_ceil(q).max(1) as Step;
                let mut times = vec![(0, first)];
                let mut t = first;
                for &d in &live.plan[live.pos + 1..] {
                    times.push((t, t + d.max(1)));
                    t += d.max(1);
                }
                let rest = &live.route[live.pos..];
                let streets: Vec<StreetId> = rest.iter().map(|&i| self.network.street(i).id.clone()).collect();
                let length = rest.iter().map(|&i| self.network.street(i).length).sum();
                let route = Route::new(format!("{}_now", live.record.id), streets, length);
                out.push(Vehicle::simulated(live.record.id.clone(), route, times));
            }
        }
        out.sort_by(|a, b| a.id.cmp(&b.id));
        out
    }

    fn records(&self) -> Vec<VehicleRecord> {
        self.vehicles.iter().map(|l| l.record.clone()).collect()
    }

    fn remaining(&self) -> usize {
        self.vehicles.iter().filter(|l| l.record.finished.is_none()).count()
    }
}

/// Route and planned steps per street chosen for an arriving vehicle.
#[derive(Debug, Clone, PartialEq)]
pub struct Routed {
    pub route: Route,
    /// `None` when the policy made no timing plan.
    pub plan: Option<Vec<Step>>,
}

/// Routes arriving vehicles, one call per vehicle.
pub struct Controller {
    pub policy: Policy,
    pub solves: Vec<SolveRecord>,
}

impl Controller {
    pub fn new(policy: Policy) -> Self {
        Self {
            policy,
            solves: Vec::new(),
        }
    }

    /// Picks the route of a controlled vehicle entering now. Under the
    /// optimized policy, falls back to the shortest candidate when the solver
    /// returns no schedule.
    pub fn on_arrival(&mut self, state: &SimState<'_>, vehicle: &Demand) -> Result<Routed, SimError> {
        let net = state.network;
        if self.policy.kind == PolicyKind::Shortest {
            let route = enumerate_routes(net, &vehicle.origin, &vehicle.destination, 1)?.remove(0);
            return Ok(Routed { route, plan: None });
        }
        let q = self.policy.quantum;
        let candidates: Vec<Route> = candidate_routes(net, &vehicle.origin, &vehicle.destination, &self.policy.search)?
            .into_iter()
            .enumerate()
            .map(|(k, r)| r.with_id(format!("{}_r{k}", vehicle.id)))
            .collect();
        let mut vehicles = state.committed_vehicles();
        let others: Vec<&Route> = vehicles.iter().map(|v| &v.candidates[0].route).collect();
        let cands = candidates
            .iter()
            .map(|r| Candidate {
                bounds: RouteBounds::compute(net, r, &others, q),
                route: r.clone(),
            })
            .collect();
        vehicles.push(Vehicle::controlled(vehicle.id.clone(), cands));
        let active = vehicles.len();
        let instance = build_instance(net, vehicles, q)?;
        let result = solve_exact(&instance, &self.policy.solver);
        let mut record = SolveRecord {
            second: state.clock,
            active,
            status: None,
            error: None,
            elapsed: Duration::ZERO,
            violations: 0,
        };
        let routed = match result {
            Ok(res) => {
                record.status = Some(res.status);
                record.elapsed = res.elapsed;
                record.violations = check_schedule(&instance, &res.schedule).len();
                let vs = res.schedule.get(&vehicle.id).expect("schedule covers the new vehicle");
                let route = candidates
                    .iter()
                    .find(|r| r.id == vs.route)
                    .expect("chosen route is a candidate")
                    .clone();
                Routed {
                    route,
                    plan: Some(vs.times.iter().map(|t| t.exit - t.enter).collect()),
                }
            }
            Err(e) => {
                record.error = Some(e);
                Routed {
                    route: candidates[0].clone(),
                    plan: None,
                }
            }
        };
        self.solves.push(record);
        Ok(routed)
    }
}

fn resolve_fixed(network: &Network, d: &Demand, streets: &[StreetId]) -> Result<Route, SimError> {
    let r = Route::from_streets(network, RouteId::new(format!("{}_fixed", d.id)), streets.to_vec())
        .map_err(|e| SimError::BadDemand(d.id.clone(), e.to_string()))?;
    r.validate(network).map_err(|e| SimError::BadDemand(d.id.clone(), e))?;
    if r.origin() != &d.origin || r.destination() != &d.destination {
        return Err(SimError::BadDemand(d.id.clone(), "route does not join origin and destination".into()));
    }
    Ok(r)
}

/// Runs the demand through the network until every vehicle has left.
pub fn run_scenario(
    network: &Network,
    demand: &[Demand],
    policy: &Policy,
    config: &SimConfig,
) -> Result<SimOutcome, SimError> {
    let mut policy = policy.clone();
    policy.solver.seed = config.seed;
    let mut controller = Controller::new(policy);
    let mut order: Vec<usize> = (0..demand.len()).collect();
    // stable: ties keep demand order
    order.sort_by_key(|&i| demand[i].arrival);
    let mut next = 0;
    let mut state = SimState::new(network, controller.policy.quantum);
    let mut last_event = 0;
    let mut router = |state: &SimState<'_>, d: &Demand| -> Result<Routed, SimError> {
        match &d.kind {
            DemandKind::Controlled => controller.on_arrival(state, d),
            DemandKind::Simulated(Some(streets)) => Ok(Routed {
                route: resolve_fixed(network, d, streets)?,
                plan: None,
            }),
            DemandKind::Simulated(None) => Ok(Routed {
                route: enumerate_routes(network, &d.origin, &d.destination, 1)?.remove(0),
                plan: None,
            }),
        }
    };
    loop {
        let t = state.clock;
        while next < order.len() && demand[order[next]].arrival <= t {
            state.arrive(&demand[order[next]])?;
            next += 1;
            last_event = t;
        }
        if state.step(&mut router)? {
            last_event = t;
        }
        if next == order.len() && state.remaining() == 0 {
            break;
        }
        if state.clock - last_event > config.stall_timeout {
            return Err(SimError::Stalled {
                clock: state.clock,
                timeout: config.stall_timeout,
                remaining: state.remaining(),
            });
        }
    }
    let vehicles = state.records();
    Ok(SimOutcome {
        kpis: KpiReport::from_records(&vehicles),
        log: state.log.clone(),
        vehicles,
        solves: controller.solves,
        peak_load: (0..network.streets().len())
            .map(|s| (network.street(s).id.clone(), state.peak[s], network.capacity(s)))
            .collect(),
    })
}
