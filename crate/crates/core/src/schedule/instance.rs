use std::collections::{BTreeMap, BTreeSet, HashMap};

use num_rational::Ratio;
use thiserror::Error;

use crate::ids::{is_fact_constant, RouteId, StreetId, VehicleId};
use crate::net::{Band, Network, Step, TrafficBands};
use crate::routes::{Route, RouteBounds};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum InstanceError {
    #[error("vehicle {0}, route {1}: inconsistent bounds: {2}")]
    InconsistentBounds(VehicleId, RouteId, String),
    #[error("vehicle {0}: {1}")]
    BadVehicle(VehicleId, String),
    #[error("unknown street {0}")]
    UnknownStreet(StreetId),
    #[error("duplicate route id {0}")]
    DuplicateRoute(RouteId),
    #[error("duplicate vehicle id {0}")]
    DuplicateVehicle(VehicleId),
    #[error("{0:?} is not a valid fact constant")]
    InvalidIdentifier(String),
    #[error("quantum must be positive")]
    BadQuantum,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum VehicleKind {
    /// Needs a route from the optimizer.
    Controlled,
    /// Already committed to a route; only tracked.
    Simulated,
}

impl VehicleKind {
    pub fn fact_name(self) -> &'static str {
        match self {
            VehicleKind::Controlled => "con",
            VehicleKind::Simulated => "sim",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub route: Route,
    pub bounds: RouteBounds,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Vehicle {
    pub id: VehicleId,
    pub kind: VehicleKind,
    pub origin: StreetId,
    pub destination: StreetId,
    pub candidates: Vec<Candidate>,
    /// For simulated vehicles: enter/exit step per remaining street, with the
    /// current street entered at 0.
    pub fixed_times: Option<Vec<(Step, Step)>>,
}

impl Vehicle {
    pub fn controlled(id: impl Into<VehicleId>, candidates: Vec<Candidate>) -> Self {
        let (origin, destination) = candidates
            .first()
            .map(|c| (c.route.origin().clone(), c.route.destination().clone()))
            .unwrap_or_else(|| (StreetId::new(""), StreetId::new("")));
        Self {
            id: id.into(),
            kind: VehicleKind::Controlled,
            origin,
            destination,
            candidates,
            fixed_times: None,
        }
    }

    pub fn simulated(id: impl Into<VehicleId>, route: Route, times: Vec<(Step, Step)>) -> Self {
        Self {
            id: id.into(),
            kind: VehicleKind::Simulated,
            origin: route.origin().clone(),
            destination: route.destination().clone(),
            candidates: vec![Candidate {
                bounds: RouteBounds::fixed(&times),
                route,
            }],
            fixed_times: Some(times),
        }
    }

    pub fn is_controlled(&self) -> bool {
        self.kind == VehicleKind::Controlled
    }
}

/// Per-street tables of an instance.
#[derive(Debug, Clone, PartialEq)]
pub struct StreetInfo {
    pub id: StreetId,
    pub capacity: u32,
    /// Steps to traverse under low, medium and heavy traffic.
    pub travel: [Step; 3],
    /// Steps to clear the street when congested.
    pub max_travel: Step,
    /// `[min, max)` occupancy per band; heavy has no upper end.
    pub thresholds: [(Ratio<u64>, Option<Ratio<u64>>); 3],
    pub roundabout: Option<usize>,
}

impl StreetInfo {
    pub fn travel_time(&self, band: Band) -> Step {
        self.travel[band as usize]
    }

    /// Travel steps for an occupancy, read off the threshold table.
    pub fn travel_for_occupancy(&self, occupancy: i64) -> Step {
        let n = Ratio::from_integer(occupancy.max(0) as u64);
        if occupancy >= 0 && n >= self.thresholds[2].0 {
            self.travel[2]
        } else if occupancy >= 0 && n >= self.thresholds[1].0 && Some(n) < self.thresholds[1].1 {
            self.travel[1]
        } else {
            self.travel[0]
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoundaboutInfo {
    pub id: crate::ids::RoundaboutId,
    pub capacity: u32,
    /// Member streets present in the instance.
    pub members: Vec<usize>,
}

/// One optimization problem: the street tables every candidate touches,
/// the vehicles, and the time grid.
#[derive(Debug, Clone)]
pub struct Instance {
    pub(crate) streets: Vec<StreetInfo>,
    pub(crate) street_index: HashMap<StreetId, usize>,
    pub(crate) links: BTreeSet<(usize, usize)>,
    pub(crate) roundabouts: Vec<RoundaboutInfo>,
    pub(crate) vehicles: Vec<Vehicle>,
    /// Street indices per vehicle per candidate.
    pub(crate) routes: Vec<Vec<Vec<usize>>>,
    pub(crate) horizon: Step,
    pub(crate) quantum: u32,
    pub(crate) bands: TrafficBands,
    pub(crate) strict_capacity: bool,
}

/// Builds the instance tables. Vehicle ids, route ids and street ids must
/// all be valid fact constants, route ids unique across vehicles.
pub fn build_instance(network: &Network, vehicles: Vec<Vehicle>, quantum: u32) -> Result<Instance, InstanceError> {
    if quantum == 0 {
        return Err(InstanceError::BadQuantum);
    }
    let check_id = |s: &str| {
        if is_fact_constant(s) {
            Ok(())
        } else {
            Err(InstanceError::InvalidIdentifier(s.to_owned()))
        }
    };
    let mut used: BTreeSet<usize> = BTreeSet::new();
    let mut seen_routes = BTreeSet::new();
    let mut seen_vehicles = BTreeSet::new();
    for v in &vehicles {
        check_id(v.id.as_str())?;
        if !seen_vehicles.insert(v.id.clone()) {
            return Err(InstanceError::DuplicateVehicle(v.id.clone()));
        }
        let bad = |why: &str| InstanceError::BadVehicle(v.id.clone(), why.to_owned());
        match v.kind {
            VehicleKind::Controlled if v.candidates.is_empty() => return Err(bad("no candidate route")),
            VehicleKind::Simulated if v.candidates.len() != 1 => {
                return Err(bad("simulated vehicle needs exactly one route"))
            }
            _ => {}
        }
        if v.kind == VehicleKind::Simulated {
            let times = v.fixed_times.as_ref().ok_or_else(|| bad("simulated vehicle without times"))?;
            if times.len() != v.candidates[0].route.streets.len() {
                return Err(bad("fixed times do not cover the route"));
            }
        }
        for c in &v.candidates {
            check_id(c.route.id.as_str())?;
            if !seen_routes.insert(c.route.id.clone()) {
                return Err(InstanceError::DuplicateRoute(c.route.id.clone()));
            }
            if c.route.streets.is_empty()
                || c.route.origin() != &v.origin
                || c.route.destination() != &v.destination
            {
                return Err(bad("candidate does not run from origin to destination"));
            }
            if c.bounds.len() != c.route.streets.len() {
                return Err(InstanceError::InconsistentBounds(
                    v.id.clone(),
                    c.route.id.clone(),
                    "bounds do not match the route length".into(),
                ));
            }
            c.bounds
                .validate()
                .map_err(|e| InstanceError::InconsistentBounds(v.id.clone(), c.route.id.clone(), e))?;
            for s in &c.route.streets {
                check_id(s.as_str())?;
                used.insert(network.index_of(s).ok_or_else(|| InstanceError::UnknownStreet(s.clone()))?);
            }
        }
    }

    let bands = network.bands().clone();
    // network index -> instance index; both sorted by street id
    let net_to_inst: BTreeMap<usize, usize> = used.iter().enumerate().map(|(i, &n)| (n, i)).collect();
    let mut roundabouts: Vec<RoundaboutInfo> = Vec::new();
    let mut streets = Vec::with_capacity(used.len());
    for &n in &used {
        let s = network.street(n);
        let capacity = network.capacity(n);
        let travel = Band::ALL.map(|b| network.travel_steps(n, b, quantum));
        let roundabout = s.roundabout.as_ref().map(|rid| {
            match roundabouts.iter().position(|r| &r.id == rid) {
                Some(i) => i,
                None => {
                    let r = network.roundabouts().iter().find(|r| &r.id == rid).expect("roundabout in network");
                    roundabouts.push(RoundaboutInfo {
                        id: rid.clone(),
                        capacity: r.capacity,
                        members: Vec::new(),
                    });
                    roundabouts.len() - 1
                }
            }
        });
        if let Some(r) = roundabout {
            roundabouts[r].members.push(streets.len());
        }
        streets.push(StreetInfo {
            id: s.id.clone(),
            capacity,
            travel,
            max_travel: travel[Band::Heavy as usize],
            thresholds: Band::ALL.map(|b| bands.threshold(capacity, b)),
            roundabout,
        });
    }
    let street_index = streets.iter().enumerate().map(|(i, s)| (s.id.clone(), i)).collect();
    let mut links = BTreeSet::new();
    for (&n, &i) in &net_to_inst {
        for m in network.successors(n) {
            if let Some(&j) = net_to_inst.get(m) {
                links.insert((i, j));
            }
        }
    }
    let routes: Vec<Vec<Vec<usize>>> = vehicles
        .iter()
        .map(|v| {
            v.candidates
                .iter()
                .map(|c| {
                    c.route
                        .streets
                        .iter()
                        .map(|s| net_to_inst[&network.index_of(s).unwrap()])
                        .collect()
                })
                .collect()
        })
        .collect();
    let horizon = vehicles
        .iter()
        .flat_map(|v| v.candidates.iter())
        .filter_map(|c| c.bounds.max_exit.iter().max().copied())
        .max()
        .unwrap_or(0);
    Ok(Instance {
        streets,
        street_index,
        links,
        roundabouts,
        vehicles,
        routes,
        horizon,
        quantum,
        bands,
        strict_capacity: false,
    })
}

impl Instance {
    /// Extends the street capacity constraint to simulated vehicles' enter
    /// events as well.
    pub fn with_strict_capacity(mut self, strict: bool) -> Self {
        self.strict_capacity = strict;
        self
    }

    /// Raises every street and roundabout capacity by `extra`, with the band
    /// thresholds moving along.
    pub fn with_extra_capacity(mut self, extra: u32) -> Self {
        for s in &mut self.streets {
            s.capacity += extra;
            s.thresholds = Band::ALL.map(|b| self.bands.threshold(s.capacity, b));
        }
        for r in &mut self.roundabouts {
            r.capacity += extra;
        }
        self
    }

    pub fn strict_capacity(&self) -> bool {
        self.strict_capacity
    }

    pub fn horizon(&self) -> Step {
        self.horizon
    }

    /// Overrides the horizon, e.g. to test instances whose time grid is too
    /// short.
    pub fn with_horizon(mut self, horizon: Step) -> Self {
        self.horizon = horizon;
        self
    }

    pub fn quantum(&self) -> u32 {
        self.quantum
    }

    pub fn vehicles(&self) -> &[Vehicle] {
        &self.vehicles
    }

    pub fn streets(&self) -> &[StreetInfo] {
        &self.streets
    }

    pub fn street_index(&self, id: &StreetId) -> Option<usize> {
        self.street_index.get(id).copied()
    }

    pub fn street(&self, id: &StreetId) -> Option<&StreetInfo> {
        self.street_index(id).map(|i| &self.streets[i])
    }

    pub fn roundabouts(&self) -> &[RoundaboutInfo] {
        &self.roundabouts
    }

    pub fn links(&self) -> impl Iterator<Item = (&StreetId, &StreetId)> {
        self.links
            .iter()
            .map(|&(a, b)| (&self.streets[a].id, &self.streets[b].id))
    }

    pub fn has_link(&self, a: usize, b: usize) -> bool {
        self.links.contains(&(a, b))
    }

    pub fn bands(&self) -> &TrafficBands {
        &self.bands
    }

    /// Street indices of candidate `c` of vehicle `v`.
    pub fn route_streets(&self, v: usize, c: usize) -> &[usize] {
        &self.routes[v][c]
    }

    pub fn vehicle_index(&self, id: &VehicleId) -> Option<usize> {
        self.vehicles.iter().position(|v| &v.id == id)
    }

    /// Candidate index of `route` for vehicle `v`.
    pub fn candidate_index(&self, v: usize, route: &RouteId) -> Option<usize> {
        self.vehicles[v].candidates.iter().position(|c| &c.route.id == route)
    }
}
