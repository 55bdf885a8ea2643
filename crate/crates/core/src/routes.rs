//! Candidate route search.
//!
//! Routes are enumerated shortest-first by a best-first search over partial
//! routes that keeps going after the destination is first reached. The
//! enumerated set is then split into groups of mutually dissimilar routes and
//! the shortest few of each group are kept. Entry/exit windows per street come
//! from two relaxed runs: an empty network, and one where every other known
//! route is fully occupied at once.

use std::cmp::{Ordering, Reverse};
use std::collections::{BTreeSet, BinaryHeap, HashMap};

use thiserror::Error;

use crate::ids::{RouteId, StreetId};
use crate::net::{Band, Network, Step};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RouteError {
    #[error("no route from {0} to {1}")]
    NoRoute(StreetId, StreetId),
    #[error("unknown street {0}")]
    UnknownStreet(StreetId),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Route {
    pub id: RouteId,
    pub streets: Vec<StreetId>,
    /// Meters.
    pub length: f64,
}

impl Route {
    pub fn new(id: impl Into<RouteId>, streets: Vec<StreetId>, length: f64) -> Self {
        Self {
            id: id.into(),
            streets,
            length,
        }
    }

    /// Builds a route from street ids, computing its length.
    pub fn from_streets(
        network: &Network,
        id: impl Into<RouteId>,
        streets: Vec<StreetId>,
    ) -> Result<Self, RouteError> {
        let mut length = 0.0;
        for s in &streets {
            length += network
                .by_id(s)
                .ok_or_else(|| RouteError::UnknownStreet(s.clone()))?
                .length;
        }
        Ok(Self::new(id, streets, length))
    }

    pub fn origin(&self) -> &StreetId {
        &self.streets[0]
    }

    pub fn destination(&self) -> &StreetId {
        self.streets.last().expect("route is never empty")
    }

    pub fn with_id(mut self, id: impl Into<RouteId>) -> Self {
        self.id = id.into();
        self
    }

    /// Checks link continuity, distinct streets and the stored length.
    pub fn validate(&self, network: &Network) -> Result<(), String> {
        if self.streets.is_empty() {
            return Err("empty route".into());
        }
        let mut idx = Vec::with_capacity(self.streets.len());
        for s in &self.streets {
            idx.push(network.index_of(s).ok_or_else(|| format!("unknown street {s}"))?);
        }
        let distinct: BTreeSet<_> = idx.iter().collect();
        if distinct.len() != idx.len() {
            return Err("route repeats a street".into());
        }
        for w in idx.windows(2) {
            if !network.has_link(w[0], w[1]) {
                return Err(format!(
                    "no link {} -> {}",
                    network.street(w[0]).id,
                    network.street(w[1]).id
                ));
            }
        }
        let len: f64 = idx.iter().map(|&i| network.street(i).length).sum();
        if (len - self.length).abs() > 1e-6 * len.max(1.0) {
            return Err(format!("length {} does not match streets ({len})", self.length));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchConfig {
    pub route_limit: usize,
    pub similarity_threshold: f64,
    pub top_k: usize,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            route_limit: 60,
            similarity_threshold: 0.5,
            top_k: 5,
        }
    }
}

impl SearchConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.top_k == 0 || self.route_limit < self.top_k {
            return Err("need route_limit >= top_k >= 1".into());
        }
        if !(self.similarity_threshold > 0.0 && self.similarity_threshold <= 1.0) {
            return Err("similarity threshold must be in (0, 1]".into());
        }
        Ok(())
    }
}

/// Upper bound on queued partial routes before enumeration gives up and
/// returns what it has.
pub const QUEUE_CAP: usize = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq)]
struct Cost(f64);

impl Eq for Cost {}

impl PartialOrd for Cost {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Cost {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0)
    }
}

/// Remaining distance from the end of each street to the end of `dest`.
fn distance_to(network: &Network, dest: usize) -> Vec<f64> {
    let n = network.streets().len();
    let mut preds = vec![Vec::new(); n];
    for a in 0..n {
        for &b in network.successors(a) {
            preds[b].push(a);
        }
    }
    let mut dist = vec![f64::INFINITY; n];
    dist[dest] = 0.0;
    let mut heap = BinaryHeap::new();
    heap.push(Reverse((Cost(0.0), dest)));
    while let Some(Reverse((Cost(d), s))) = heap.pop() {
        if d > dist[s] {
            continue;
        }
        let via = d + network.street(s).length;
        for &p in &preds[s] {
            if via < dist[p] {
                dist[p] = via;
                heap.push(Reverse((Cost(via), p)));
            }
        }
    }
    dist
}

/// Up to `limit` routes from `origin` to `dest` in non-decreasing length,
/// ties ordered by street id sequence. A route never passes the same
/// junction twice.
///
/// Partial routes are expanded best-first on length so far plus the exact
/// remaining distance to `dest`, which pops complete routes in the same
/// order a plain length-ordered search would, without expanding partial
/// routes that point away from the destination.
pub fn enumerate_routes(
    network: &Network,
    origin: &StreetId,
    dest: &StreetId,
    limit: usize,
) -> Result<Vec<Route>, RouteError> {
    let o = network
        .index_of(origin)
        .ok_or_else(|| RouteError::UnknownStreet(origin.clone()))?;
    let d = network
        .index_of(dest)
        .ok_or_else(|| RouteError::UnknownStreet(dest.clone()))?;
    let no_route = || RouteError::NoRoute(origin.clone(), dest.clone());
    let remaining = distance_to(network, d);
    if !remaining[o].is_finite() {
        return Err(no_route());
    }
    let mut junction_ids: HashMap<&str, u32> = HashMap::new();
    let mut ends = Vec::with_capacity(network.streets().len());
    for s in network.streets() {
        let n = junction_ids.len() as u32;
        let from = *junction_ids.entry(s.from.as_str()).or_insert(n);
        let n = junction_ids.len() as u32;
        let to = *junction_ids.entry(s.to.as_str()).or_insert(n);
        ends.push((from, to));
    }

    let make = |path: &[u32], length: f64| {
        Route::new(
            RouteId::new(String::new()),
            path.iter().map(|&i| network.street(i as usize).id.clone()).collect(),
            length,
        )
    };

    let mut found = Vec::new();
    if limit == 0 {
        return Ok(found);
    }
    let first_len = network.street(o).length;
    if o == d {
        found.push(make(&[o as u32], first_len));
        return Ok(found);
    }
    if ends[o].0 == ends[o].1 {
        return Err(no_route());
    }

    // (estimate, path, length so far)
    let mut heap: BinaryHeap<Reverse<(Cost, Vec<u32>, Cost)>> = BinaryHeap::new();
    heap.push(Reverse((
        Cost(first_len + remaining[o]),
        vec![o as u32],
        Cost(first_len),
    )));
    while let Some(Reverse((_, path, Cost(len)))) = heap.pop() {
        let last = *path.last().unwrap() as usize;
        if last == d {
            found.push(make(&path, len));
            if found.len() >= limit {
                break;
            }
            continue;
        }
        for &next in network.successors(last) {
            if !remaining[next].is_finite() {
                continue;
            }
            let to = ends[next].1;
            let revisits = ends[o].0 == to || path.iter().any(|&p| ends[p as usize].1 == to);
            if revisits {
                continue;
            }
            let g = len + network.street(next).length;
            let mut p = Vec::with_capacity(path.len() + 1);
            p.extend_from_slice(&path);
            p.push(next as u32);
            heap.push(Reverse((Cost(g + remaining[next]), p, Cost(g))));
        }
        if heap.len() >= QUEUE_CAP {
            break;
        }
    }
    if found.is_empty() {
        return Err(no_route());
    }
    for (i, r) in found.iter_mut().enumerate() {
        r.id = RouteId::new(format!("r{i}"));
    }
    Ok(found)
}

/// Shared streets over the street count of the shorter route.
pub fn similarity(a: &Route, b: &Route) -> f64 {
    let sa: BTreeSet<&StreetId> = a.streets.iter().collect();
    let sb: BTreeSet<&StreetId> = b.streets.iter().collect();
    let common = sa.intersection(&sb).count();
    common as f64 / sa.len().min(sb.len()) as f64
}

/// Greedy first-fit grouping: each route joins the first group in which it
/// is dissimilar (below `threshold`) to every member, else starts a new group.
pub fn cluster_routes(routes: &[Route], threshold: f64) -> Vec<Vec<Route>> {
    let mut clusters: Vec<Vec<Route>> = Vec::new();
    for r in routes {
        match clusters
            .iter_mut()
            .find(|c| c.iter().all(|m| similarity(m, r) < threshold))
        {
            Some(c) => c.push(r.clone()),
            None => clusters.push(vec![r.clone()]),
        }
    }
    clusters
}

/// The `top_k` shortest routes of each cluster, clusters in order.
pub fn select_candidates(clusters: &[Vec<Route>], top_k: usize) -> Vec<Route> {
    clusters
        .iter()
        .flat_map(|c| {
            let mut c: Vec<&Route> = c.iter().collect();
            c.sort_by(|a, b| a.length.total_cmp(&b.length));
            c.into_iter().take(top_k).cloned()
        })
        .collect()
}

/// Enumerate, cluster and select in one go.
pub fn candidate_routes(
    network: &Network,
    origin: &StreetId,
    dest: &StreetId,
    cfg: &SearchConfig,
) -> Result<Vec<Route>, RouteError> {
    let all = enumerate_routes(network, origin, dest, cfg.route_limit)?;
    let clusters = cluster_routes(&all, cfg.similarity_threshold);
    Ok(select_candidates(&clusters, cfg.top_k))
}

/// One side (earliest or latest) of a route's per-street windows.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SideBounds {
    pub enter: Vec<Step>,
    pub exit: Vec<Step>,
}

fn cumulative(steps: impl Iterator<Item = Step>) -> SideBounds {
    let mut enter = Vec::new();
    let mut exit = Vec::new();
    let mut t = 0;
    for d in steps {
        enter.push(t);
        t += d;
        exit.push(t);
    }
    SideBounds { enter, exit }
}

fn street_indices(network: &Network, route: &Route) -> Vec<usize> {
    route
        .streets
        .iter()
        .map(|s| network.index_of(s).expect("route street in network"))
        .collect()
}

/// Earliest enter/exit steps with nobody else on the network.
pub fn free_flow_bounds(network: &Network, route: &Route, quantum: u32) -> SideBounds {
    cumulative(
        street_indices(network, route)
            .into_iter()
            .map(|i| network.travel_steps(i, Band::Low, quantum)),
    )
}

/// Latest enter/exit steps when every other route sits on all of its streets
/// at once. A street's congestion is the number of other routes using it,
/// never less than one (the vehicle itself).
pub fn max_congestion_bounds(
    network: &Network,
    route: &Route,
    others: &[&Route],
    quantum: u32,
) -> SideBounds {
    let mut load: HashMap<&StreetId, u32> = HashMap::new();
    for r in others {
        let distinct: BTreeSet<&StreetId> = r.streets.iter().collect();
        for s in distinct {
            *load.entry(s).or_default() += 1;
        }
    }
    cumulative(route.streets.iter().map(|s| {
        let i = network.index_of(s).expect("route street in network");
        let n = load.get(s).copied().unwrap_or(0).max(1);
        let band = network.bands().band_for(network.capacity(i), n);
        network.travel_steps(i, band, quantum)
    }))
}

/// Per-street enter/exit windows of one route, relative to the vehicle's
/// own start at step 0.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RouteBounds {
    pub min_enter: Vec<Step>,
    pub max_enter: Vec<Step>,
    pub min_exit: Vec<Step>,
    pub max_exit: Vec<Step>,
}

impl RouteBounds {
    pub fn from_sides(min: SideBounds, max: SideBounds) -> Self {
        Self {
            min_enter: min.enter,
            min_exit: min.exit,
            max_enter: max.enter,
            max_exit: max.exit,
        }
    }

    pub fn compute(network: &Network, route: &Route, others: &[&Route], quantum: u32) -> Self {
        Self::from_sides(
            free_flow_bounds(network, route, quantum),
            max_congestion_bounds(network, route, others, quantum),
        )
    }

    /// Windows pinned to known times: enter and exit both exact.
    pub fn fixed(times: &[(Step, Step)]) -> Self {
        let enter: Vec<Step> = times.iter().map(|t| t.0).collect();
        let exit: Vec<Step> = times.iter().map(|t| t.1).collect();
        Self {
            min_enter: enter.clone(),
            max_enter: enter,
            min_exit: exit.clone(),
            max_exit: exit,
        }
    }

    pub fn len(&self) -> usize {
        self.min_enter.len()
    }

    pub fn is_empty(&self) -> bool {
        self.min_enter.is_empty()
    }

    pub fn validate(&self) -> Result<(), String> {
        let n = self.min_enter.len();
        if n == 0 || [self.max_enter.len(), self.min_exit.len(), self.max_exit.len()] != [n; 3] {
            return Err("bound vectors must be non-empty and of equal length".into());
        }
        if self.min_enter[0] != 0 || self.max_enter[0] != 0 {
            return Err("first street must be entered at step 0".into());
        }
        for i in 0..n {
            if self.min_enter[i] > self.max_enter[i] {
                return Err(format!("street {i}: min enter above max enter"));
            }
            if self.min_enter[i] >= self.min_exit[i] || self.max_enter[i] >= self.max_exit[i] {
                return Err(format!("street {i}: exit not after enter"));
            }
            if i > 0 && (self.min_enter[i] < self.min_enter[i - 1] || self.max_enter[i] < self.max_enter[i - 1]) {
                return Err(format!("street {i}: bounds decrease along the route"));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::{Street, TrafficBands};

    fn route(ids: &[&str]) -> Route {
        Route::new("r", ids.iter().map(|&s| s.into()).collect(), ids.len() as f64)
    }

    fn diamond() -> Network {
        // o -> (a 100 | b 150) -> d
        let streets = vec![
            Street::new("o", "x", "j", 10.0, 1),
            Street::new("a", "j", "k", 100.0, 1),
            Street::new("b1", "j", "m", 75.0, 1),
            Street::new("b2", "m", "k", 75.0, 1),
            Street::new("d", "k", "y", 10.0, 1),
        ];
        let links: Vec<(StreetId, StreetId)> = [("o", "a"), ("o", "b1"), ("b1", "b2"), ("a", "d"), ("b2", "d")]
            .iter()
            .map(|&(a, b)| (a.into(), b.into()))
            .collect();
        Network::new(streets, &links, vec![], TrafficBands::default()).unwrap()
    }

    #[test]
    fn similarity_examples() {
        let a = route(&["a", "b", "c", "d"]);
        let b = route(&["c", "d", "e"]);
        assert!((similarity(&a, &b) - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(similarity(&a, &a), 1.0);
        assert_eq!(similarity(&a, &route(&["x", "y"])), 0.0);
    }

    #[test]
    fn diamond_enumeration() {
        let net = diamond();
        let rs = enumerate_routes(&net, &"o".into(), &"d".into(), 60).unwrap();
        assert_eq!(rs.len(), 2);
        assert_eq!(rs[0].length, 120.0);
        assert_eq!(rs[1].length, 170.0);
        for r in &rs {
            r.validate(&net).unwrap();
        }
    }

    #[test]
    fn same_origin_and_destination() {
        let net = diamond();
        let rs = enumerate_routes(&net, &"a".into(), &"a".into(), 60).unwrap();
        assert_eq!(rs.len(), 1);
        assert_eq!(rs[0].streets, vec![StreetId::from("a")]);
    }

    #[test]
    fn unreachable_destination() {
        let net = diamond();
        let err = enumerate_routes(&net, &"d".into(), &"o".into(), 60).unwrap_err();
        assert!(matches!(err, RouteError::NoRoute(..)));
    }

    #[test]
    fn clustering_rules() {
        // similarity 3/5 = 0.6
        let a = route(&["a", "b", "c", "d", "e"]);
        let b = route(&["a", "b", "c", "x", "y"]);
        assert_eq!(cluster_routes(&[a.clone(), b], 0.5).len(), 2);
        // similarity 0.3 over 10 streets
        let c = route(&["a", "b", "c", "d", "e", "f", "g", "h", "i", "j"]);
        let d = route(&["a", "b", "c", "q", "r", "s", "t", "u", "v", "w"]);
        let cl = cluster_routes(&[c, d], 0.5);
        assert_eq!(cl.len(), 1);
        assert_eq!(cl[0].len(), 2);
        assert_eq!(cluster_routes(&[a], 0.5).len(), 1);
    }

    #[test]
    fn selection_truncates_per_cluster() {
        let mk = |n: usize, base: f64| -> Vec<Route> {
            (0..n)
                .map(|i| Route::new(format!("r{i}"), vec![StreetId::new(format!("s{i}"))], base + i as f64))
                .collect()
        };
        let sel = select_candidates(&[mk(6, 0.0), mk(3, 100.0)], 5);
        assert_eq!(sel.len(), 8);
        assert_eq!(sel[4].length, 4.0);
        assert_eq!(sel[5].length, 100.0);
        assert_eq!(select_candidates(&[mk(2, 0.0)], 5).len(), 2);
    }

    #[test]
    fn bounds_examples() {
        // 175 m and 150 m: 14 s and 12 s at 45 km/h, 3 steps each at 5 s.
        let streets = vec![Street::new("s1", "a", "b", 175.0, 1), Street::new("s2", "b", "c", 150.0, 1)];
        let net = Network::new(streets, &[("s1".into(), "s2".into())], vec![], TrafficBands::default()).unwrap();
        let r = Route::from_streets(&net, "r", vec!["s1".into(), "s2".into()]).unwrap();
        let ff = free_flow_bounds(&net, &r, 5);
        assert_eq!(ff.enter, vec![0, 3]);
        assert_eq!(ff.exit, vec![3, 6]);
        let mc = max_congestion_bounds(&net, &r, &[], 5);
        assert_eq!(mc, ff);
        let b = RouteBounds::compute(&net, &r, &[], 5);
        b.validate().unwrap();
    }

    #[test]
    fn congested_street_uses_heavy_band() {
        // capacity 10: 80 m, 1 lane
        let streets = vec![Street::new("s", "a", "b", 80.0, 1)];
        let net = Network::new(streets, &[], vec![], TrafficBands::default()).unwrap();
        let r = Route::from_streets(&net, "r", vec!["s".into()]).unwrap();
        let seven: Vec<Route> = (0..7).map(|_| r.clone()).collect();
        let refs: Vec<&Route> = seven.iter().collect();
        let heavy = net.travel_steps(0, Band::Heavy, 5);
        assert_eq!(max_congestion_bounds(&net, &r, &refs, 5).exit, vec![heavy]);
        let refs3: Vec<&Route> = seven.iter().take(3).collect();
        assert_eq!(
            max_congestion_bounds(&net, &r, &refs3, 5),
            free_flow_bounds(&net, &r, 5)
        );
    }
}
