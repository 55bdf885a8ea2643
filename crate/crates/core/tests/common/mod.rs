//! Shared test support: a generator of small random instances, an exhaustive
//! acyclic-path oracle, and a rule evaluator that reads only the exported
//! fact text and a model text.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet, HashMap};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use urbanflow::ids::StreetId;
use urbanflow::net::{Band, Network, Roundabout, Step, Street, TrafficBands};
use urbanflow::routes::{enumerate_routes, Route, RouteBounds};
use urbanflow::schedule::{build_instance, Candidate, Instance, Schedule, StreetTimes, Vehicle, VehicleSchedule};
use urbanflow::solver::{brute_force_space, BRUTE_FORCE_LIMIT};

pub const QUANTUM: u32 = 5;
pub const MAX_HORIZON: Step = 15;

pub struct Generated {
    pub network: Network,
    pub instance: Instance,
    pub strict: bool,
}

/// Junction-forward network: entry streets into j1, a random middle between
/// j1 and j3, exit streets out of j3. Street lengths are short so capacities
/// of one or two vehicles are common.
fn random_network(rng: &mut ChaCha8Rng) -> Network {
    let lengths = [8.0, 8.0, 12.0, 16.0, 24.0, 40.0, 60.0];
    let len = |rng: &mut ChaCha8Rng| *lengths.choose(rng).unwrap();
    let mut streets = vec![Street::new("a", "j0", "j1", len(rng), 1), Street::new("z", "j3", "j4", len(rng), 1)];
    if rng.gen_bool(0.4) {
        streets.push(Street::new("b", "j5", "j1", len(rng), 1));
    }
    // guaranteed j1 -> j3 connection, then extras
    let pairs = [(1, 2), (2, 3), (1, 3)];
    let mut middle: Vec<(usize, usize)> = if rng.gen_bool(0.5) { vec![(1, 3)] } else { vec![(1, 2), (2, 3)] };
    let extra = rng.gen_range(1..=8 - streets.len() - middle.len());
    for _ in 0..extra {
        middle.push(*pairs.choose(rng).unwrap());
    }
    for (k, (f, t)) in middle.into_iter().enumerate() {
        let lanes = if rng.gen_bool(0.2) { 2 } else { 1 };
        streets.push(Street::new(format!("m{k}"), format!("j{f}"), format!("j{t}"), len(rng), lanes));
    }
    let mut links = Vec::new();
    for a in &streets {
        for b in &streets {
            if a.to == b.from {
                links.push((a.id.clone(), b.id.clone()));
            }
        }
    }
    let mut roundabouts = Vec::new();
    if rng.gen_bool(0.3) {
        let mut mids: Vec<StreetId> = streets.iter().filter(|s| s.id.as_str().starts_with('m')).map(|s| s.id.clone()).collect();
        mids.shuffle(rng);
        let k = rng.gen_range(1..=mids.len().min(3));
        roundabouts.push(Roundabout {
            id: "ra".into(),
            members: mids[..k].to_vec(),
            capacity: rng.gen_range(1..=3),
        });
    }
    Network::new(streets, &links, roundabouts, TrafficBands::default()).unwrap()
}

fn free_flow_times(network: &Network, route: &Route) -> Vec<(Step, Step)> {
    let mut t = 0;
    route
        .streets
        .iter()
        .map(|s| {
            let d = network.travel_steps(network.index_of(s).unwrap(), Band::Low, QUANTUM);
            t += d;
            (t - d, t)
        })
        .collect()
}

/// Random extra room on the late side of the windows, kept monotone.
fn widen(rng: &mut ChaCha8Rng, mut b: RouteBounds) -> RouteBounds {
    let mut slack = 0;
    for k in 0..b.len() {
        if k > 0 {
            slack += rng.gen_range(0..=2);
            b.max_enter[k] += slack;
        }
        b.max_exit[k] += slack + rng.gen_range(0..=1);
    }
    b
}

/// Instance with at most 3 vehicles, 8 streets, 2 candidates per vehicle and
/// a horizon of at most 15 steps, small enough for exhaustive search.
pub fn random_instance(seed: u64) -> Generated {
    let mut attempt = 0u64;
    loop {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(1_000_003).wrapping_add(attempt));
        attempt += 1;
        let network = random_network(&mut rng);
        let entries: Vec<StreetId> = ["a", "b"].iter().map(|&s| StreetId::new(s)).filter(|s| network.index_of(s).is_some()).collect();
        let exits: Vec<StreetId> = network
            .streets()
            .iter()
            .filter(|s| s.to.as_str() == "j3" || s.id.as_str() == "z")
            .map(|s| s.id.clone())
            .collect();

        let n_vehicles = rng.gen_range(1..=3);
        let n_sim = if n_vehicles > 1 && rng.gen_bool(0.3) { 1 } else { 0 };
        let mut plans: Vec<(String, Vec<Route>, bool)> = Vec::new();
        for v in 0..n_vehicles {
            let sim = v < n_sim;
            let origin = if sim && rng.gen_bool(0.5) {
                // already inside: starts on a middle street
                network.streets().iter().filter(|s| s.id.as_str().starts_with('m')).map(|s| s.id.clone()).collect::<Vec<_>>().choose(&mut rng).unwrap().clone()
            } else {
                entries.choose(&mut rng).unwrap().clone()
            };
            let dest = exits.choose(&mut rng).unwrap().clone();
            let Ok(routes) = enumerate_routes(&network, &origin, &dest, 2) else { continue };
            let take = if sim { 1 } else { rng.gen_range(1..=routes.len()) };
            let id = format!("v{v}");
            let routes = routes
                .into_iter()
                .take(take)
                .enumerate()
                .map(|(k, r)| r.with_id(format!("{id}_r{k}")))
                .collect();
            plans.push((id, routes, sim));
        }
        if !plans.iter().any(|p| !p.2) {
            continue;
        }
        let firsts: Vec<Route> = plans.iter().map(|p| p.1[0].clone()).collect();
        let vehicles: Vec<Vehicle> = plans
            .iter()
            .enumerate()
            .map(|(i, (id, routes, sim))| {
                if *sim {
                    let times = free_flow_times(&network, &routes[0]);
                    return Vehicle::simulated(id.as_str(), routes[0].clone(), times);
                }
                let others: Vec<&Route> = firsts.iter().enumerate().filter(|&(j, _)| j != i).map(|(_, r)| r).collect();
                let cands = routes
                    .iter()
                    .map(|r| Candidate {
                        bounds: widen(&mut rng, RouteBounds::compute(&network, r, &others, QUANTUM)),
                        route: r.clone(),
                    })
                    .collect();
                Vehicle::controlled(id.as_str(), cands)
            })
            .collect();
        let Ok(instance) = build_instance(&network, vehicles, QUANTUM) else { continue };
        if instance.horizon() > MAX_HORIZON {
            continue;
        }
        let strict = rng.gen_bool(0.2);
        let instance = instance.with_strict_capacity(strict);
        if brute_force_space(&instance) > BRUTE_FORCE_LIMIT / 10 {
            continue;
        }
        return Generated { network, instance, strict };
    }
}

/// Every vehicle on its first candidate at the earliest window times, with
/// simulated vehicles at their committed times.
pub fn earliest_schedule(instance: &Instance) -> Schedule {
    let vehicles = instance
        .vehicles()
        .iter()
        .map(|v| {
            let c = &v.candidates[0];
            let times = match &v.fixed_times {
                Some(f) => f.clone(),
                None => (0..c.route.streets.len()).map(|k| (c.bounds.min_enter[k], c.bounds.min_exit[k])).collect(),
            };
            VehicleSchedule {
                vehicle: v.id.clone(),
                route: c.route.id.clone(),
                times: c
                    .route
                    .streets
                    .iter()
                    .zip(times)
                    .map(|(s, (enter, exit))| StreetTimes { street: s.clone(), enter, exit })
                    .collect(),
            }
        })
        .collect();
    Schedule { vehicles }
}

/// Small random edits of a schedule: nudged times, a shifted tail, or a
/// different candidate at its earliest times.
pub fn mutate(instance: &Instance, schedule: &Schedule, rng: &mut ChaCha8Rng) -> Schedule {
    let mut s = schedule.clone();
    if s.vehicles.is_empty() {
        return s;
    }
    let vi = rng.gen_range(0..s.vehicles.len());
    let veh = &instance.vehicles()[instance.vehicle_index(&s.vehicles[vi].vehicle).unwrap()];
    let sv = &mut s.vehicles[vi];
    let k = rng.gen_range(0..sv.times.len());
    match rng.gen_range(0..5) {
        0 => sv.times[k].exit += 1,
        1 => sv.times[k].exit = sv.times[k].exit.saturating_sub(1),
        2 => sv.times[k].enter += 1,
        3 => {
            let d = rng.gen_range(1..=2);
            for t in &mut sv.times[k..] {
                if t.enter > 0 || k > 0 {
                    t.enter += d;
                }
                t.exit += d;
            }
        }
        _ => {
            let c = &veh.candidates[rng.gen_range(0..veh.candidates.len())];
            sv.route = c.route.id.clone();
            sv.times = c
                .route
                .streets
                .iter()
                .enumerate()
                .map(|(k, st)| StreetTimes {
                    street: st.clone(),
                    enter: c.bounds.min_enter[k],
                    exit: c.bounds.min_exit[k] + rng.gen_range(0..=1),
                })
                .collect();
        }
    }
    s
}

/// All acyclic street sequences from `origin` to `dest` in which no junction
/// repeats, found by plain depth-first search, sorted by length then ids.
pub fn all_simple_routes(network: &Network, origin: &StreetId, dest: &StreetId) -> Vec<(f64, Vec<StreetId>)> {
    fn go(
        network: &Network,
        dest: usize,
        path: &mut Vec<usize>,
        seen: &mut BTreeSet<String>,
        out: &mut Vec<(f64, Vec<StreetId>)>,
    ) {
        let last = *path.last().unwrap();
        if last == dest {
            let len = path.iter().map(|&i| network.street(i).length).sum();
            out.push((len, path.iter().map(|&i| network.street(i).id.clone()).collect()));
            return;
        }
        for &n in network.successors(last) {
            let to = network.street(n).to.as_str().to_owned();
            if seen.contains(&to) {
                continue;
            }
            seen.insert(to.clone());
            path.push(n);
            go(network, dest, path, seen, out);
            path.pop();
            seen.remove(&to);
        }
    }
    let o = network.index_of(origin).unwrap();
    let d = network.index_of(dest).unwrap();
    let s = network.street(o);
    let mut seen: BTreeSet<String> = [s.from.as_str().to_owned(), s.to.as_str().to_owned()].into();
    let mut out = Vec::new();
    go(network, d, &mut vec![o], &mut seen, &mut out);
    out.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.cmp(&b.1)));
    out
}

// ---------------------------------------------------------------------------
// Rule evaluator over fact and model text

#[derive(Default, Debug)]
pub struct Facts {
    pub kind: BTreeMap<String, String>,
    pub origin: HashMap<String, String>,
    pub destination: HashMap<String, String>,
    pub possible: BTreeMap<String, BTreeSet<String>>,
    /// route -> street -> (min, max)
    pub on_route: HashMap<String, HashMap<String, (i64, i64)>>,
    pub sim_enter: HashMap<(String, String), i64>,
    pub sim_exit: HashMap<(String, String), i64>,
    pub links: BTreeSet<(String, String)>,
    pub times: BTreeSet<i64>,
    pub capacity: HashMap<String, i64>,
    pub travel: HashMap<(String, String), i64>,
    pub max_travel: HashMap<String, i64>,
    pub threshold: HashMap<(String, String), (i64, i64)>,
    pub roundabout: HashMap<String, i64>,
    pub in_roundabout: HashMap<String, String>,
}

#[derive(Default, Debug)]
struct Model {
    route: BTreeMap<String, Vec<String>>,
    enter: BTreeMap<(String, String), Vec<i64>>,
    exit: BTreeMap<(String, String), Vec<i64>>,
}

/// `name(a,b,c).` atoms, one or more per line; `%` starts a comment.
fn parse_atoms(text: &str) -> Vec<(String, Vec<String>)> {
    let mut out = Vec::new();
    for line in text.lines() {
        let line = line.split('%').next().unwrap();
        for part in line.split(").") {
            let part = part.trim();
            if let Some((name, args)) = part.split_once('(') {
                let args = args.trim_end_matches(')');
                out.push((name.trim().to_owned(), args.split(',').map(|a| a.trim().to_owned()).collect()));
            }
        }
    }
    out
}

fn num(s: &str) -> i64 {
    s.parse().unwrap_or_else(|_| panic!("not a number: {s}"))
}

pub fn read_facts(text: &str) -> Facts {
    let mut f = Facts::default();
    for (name, a) in parse_atoms(text) {
        match name.as_str() {
            "vehicle" => {
                f.kind.insert(a[0].clone(), a[1].clone());
            }
            "origin" => {
                f.origin.insert(a[0].clone(), a[1].clone());
            }
            "destination" => {
                f.destination.insert(a[0].clone(), a[1].clone());
            }
            "possibleRouteOfVehicle" => {
                f.possible.entry(a[0].clone()).or_default().insert(a[1].clone());
            }
            "streetOnRoute" => {
                f.on_route.entry(a[1].clone()).or_default().insert(a[0].clone(), (num(&a[2]), num(&a[3])));
            }
            "enter" => {
                f.sim_enter.insert((a[0].clone(), a[1].clone()), num(&a[2]));
            }
            "exit" => {
                f.sim_exit.insert((a[0].clone(), a[1].clone()), num(&a[2]));
            }
            "link" => {
                f.links.insert((a[0].clone(), a[1].clone()));
            }
            "time" => {
                f.times.insert(num(&a[0]));
            }
            "capacity" => {
                f.capacity.insert(a[0].clone(), num(&a[1]));
            }
            "trafficTravelTime" => {
                f.travel.insert((a[0].clone(), a[1].clone()), num(&a[2]));
            }
            "maxTrafficTravelTime" => {
                f.max_travel.insert(a[0].clone(), num(&a[1]));
            }
            "trafficThreshold" => {
                f.threshold.insert((a[0].clone(), a[1].clone()), (num(&a[2]), num(&a[3])));
            }
            "roundabout" => {
                f.roundabout.insert(a[0].clone(), num(&a[1]));
            }
            "streetInRoundabout" => {
                f.in_roundabout.insert(a[0].clone(), a[1].clone());
            }
            other => panic!("unexpected fact {other}"),
        }
    }
    f
}

fn read_model(text: &str) -> Model {
    let mut m = Model::default();
    for (name, a) in parse_atoms(text) {
        match name.as_str() {
            "solutionRoute" => m.route.entry(a[0].clone()).or_default().push(a[1].clone()),
            "enter" => m.enter.entry((a[0].clone(), a[1].clone())).or_default().push(num(&a[2])),
            "exit" => m.exit.entry((a[0].clone(), a[1].clone())).or_default().push(num(&a[2])),
            _ => {}
        }
    }
    m
}

pub struct Evaluation {
    /// (rule id, vehicle) of every broken ground rule.
    pub broken: BTreeSet<(String, String)>,
    /// (level 2, level 1) cost; level 1 sums destination exits per vehicle.
    pub cost: (i64, i64),
}

/// Grounds the scheduling rules over the fact and model text and reports
/// every broken one. Threshold facts are occupancies times 10. `strict`
/// extends the street capacity rule to simulated vehicles.
pub fn evaluate(facts: &str, model: &str, strict: bool) -> Evaluation {
    let f = read_facts(facts);
    let m = read_model(model);
    let horizon = *f.times.iter().max().unwrap_or(&0);
    let mut broken = BTreeSet::new();
    let mut hit = |rule: &str, v: &str| {
        broken.insert((rule.to_owned(), v.to_owned()));
    };

    // all (vehicle, street, enter, exit) in the model
    let mut stays: Vec<(String, String, i64, i64)> = Vec::new();
    for ((v, s), ins) in &m.enter {
        let outs = m.exit.get(&(v.clone(), s.clone())).cloned().unwrap_or_default();
        for &i in ins {
            for &o in &outs {
                stays.push((v.clone(), s.clone(), i, o));
            }
        }
    }
    let n_at = |s: &str, t: i64| -> i64 {
        let ins = m.enter.iter().filter(|((_, st), _)| st == s).flat_map(|(_, ts)| ts).filter(|&&x| x <= t).count() as i64;
        let outs = m.exit.iter().filter(|((_, st), _)| st == s).flat_map(|(_, ts)| ts).filter(|&&x| x <= t).count() as i64;
        ins - outs
    };
    let events: BTreeSet<(String, i64)> = m.enter.iter().flat_map(|((_, s), ts)| ts.iter().map(move |&t| (s.clone(), t))).collect();

    for (v, kind) in &f.kind {
        let con = kind == "con";
        let routes = m.route.get(v).cloned().unwrap_or_default();
        let possible = f.possible.get(v).cloned().unwrap_or_default();
        let route_rule = if con { "r1" } else { "r2" };
        if routes.len() != 1 || !possible.contains(&routes[0]) {
            hit(route_rule, v);
            continue;
        }
        let route = &f.on_route[&routes[0]];
        let origin = &f.origin[v];
        // origin entered at 0
        if m.enter.get(&(v.clone(), origin.clone())).map(|t| t.as_slice()) != Some(&[0]) {
            hit("r4", v);
        }
        for (s, &(lo, hi)) in route {
            let key = (v.clone(), s.clone());
            let ins = m.enter.get(&key).cloned().unwrap_or_default();
            let outs = m.exit.get(&key).cloned().unwrap_or_default();
            if !con {
                if ins != [f.sim_enter[&key]] || outs != [f.sim_exit[&key]] {
                    hit("facts", v);
                }
                continue;
            }
            if s != origin && (ins.len() != 1 || ins[0] < lo || ins[0] > hi || ins[0] > horizon) {
                hit("r3", v);
            }
            for &i in &ins {
                let ok = outs.len() == 1 && outs[0] > i && outs[0] <= i + f.max_travel[s] && outs[0] <= horizon;
                if !ok {
                    hit("r5", v);
                }
            }
        }
        if !con {
            continue;
        }
        // minimum stay for the band found at entry
        for (vv, s, i, o) in stays.iter().filter(|x| &x.0 == v) {
            let n10 = n_at(s, *i) * 10;
            let band = |b: &str| f.threshold[&(b.to_owned(), s.clone())];
            let mut need = Vec::new();
            if n10 >= band("heavy").0 {
                need.push("heavy");
            }
            if n10 >= band("medium").0 && n10 < band("medium").1 {
                need.push("medium");
            }
            if n10 < band("low").1 {
                need.push("low");
            }
            if need.iter().any(|b| *o < *i + f.travel[&(b.to_string(), s.clone())]) {
                hit("r10", vv);
            }
        }
        // every linked pair of this vehicle's streets
        for (_, s1, _, o1) in stays.iter().filter(|x| &x.0 == v) {
            for (_, s2, i2, _) in stays.iter().filter(|x| &x.0 == v) {
                if f.links.contains(&(s1.clone(), s2.clone())) && i2 != o1 {
                    hit("r11", v);
                }
            }
        }
    }
    // street capacity at enter events
    for ((v, s), ins) in &m.enter {
        let con = f.kind.get(v).is_some_and(|k| k == "con");
        if !(con || strict) {
            continue;
        }
        for &t in ins {
            if n_at(s, t) > f.capacity[s] {
                hit("r12", v);
            }
        }
    }
    // roundabout totals over member streets with an event at that step
    for ((v, sr), ins) in &m.enter {
        let Some(r) = f.in_roundabout.get(sr) else { continue };
        for &t in ins {
            let total: i64 = f
                .in_roundabout
                .iter()
                .filter(|(s, rr)| *rr == r && events.contains(&((*s).clone(), t)))
                .map(|(s, _)| n_at(s, t))
                .sum();
            if total > f.roundabout[r] {
                hit("r13", v);
            }
        }
    }

    let level2: i64 = events.iter().map(|(s, t)| n_at(s, *t)).sum();
    let level1: i64 = f
        .destination
        .iter()
        .filter_map(|(v, d)| m.exit.get(&(v.clone(), d.clone())).and_then(|ts| ts.first().copied()))
        .sum();
    Evaluation { broken, cost: (level2, level1) }
}
