use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use crate::ids::{StreetId, VehicleId};
use crate::net::Step;

use super::{Instance, ObjectiveVector, Schedule, VehicleKind, VehicleSchedule};

/// Rule of the scheduling model a violation breaks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Rule {
    /// Each controlled vehicle takes exactly one of its candidates.
    R1,
    /// A simulated vehicle keeps its committed route.
    R2,
    /// Enter steps within the route's window and the time grid.
    R3,
    /// The origin street is entered at step 0.
    R4,
    /// Exit between one step and the congested travel time after entering.
    R5,
    /// Stay at least the travel time of the band sampled at entry.
    R10,
    /// Leave a street exactly when entering the linked one.
    R11,
    /// Street capacity at controlled enter events.
    R12,
    /// Roundabout capacity at enter events into its streets.
    R13,
    /// Simulated vehicle times differ from the committed ones.
    Facts,
}

impl Rule {
    pub fn id(self) -> &'static str {
        match self {
            Rule::R1 => "r1",
            Rule::R2 => "r2",
            Rule::R3 => "r3",
            Rule::R4 => "r4",
            Rule::R5 => "r5",
            Rule::R10 => "r10",
            Rule::R11 => "r11",
            Rule::R12 => "r12",
            Rule::R13 => "r13",
            Rule::Facts => "facts",
        }
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub rule: Rule,
    pub vehicle: Option<VehicleId>,
    pub street: Option<StreetId>,
    pub step: Option<Step>,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}]", self.rule)?;
        if let Some(v) = &self.vehicle {
            write!(f, " vehicle={v}")?;
        }
        if let Some(s) = &self.street {
            write!(f, " street={s}")?;
        }
        if let Some(t) = self.step {
            write!(f, " t={t}")?;
        }
        write!(f, ": {}", self.message)
    }
}

/// Enter/exit intervals per street, for sampling occupancy.
struct Occupancy<'a> {
    intervals: HashMap<&'a StreetId, Vec<(Step, Step)>>,
    events: BTreeMap<&'a StreetId, BTreeSet<Step>>,
}

impl<'a> Occupancy<'a> {
    fn new(schedule: &'a Schedule) -> Self {
        let mut intervals: HashMap<&StreetId, Vec<(Step, Step)>> = HashMap::new();
        let mut events: BTreeMap<&StreetId, BTreeSet<Step>> = BTreeMap::new();
        for v in &schedule.vehicles {
            for t in &v.times {
                intervals.entry(&t.street).or_default().push((t.enter, t.exit));
                events.entry(&t.street).or_default().insert(t.enter);
            }
        }
        Self { intervals, events }
    }

    /// Entered at or before `t` minus exited at or before `t`.
    fn at(&self, street: &StreetId, t: Step) -> i64 {
        self.intervals.get(street).map_or(0, |iv| {
            iv.iter()
                .map(|&(e, x)| (e <= t) as i64 - (x <= t) as i64)
                .sum()
        })
    }

    fn has_event(&self, street: &StreetId, t: Step) -> bool {
        self.events.get(street).is_some_and(|e| e.contains(&t))
    }
}

/// Number of vehicles on `street` at step `t`: entered at or before `t` and
/// not yet exited.
pub fn occupancy(schedule: &Schedule, street: &StreetId, t: Step) -> u32 {
    Occupancy::new(schedule).at(street, t).max(0) as u32
}

/// Checks `schedule` against every rule of the model and reports each
/// broken rule instance. Empty iff the schedule is feasible.
pub fn check_schedule(instance: &Instance, schedule: &Schedule) -> Vec<Violation> {
    let mut out = Vec::new();
    let viol = |rule, vehicle: &VehicleId, street: Option<&StreetId>, step, message: String| Violation {
        rule,
        vehicle: Some(vehicle.clone()),
        street: street.cloned(),
        step,
        message,
    };

    // (a) route choice
    let mut assigned: Vec<Option<&VehicleSchedule>> = vec![None; instance.vehicles.len()];
    for sv in &schedule.vehicles {
        match instance.vehicle_index(&sv.vehicle) {
            None => out.push(viol(Rule::R1, &sv.vehicle, None, None, "unknown vehicle".into())),
            Some(i) if assigned[i].is_some() => {
                out.push(viol(Rule::R1, &sv.vehicle, None, None, "more than one route".into()))
            }
            Some(i) => assigned[i] = Some(sv),
        }
    }
    let mut chosen: Vec<Option<usize>> = vec![None; instance.vehicles.len()];
    for (i, v) in instance.vehicles.iter().enumerate() {
        let rule = match v.kind {
            VehicleKind::Controlled => Rule::R1,
            VehicleKind::Simulated => Rule::R2,
        };
        let Some(sv) = assigned[i] else {
            out.push(viol(rule, &v.id, None, None, "no route selected".into()));
            continue;
        };
        match instance.candidate_index(i, &sv.route) {
            Some(c) => chosen[i] = Some(c),
            None => out.push(viol(
                rule,
                &v.id,
                None,
                None,
                format!("route {} is not a possible route", sv.route),
            )),
        }
    }

    // (b) enter windows and origin
    for (i, v) in instance.vehicles.iter().enumerate() {
        let Some(sv) = assigned[i] else { continue };
        if sv.enter(&v.origin) != Some(0) {
            out.push(viol(Rule::R4, &v.id, Some(&v.origin), None, "origin not entered at step 0".into()));
        }
        let Some(c) = chosen[i] else { continue };
        let cand = &v.candidates[c];
        let same_streets = sv.times.len() == cand.route.streets.len()
            && sv.times.iter().zip(&cand.route.streets).all(|(t, s)| &t.street == s);
        if !same_streets {
            out.push(viol(
                Rule::R3,
                &v.id,
                None,
                None,
                "times are not given exactly for the route's streets".into(),
            ));
            continue;
        }
        match v.kind {
            VehicleKind::Controlled => {
                for (k, t) in sv.times.iter().enumerate() {
                    if t.street == v.origin {
                        continue;
                    }
                    let (lo, hi) = (cand.bounds.min_enter[k], cand.bounds.max_enter[k]);
                    if t.enter < lo || t.enter > hi || t.enter > instance.horizon {
                        out.push(viol(
                            Rule::R3,
                            &v.id,
                            Some(&t.street),
                            Some(t.enter),
                            format!("enter outside [{lo}, {hi}]"),
                        ));
                    }
                }
            }
            VehicleKind::Simulated => {
                let fixed = v.fixed_times.as_deref().unwrap_or(&[]);
                for (t, &(e, x)) in sv.times.iter().zip(fixed) {
                    if t.enter != e || t.exit != x {
                        out.push(viol(
                            Rule::Facts,
                            &v.id,
                            Some(&t.street),
                            Some(t.enter),
                            format!("committed times are ({e}, {x})"),
                        ));
                    }
                }
            }
        }
    }

    let occ = Occupancy::new(schedule);
    let controlled = |i: usize| instance.vehicles[i].kind == VehicleKind::Controlled;

    // (c) exit windows
    for (i, v) in instance.vehicles.iter().enumerate() {
        let Some(sv) = assigned[i].filter(|_| controlled(i)) else { continue };
        for t in &sv.times {
            let Some(info) = instance.street(&t.street) else { continue };
            let hi = (t.enter + info.max_travel).min(instance.horizon);
            if t.exit <= t.enter || t.exit > hi {
                out.push(viol(
                    Rule::R5,
                    &v.id,
                    Some(&t.street),
                    Some(t.exit),
                    format!("exit outside [{}, {hi}]", t.enter + 1),
                ));
            }
        }
    }

    // (d) congestion-dependent travel time
    for (i, v) in instance.vehicles.iter().enumerate() {
        let Some(sv) = assigned[i].filter(|_| controlled(i)) else { continue };
        for t in &sv.times {
            let Some(info) = instance.street(&t.street) else { continue };
            let n = occ.at(&t.street, t.enter);
            let need = info.travel_for_occupancy(n);
            if (t.exit as i64) < t.enter as i64 + need as i64 {
                out.push(viol(
                    Rule::R10,
                    &v.id,
                    Some(&t.street),
                    Some(t.enter),
                    format!("{n} vehicles on street need {need} steps, got {}", t.exit as i64 - t.enter as i64),
                ));
            }
        }
    }

    // (e) link continuity
    for (i, v) in instance.vehicles.iter().enumerate() {
        let Some(sv) = assigned[i].filter(|_| controlled(i)) else { continue };
        for a in &sv.times {
            let Some(ia) = instance.street_index(&a.street) else { continue };
            for b in &sv.times {
                let Some(ib) = instance.street_index(&b.street) else { continue };
                if instance.has_link(ia, ib) && b.enter != a.exit {
                    out.push(viol(
                        Rule::R11,
                        &v.id,
                        Some(&b.street),
                        Some(b.enter),
                        format!("left {} at {} but entered {} at {}", a.street, a.exit, b.street, b.enter),
                    ));
                }
            }
        }
    }

    // (f) street capacity
    for (i, v) in instance.vehicles.iter().enumerate() {
        if !controlled(i) && !instance.strict_capacity {
            continue;
        }
        let Some(sv) = assigned[i] else { continue };
        for t in &sv.times {
            let Some(info) = instance.street(&t.street) else { continue };
            let n = occ.at(&t.street, t.enter);
            if n > info.capacity as i64 {
                out.push(viol(
                    Rule::R12,
                    &v.id,
                    Some(&t.street),
                    Some(t.enter),
                    format!("{n} vehicles exceed capacity {}", info.capacity),
                ));
            }
        }
    }

    // (g) roundabout capacity
    for (i, v) in instance.vehicles.iter().enumerate() {
        let Some(sv) = assigned[i] else { continue };
        for t in &sv.times {
            let Some(r) = instance.street(&t.street).and_then(|s| s.roundabout) else { continue };
            let r = &instance.roundabouts[r];
            let total: i64 = r
                .members
                .iter()
                .map(|&m| &instance.streets[m].id)
                .filter(|s| occ.has_event(s, t.enter))
                .map(|s| occ.at(s, t.enter))
                .sum();
            if total > r.capacity as i64 {
                out.push(viol(
                    Rule::R13,
                    &v.id,
                    Some(&t.street),
                    Some(t.enter),
                    format!("roundabout {} holds {total} > {}", r.id, r.capacity),
                ));
            }
        }
    }
    out
}

/// Objective of a schedule: occupancy summed over distinct (street, step)
/// enter events, then destination exit steps summed over vehicles.
pub fn objective(instance: &Instance, schedule: &Schedule) -> ObjectiveVector {
    let occ = Occupancy::new(schedule);
    let level2: i64 = occ
        .events
        .iter()
        .flat_map(|(s, ts)| ts.iter().map(|&t| occ.at(s, t)))
        .sum();
    let level1: u64 = instance
        .vehicles
        .iter()
        .filter_map(|v| schedule.get(&v.id)?.exit(&v.destination))
        .map(u64::from)
        .sum();
    ObjectiveVector::new(level2.max(0) as u64, level1)
}
