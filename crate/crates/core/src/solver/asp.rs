//! Text form of instances and models, for cross-checking against an
//! external ASP system running the routing encoding.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write;

use num_rational::Ratio;
use thiserror::Error;

use crate::ids::{RouteId, VehicleId};
use crate::net::{Band, Step};
use crate::schedule::{Instance, Schedule, StreetTimes, VehicleSchedule};

/// Occupancy thresholds are written as integers after multiplying by this.
const THRESHOLD_SCALE: u64 = 10;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum AspError {
    #[error("line {line}: {message}")]
    ParseError { line: usize, message: String },
    #[error("incomplete model: {0}")]
    IncompleteModel(String),
    #[error("unknown vehicle {0}")]
    UnknownVehicle(VehicleId),
    #[error("invalid model: {0}")]
    InvalidModel(String),
}

fn scaled(r: Ratio<u64>) -> u64 {
    // N*10 >= ceil(MIN*10) iff N >= MIN for integer N; same for MAX with <
    (r * THRESHOLD_SCALE).ceil().to_integer()
}

/// Writes the instance as facts, one per line.
pub fn export_asp_facts(instance: &Instance) -> String {
    let mut out = String::new();
    let mut line = |s: String| {
        out.push_str(&s);
        out.push('\n');
    };
    if !instance.streets.is_empty() {
        line(format!("% trafficThreshold bounds are occupancy times {THRESHOLD_SCALE}"));
    }
    for (v, veh) in instance.vehicles.iter().enumerate() {
        line(format!("vehicle({},{}).", veh.id, veh.kind.fact_name()));
        line(format!("origin({},{}).", veh.id, veh.origin));
        line(format!("destination({},{}).", veh.id, veh.destination));
        for c in &veh.candidates {
            line(format!("possibleRouteOfVehicle({},{}).", veh.id, c.route.id));
        }
        for c in &veh.candidates {
            for (k, s) in c.route.streets.iter().enumerate() {
                line(format!(
                    "streetOnRoute({s},{},{},{}).",
                    c.route.id, c.bounds.min_enter[k], c.bounds.max_enter[k]
                ));
            }
        }
        if let Some(times) = &veh.fixed_times {
            for (&s, &(e, x)) in instance.route_streets(v, 0).iter().zip(times) {
                let s = &instance.streets[s].id;
                line(format!("enter({},{s},{e}).", veh.id));
                line(format!("exit({},{s},{x}).", veh.id));
            }
        }
    }
    for (a, b) in instance.links() {
        line(format!("link({a},{b})."));
    }
    for t in 0..=instance.horizon {
        line(format!("time({t})."));
    }
    for s in &instance.streets {
        line(format!("capacity({},{}).", s.id, s.capacity));
        for b in Band::ALL {
            line(format!("trafficTravelTime({},{},{}).", b.name(), s.id, s.travel_time(b)));
        }
        line(format!("maxTrafficTravelTime({},{}).", s.id, s.max_travel));
        for b in Band::ALL {
            let (lo, hi) = s.thresholds[b as usize];
            // the heavy band is open above; its upper bound is never read
            let hi = hi.unwrap_or_else(|| Ratio::from_integer(s.capacity as u64));
            line(format!("trafficThreshold({},{},{},{}).", b.name(), s.id, scaled(lo), scaled(hi)));
        }
    }
    for r in &instance.roundabouts {
        line(format!("roundabout({},{}).", r.id, r.capacity));
        for &m in &r.members {
            line(format!("streetInRoundabout({},{}).", instance.streets[m].id, r.id));
        }
    }
    out
}

/// Writes a schedule as `solutionRoute/2`, `enter/3` and `exit/3` atoms.
pub fn render_asp_model(schedule: &Schedule) -> String {
    let mut out = String::new();
    for v in &schedule.vehicles {
        writeln!(out, "solutionRoute({},{}).", v.vehicle, v.route).unwrap();
        for t in &v.times {
            writeln!(out, "enter({},{},{}).", v.vehicle, t.street, t.enter).unwrap();
            writeln!(out, "exit({},{},{}).", v.vehicle, t.street, t.exit).unwrap();
        }
    }
    out
}

struct Atom<'a> {
    name: &'a str,
    args: Vec<&'a str>,
    line: usize,
}

/// Splits text into atoms `name(a,b,...)`. Bare words, comments and solver
/// chatter such as `Answer: 1` are skipped.
fn atoms(text: &str) -> Result<Vec<Atom<'_>>, AspError> {
    let mut out = Vec::new();
    for (ln, raw) in text.lines().enumerate() {
        let line = ln + 1;
        let content = raw.split('%').next().unwrap_or("");
        let mut rest = content.trim_start();
        while !rest.is_empty() {
            let name_len = rest
                .find(|c: char| !(c.is_ascii_alphanumeric() || c == '_'))
                .unwrap_or(rest.len());
            let (name, after) = rest.split_at(name_len);
            if let Some(inner) = after.strip_prefix('(') {
                if name.is_empty() {
                    return Err(AspError::ParseError {
                        line,
                        message: "atom without predicate name".into(),
                    });
                }
                let close = inner.find(')').ok_or_else(|| AspError::ParseError {
                    line,
                    message: format!("unterminated atom {name}("),
                })?;
                let args = inner[..close].split(',').map(str::trim).collect();
                out.push(Atom { name, args, line });
                rest = &inner[close + 1..];
            } else {
                // skip one token of non-atom text
                let skip = if name_len == 0 {
                    rest.chars().next().map_or(0, char::len_utf8)
                } else {
                    name_len
                };
                rest = &rest[skip..];
            }
            rest = rest.trim_start_matches(|c: char| c.is_whitespace() || c == '.');
        }
    }
    Ok(out)
}

fn constant<'a>(atom: &Atom<'a>, i: usize) -> Result<&'a str, AspError> {
    let a = atom.args[i];
    if crate::ids::is_fact_constant(a) || (!a.is_empty() && a.bytes().all(|b| b.is_ascii_digit())) {
        Ok(a)
    } else {
        Err(AspError::ParseError {
            line: atom.line,
            message: format!("{a:?} is not a constant in {}", atom.name),
        })
    }
}

fn step(atom: &Atom<'_>, i: usize) -> Result<Step, AspError> {
    atom.args[i].parse().map_err(|_| AspError::ParseError {
        line: atom.line,
        message: format!("{:?} is not a time step in {}", atom.args[i], atom.name),
    })
}

/// Reads one answer set's `solutionRoute/2`, `enter/3` and `exit/3` atoms
/// into a schedule covering every vehicle of the instance.
pub fn import_asp_model(text: &str, instance: &Instance) -> Result<Schedule, AspError> {
    let mut routes: HashMap<&str, &str> = HashMap::new();
    let mut enters: HashMap<(&str, &str), Step> = HashMap::new();
    let mut exits: HashMap<(&str, &str), Step> = HashMap::new();
    for atom in atoms(text)? {
        let arity = match atom.name {
            "solutionRoute" => 2,
            "enter" | "exit" => 3,
            _ => continue,
        };
        if atom.args.len() != arity {
            return Err(AspError::ParseError {
                line: atom.line,
                message: format!("{} expects {arity} arguments", atom.name),
            });
        }
        let v = constant(&atom, 0)?;
        if instance.vehicle_index(&VehicleId::new(v)).is_none() {
            return Err(AspError::UnknownVehicle(VehicleId::new(v)));
        }
        let clash = |what: &str| AspError::InvalidModel(format!("conflicting {what} atoms for vehicle {v}"));
        match atom.name {
            "solutionRoute" => {
                let r = constant(&atom, 1)?;
                if routes.insert(v, r).is_some_and(|old| old != r) {
                    return Err(clash("solutionRoute"));
                }
            }
            name => {
                let s = constant(&atom, 1)?;
                let t = step(&atom, 2)?;
                let map = if name == "enter" { &mut enters } else { &mut exits };
                if map.insert((v, s), t).is_some_and(|old| old != t) {
                    return Err(clash(name));
                }
            }
        }
    }

    let mut vehicles = Vec::with_capacity(instance.vehicles.len());
    let mut used = 0;
    for veh in &instance.vehicles {
        let v = veh.id.as_str();
        let r = *routes
            .get(v)
            .ok_or_else(|| AspError::IncompleteModel(format!("no solutionRoute for vehicle {v}")))?;
        let cand = veh
            .candidates
            .iter()
            .find(|c| c.route.id.as_str() == r)
            .ok_or_else(|| AspError::InvalidModel(format!("route {r} is not a possible route of vehicle {v}")))?;
        let mut times = Vec::with_capacity(cand.route.streets.len());
        for s in &cand.route.streets {
            let key = (v, s.as_str());
            let (Some(&enter), Some(&exit)) = (enters.get(&key), exits.get(&key)) else {
                return Err(AspError::IncompleteModel(format!("vehicle {v} has no times on street {s}")));
            };
            if exit <= enter {
                return Err(AspError::InvalidModel(format!("vehicle {v} leaves {s} at {exit}, entered at {enter}")));
            }
            times.push(StreetTimes {
                street: s.clone(),
                enter,
                exit,
            });
        }
        if times[0].enter != 0 {
            return Err(AspError::InvalidModel(format!("vehicle {v} enters its origin at {}", times[0].enter)));
        }
        used += times.len();
        vehicles.push(VehicleSchedule {
            vehicle: veh.id.clone(),
            route: RouteId::new(r),
            times,
        });
    }
    let extra = |m: &HashMap<(&str, &str), Step>| m.len() > used;
    if extra(&enters) || extra(&exits) {
        let on_route: BTreeMap<(&str, &str), ()> = vehicles
            .iter()
            .flat_map(|v| v.times.iter().map(move |t| ((v.vehicle.as_str(), t.street.as_str()), ())))
            .collect();
        let stray = enters
            .keys()
            .chain(exits.keys())
            .filter(|k| !on_route.contains_key(*k))
            .min()
            .expect("some atom is off route");
        return Err(AspError::InvalidModel(format!(
            "vehicle {} has times on {}, which is not on its route",
            stray.0, stray.1
        )));
    }
    Ok(Schedule { vehicles })
}
