use std::time::Instant;

use crate::net::Step;
use crate::schedule::{check_schedule, objective, Instance, ObjectiveVector, Schedule, StreetTimes, VehicleKind, VehicleSchedule};

use super::{SolveError, SolveResult, SolveStatus};

/// Largest number of assignments [`solve_brute_force`] will enumerate.
pub const BRUTE_FORCE_LIMIT: u128 = 10_000_000;

/// Number of assignments the enumeration visits at most: route choices times
/// exit steps per street. Enter steps after the origin are the previous
/// street's exit.
pub fn brute_force_space(instance: &Instance) -> u128 {
    let mut total: u128 = 1;
    for (v, veh) in instance.vehicles.iter().enumerate() {
        if veh.kind != VehicleKind::Controlled {
            continue;
        }
        let per_vehicle: u128 = (0..veh.candidates.len())
            .map(|c| {
                instance
                    .route_streets(v, c)
                    .iter()
                    .map(|&s| instance.streets[s].max_travel as u128)
                    .product::<u128>()
            })
            .sum();
        total = total.saturating_mul(per_vehicle);
    }
    total
}

/// Tries every route choice and exit step, keeping the first schedule with
/// the least objective that passes the rule checker.
pub fn solve_brute_force(instance: &Instance) -> Result<SolveResult, SolveError> {
    let space = brute_force_space(instance);
    if space > BRUTE_FORCE_LIMIT {
        return Err(SolveError::TooLarge(space));
    }
    let start = Instant::now();
    let mut schedule = Schedule {
        vehicles: instance
            .vehicles
            .iter()
            .map(|veh| {
                let cand = &veh.candidates[0];
                let fixed = veh.fixed_times.clone().unwrap_or_default();
                VehicleSchedule {
                    vehicle: veh.id.clone(),
                    route: cand.route.id.clone(),
                    times: cand
                        .route
                        .streets
                        .iter()
                        .zip(fixed.into_iter().chain(std::iter::repeat((0, 0))))
                        .map(|(s, (enter, exit))| StreetTimes {
                            street: s.clone(),
                            enter,
                            exit,
                        })
                        .collect(),
                }
            })
            .collect(),
    };
    let controlled: Vec<usize> = (0..instance.vehicles.len())
        .filter(|&v| instance.vehicles[v].kind == VehicleKind::Controlled)
        .collect();
    let mut search = Brute {
        instance,
        controlled,
        best: None,
        leaves: 0,
    };
    search.vehicle(&mut schedule, 0);
    let leaves = search.leaves;
    Ok(match search.best {
        Some((obj, s)) => SolveResult {
            schedule: s,
            objective: obj,
            status: SolveStatus::Optimal,
            elapsed: start.elapsed(),
            nodes_explored: leaves,
            incumbents: vec![obj],
        },
        None => SolveResult {
            schedule: Schedule::default(),
            objective: ObjectiveVector::default(),
            status: SolveStatus::Infeasible,
            elapsed: start.elapsed(),
            nodes_explored: leaves,
            incumbents: Vec::new(),
        },
    })
}

struct Brute<'a> {
    instance: &'a Instance,
    controlled: Vec<usize>,
    best: Option<(ObjectiveVector, Schedule)>,
    leaves: u64,
}

impl Brute<'_> {
    fn vehicle(&mut self, schedule: &mut Schedule, k: usize) {
        if k == self.controlled.len() {
            self.leaves += 1;
            if check_schedule(self.instance, schedule).is_empty() {
                let obj = objective(self.instance, schedule);
                if self.best.as_ref().is_none_or(|(b, _)| obj < *b) {
                    self.best = Some((obj, schedule.clone()));
                }
            }
            return;
        }
        let v = self.controlled[k];
        let veh = &self.instance.vehicles[v];
        for cand in &veh.candidates {
            schedule.vehicles[v] = VehicleSchedule {
                vehicle: veh.id.clone(),
                route: cand.route.id.clone(),
                times: cand
                    .route
                    .streets
                    .iter()
                    .map(|s| StreetTimes {
                        street: s.clone(),
                        enter: 0,
                        exit: 0,
                    })
                    .collect(),
            };
            self.street(schedule, k, 0, 0);
        }
    }

    fn street(&mut self, schedule: &mut Schedule, k: usize, i: usize, enter: Step) {
        let v = self.controlled[k];
        if i == schedule.vehicles[v].times.len() {
            self.vehicle(schedule, k + 1);
            return;
        }
        let info = self.instance.street(&schedule.vehicles[v].times[i].street).expect("street in instance");
        // exits past the horizon break the exit window anyway
        let hi = (enter + info.max_travel).min(self.instance.horizon);
        for exit in enter + 1..=hi {
            let t = &mut schedule.vehicles[v].times[i];
            t.enter = enter;
            t.exit = exit;
            self.street(schedule, k, i + 1, exit);
        }
    }
}
