//! Depth-first branch and bound over route choice and exit steps.
//!
//! Controlled vehicles are assigned one at a time, route first, then the exit
//! step of each street in route order; the next street is entered at the
//! same step. Every constraint of the model only gets harder as more vehicles
//! are placed (occupancy at an existing enter event can only grow), so any
//! violation on a partial assignment prunes the subtree.

use std::sync::atomic::{AtomicBool, Ordering as AtomicOrdering};
use std::sync::{Arc, Mutex};
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::net::Step;
use crate::schedule::{Instance, ObjectiveVector, VehicleKind};

use super::Strategy;

/// Chosen candidate and exit step per street, per controlled vehicle.
pub(crate) type Assignment = Vec<(usize, Vec<Step>)>;

#[derive(Debug, Clone)]
pub(crate) struct Incumbent {
    pub objective: ObjectiveVector,
    pub assignment: Assignment,
    pub strategy: Strategy,
}

/// Best-so-far cell shared by the strategies of a portfolio.
#[derive(Debug, Default)]
pub(crate) struct Shared {
    pub best: Mutex<Option<Incumbent>>,
    pub trace: Mutex<Vec<ObjectiveVector>>,
    /// Set when some strategy has exhausted its search.
    pub done: AtomicBool,
    pub cancel: AtomicBool,
}

impl Shared {
    fn offer(&self, inc: Incumbent) {
        let mut best = self.best.lock().unwrap();
        let better = match &*best {
            None => true,
            Some(b) => {
                inc.objective < b.objective
                    || (inc.objective == b.objective
                        && inc.strategy == Strategy::ModelImproving
                        && b.strategy != Strategy::ModelImproving)
            }
        };
        if better {
            self.trace.lock().unwrap().push(inc.objective);
            *best = Some(inc);
        }
    }

    fn best_objective(&self) -> Option<ObjectiveVector> {
        self.best.lock().unwrap().as_ref().map(|b| b.objective)
    }
}

#[derive(Debug, Clone, Copy)]
struct Interval {
    vehicle: usize,
    enter: Step,
    exit: Step,
}

/// Outcome of one strategy run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum RunEnd {
    Exhausted,
    Stopped,
}

pub(crate) struct Engine<'a> {
    inst: &'a Instance,
    strategy: Strategy,
    shared: Arc<Shared>,
    deadline: Instant,

    controlled: Vec<usize>,
    order: Vec<Vec<usize>>,
    /// Per controlled position: fewest streets over live candidates.
    min_streets: Vec<u64>,
    /// Per controlled position: earliest possible destination exit.
    min_dest_exit: Vec<u64>,
    /// Per vehicle, candidate: suffix sums of low-band travel steps.
    low_suffix: Vec<Vec<Vec<u64>>>,
    sim_level1: u64,

    on_street: Vec<Vec<Interval>>,
    level2: u64,
    level1_done: u64,
    current: Assignment,

    best: Option<ObjectiveVector>,
    /// Level-2 cut for the bound-tightening passes.
    cap2: Option<u64>,
    min_over_cap: Option<u64>,
    pub nodes: u64,
    stopped: bool,
}

impl<'a> Engine<'a> {
    pub fn new(inst: &'a Instance, strategy: Strategy, seed: u64, shared: Arc<Shared>, deadline: Instant) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let controlled: Vec<usize> = (0..inst.vehicles.len())
            .filter(|&v| inst.vehicles[v].kind == VehicleKind::Controlled)
            .collect();
        let mut order = Vec::new();
        let mut min_streets = Vec::new();
        let mut min_dest_exit = Vec::new();
        for &v in &controlled {
            let veh = &inst.vehicles[v];
            // candidates that can never satisfy link continuity
            let d: Vec<bool> = (0..veh.candidates.len())
                .map(|c| !links_only_consecutive(inst, inst.route_streets(v, c)))
                .collect();
            let mut keys: Vec<usize> = (0..veh.candidates.len()).collect();
            keys.shuffle(&mut rng);
            let mut o: Vec<usize> = (0..veh.candidates.len()).filter(|&c| !d[c]).collect();
            o.sort_by(|&a, &b| {
                veh.candidates[a]
                    .route
                    .length
                    .total_cmp(&veh.candidates[b].route.length)
                    .then(keys[a].cmp(&keys[b]))
            });
            min_streets.push(o.iter().map(|&c| veh.candidates[c].route.streets.len() as u64).min().unwrap_or(0));
            min_dest_exit.push(
                o.iter()
                    .map(|&c| *veh.candidates[c].bounds.min_exit.last().unwrap() as u64)
                    .min()
                    .unwrap_or(0),
            );
            order.push(o);
        }
        let low_suffix = (0..inst.vehicles.len())
            .map(|v| {
                (0..inst.vehicles[v].candidates.len())
                    .map(|c| {
                        let streets = inst.route_streets(v, c);
                        let mut suf = vec![0u64; streets.len() + 1];
                        for i in (0..streets.len()).rev() {
                            suf[i] = suf[i + 1] + inst.streets[streets[i]].travel[0] as u64;
                        }
                        suf
                    })
                    .collect()
            })
            .collect();

        let mut on_street: Vec<Vec<Interval>> = vec![Vec::new(); inst.streets.len()];
        let mut sim_level1 = 0;
        for (v, veh) in inst.vehicles.iter().enumerate() {
            if veh.kind != VehicleKind::Simulated {
                continue;
            }
            let times = veh.fixed_times.as_ref().expect("simulated vehicle has times");
            for (&s, &(e, x)) in inst.route_streets(v, 0).iter().zip(times) {
                on_street[s].push(Interval {
                    vehicle: v,
                    enter: e,
                    exit: x,
                });
            }
            sim_level1 += times.last().map_or(0, |t| t.1 as u64);
        }
        let mut engine = Self {
            inst,
            strategy,
            shared,
            deadline,
            current: controlled.iter().map(|_| (usize::MAX, Vec::new())).collect(),
            controlled,
            order,
            min_streets,
            min_dest_exit,
            low_suffix,
            sim_level1,
            on_street,
            level2: 0,
            level1_done: 0,
            best: None,
            cap2: None,
            min_over_cap: None,
            nodes: 0,
            stopped: false,
        };
        engine.level2 = engine.initial_level2();
        engine
    }

    fn initial_level2(&self) -> u64 {
        let mut total = 0;
        for s in 0..self.on_street.len() {
            let mut ts: Vec<Step> = self.on_street[s].iter().map(|i| i.enter).collect();
            ts.sort_unstable();
            ts.dedup();
            for t in ts {
                total += self.occ(s, t) as u64;
            }
        }
        total
    }

    fn occ(&self, s: usize, t: Step) -> u32 {
        self.on_street[s]
            .iter()
            .filter(|i| i.enter <= t && t < i.exit)
            .count() as u32
    }

    fn has_event(&self, s: usize, t: Step) -> bool {
        self.on_street[s].iter().any(|i| i.enter == t)
    }

    /// Checks constraints whose occupancy sample could have changed through
    /// intervals on `s` covering steps in `[from, to)`.
    fn consistent_at(&self, s: usize, times: &[Step]) -> bool {
        let info = &self.inst.streets[s];
        for &t in times {
            let n = self.occ(s, t);
            for iv in self.on_street[s].iter().filter(|i| i.enter == t) {
                let controlled = self.inst.vehicles[iv.vehicle].kind == VehicleKind::Controlled;
                if (controlled || self.inst.strict_capacity) && n > info.capacity {
                    return false;
                }
                if controlled && iv.exit < t + info.travel_for_occupancy(n as i64) {
                    return false;
                }
            }
            if let Some(r) = info.roundabout {
                let r = &self.inst.roundabouts[r];
                let total: u64 = r
                    .members
                    .iter()
                    .filter(|&&m| self.has_event(m, t))
                    .map(|&m| self.occ(m, t) as u64)
                    .sum();
                if total > r.capacity as u64 {
                    return false;
                }
            }
        }
        true
    }

    /// Simulated-only state must already satisfy the constraints that
    /// involve simulated enter events.
    fn root_consistent(&self) -> bool {
        (0..self.on_street.len()).all(|s| {
            let mut ts: Vec<Step> = self.on_street[s].iter().map(|i| i.enter).collect();
            ts.sort_unstable();
            ts.dedup();
            self.consistent_at(s, &ts)
        })
    }

    fn should_stop(&mut self) -> bool {
        if self.stopped {
            return true;
        }
        if self.nodes.is_multiple_of(256) {
            if self.shared.cancel.load(AtomicOrdering::Relaxed)
                || self.shared.done.load(AtomicOrdering::Relaxed)
                || Instant::now() >= self.deadline
            {
                self.stopped = true;
                return true;
            }
            if let Some(b) = self.shared.best_objective() {
                if self.best.is_none_or(|own| b < own) {
                    self.best = Some(b);
                }
            }
        }
        false
    }

    /// True when the partial assignment with lower bound `lb` cannot lead
    /// to a better solution.
    fn pruned(&mut self, lb: ObjectiveVector) -> bool {
        if let Some(cap) = self.cap2 {
            if lb.level2 > cap {
                self.min_over_cap = Some(self.min_over_cap.map_or(lb.level2, |m| m.min(lb.level2)));
                return true;
            }
        }
        self.best.is_some_and(|b| lb >= b)
    }

    fn remaining_bound(&self, k: usize) -> (u64, u64) {
        let streets = self.min_streets[k + 1..].iter().sum();
        let exits = self.min_dest_exit[k + 1..].iter().sum();
        (streets, exits)
    }

    fn leaf(&mut self) {
        let obj = ObjectiveVector::new(self.level2, self.level1_done + self.sim_level1);
        if self.best.is_none_or(|b| obj < b) {
            self.best = Some(obj);
        }
        self.shared.offer(Incumbent {
            objective: obj,
            assignment: self.current.clone(),
            strategy: self.strategy,
        });
    }

    fn search_vehicle(&mut self, k: usize) {
        if k == self.controlled.len() {
            self.leaf();
            return;
        }
        let order = self.order[k].clone();
        for c in order {
            if self.should_stop() {
                return;
            }
            self.current[k] = (c, Vec::new());
            self.place(k, c, 0, 0);
        }
    }

    fn place(&mut self, k: usize, c: usize, i: usize, enter: Step) {
        self.nodes += 1;
        if self.should_stop() {
            return;
        }
        let v = self.controlled[k];
        let inst = self.inst;
        let streets = inst.route_streets(v, c);
        let bounds = &inst.vehicles[v].candidates[c].bounds;
        let s = streets[i];
        let info = &inst.streets[s];
        let n_at_entry = self.occ(s, enter) + 1;
        let mut lo = enter + info.travel_for_occupancy(n_at_entry as i64);
        let mut hi = (enter + info.max_travel).min(inst.horizon);
        let last = i + 1 == streets.len();
        if !last {
            lo = lo.max(bounds.min_enter[i + 1]);
            hi = hi.min(bounds.max_enter[i + 1]);
        }
        if lo > hi {
            return;
        }
        let (rest_streets, rest_exits) = self.remaining_bound(k);
        let event_existed = self.has_event(s, enter);
        for exit in lo..=hi {
            // events on s covered by the new interval, before adding it
            let mut covered: Vec<Step> = self.on_street[s]
                .iter()
                .map(|iv| iv.enter)
                .filter(|&t| enter <= t && t < exit)
                .collect();
            covered.sort_unstable();
            covered.dedup();
            let saved_level2 = self.level2;
            self.on_street[s].push(Interval {
                vehicle: v,
                enter,
                exit,
            });
            self.level2 += covered.len() as u64;
            if !event_existed {
                self.level2 += n_at_entry as u64;
                covered.insert(0, enter);
            }
            if self.consistent_at(s, &covered) {
                let dest_lb = if last {
                    exit as u64
                } else {
                    (exit as u64 + self.low_suffix[v][c][i + 1]).max(*bounds.min_exit.last().unwrap() as u64)
                };
                let lb = ObjectiveVector::new(
                    self.level2 + (streets.len() - i - 1) as u64 + rest_streets,
                    self.level1_done + dest_lb + rest_exits + self.sim_level1,
                );
                if !self.pruned(lb) {
                    self.current[k].1.push(exit);
                    if last {
                        self.level1_done += exit as u64;
                        self.search_vehicle(k + 1);
                        self.level1_done -= exit as u64;
                    } else {
                        self.place(k, c, i + 1, exit);
                    }
                    self.current[k].1.pop();
                }
            }
            self.on_street[s].pop();
            self.level2 = saved_level2;
            if self.stopped {
                return;
            }
        }
    }

    fn root_infeasible(&self) -> bool {
        !self.root_consistent() || self.order.iter().any(|o| o.is_empty())
    }

    /// Plain branch and bound: keep improving the incumbent until the tree
    /// is exhausted.
    pub fn run_model_improving(&mut self) -> RunEnd {
        if self.root_infeasible() {
            return RunEnd::Exhausted;
        }
        self.best = self.shared.best_objective();
        self.search_vehicle(0);
        if self.stopped {
            RunEnd::Stopped
        } else {
            RunEnd::Exhausted
        }
    }

    /// Raises a level-2 cut from the root lower bound until a solution fits
    /// under it, then minimizes level 1 at that level-2 value.
    pub fn run_bound_tightening(&mut self) -> RunEnd {
        if self.root_infeasible() {
            return RunEnd::Exhausted;
        }
        let mut cap = self.level2 + self.min_streets.iter().sum::<u64>();
        loop {
            self.cap2 = Some(cap);
            self.min_over_cap = None;
            self.best = self.shared.best_objective();
            if self.best.is_some_and(|b| b.level2 <= cap) {
                // Someone already proved a solution within the cut: finish
                // as plain branch and bound.
                self.cap2 = None;
            }
            self.search_vehicle(0);
            if self.stopped {
                return RunEnd::Stopped;
            }
            if self.best.is_some_and(|b| b.level2 <= cap) || self.cap2.is_none() {
                return RunEnd::Exhausted;
            }
            match self.min_over_cap {
                Some(next) => cap = next,
                None => return RunEnd::Exhausted,
            }
        }
    }
}

/// A route can only satisfy link continuity if the only links among its
/// streets join consecutive streets.
fn links_only_consecutive(inst: &Instance, streets: &[usize]) -> bool {
    for (i, &a) in streets.iter().enumerate() {
        for (j, &b) in streets.iter().enumerate() {
            if j != i + 1 && inst.has_link(a, b) {
                return false;
            }
        }
    }
    true
}
