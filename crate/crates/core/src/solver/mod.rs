//! Exact solver for route-and-timing instances.
//!
//! [`solve_exact`] runs a depth-first branch and bound that propagates every
//! rule of the model on partial assignments. Two strategies are available,
//! either alone or as a two-thread portfolio sharing one incumbent:
//! plain incumbent improvement and a level-2 bound-tightening search.
//! [`solve_brute_force`] enumerates every assignment and is meant as a
//! reference for small instances.

mod asp;
mod brute;
mod engine;

pub use asp::{export_asp_facts, import_asp_model, render_asp_model, AspError};
pub use brute::{brute_force_space, solve_brute_force, BRUTE_FORCE_LIMIT};

use std::sync::atomic::Ordering as AtomicOrdering;
use std::sync::Arc;
use std::thread;
use std::time::{Duration, Instant};

use thiserror::Error;

use crate::net::Step;
use crate::schedule::{Instance, ObjectiveVector, Schedule, StreetTimes, VehicleKind, VehicleSchedule};

use engine::{Assignment, Engine, RunEnd, Shared};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Strategy {
    ModelImproving,
    BoundTightening,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SolverConfig {
    pub time_limit: Duration,
    pub seed: u64,
    /// Strategies to run; more than one runs them in parallel.
    pub strategies: Vec<Strategy>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            time_limit: Duration::from_secs(30),
            seed: 0,
            strategies: vec![Strategy::ModelImproving],
        }
    }
}

impl SolverConfig {
    pub fn portfolio() -> Self {
        Self {
            strategies: vec![Strategy::ModelImproving, Strategy::BoundTightening],
            ..Self::default()
        }
    }

    pub fn with_time_limit(mut self, limit: Duration) -> Self {
        self.time_limit = limit;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    /// Time limit hit; the schedule is the best found.
    FeasibleTimeout,
    Infeasible,
}

#[derive(Debug, Clone)]
pub struct SolveResult {
    pub schedule: Schedule,
    pub objective: ObjectiveVector,
    pub status: SolveStatus,
    pub elapsed: Duration,
    pub nodes_explored: u64,
    /// Objective of each improving incumbent, in the order found.
    pub incumbents: Vec<ObjectiveVector>,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SolveError {
    #[error("instance is infeasible")]
    Infeasible,
    #[error("time limit reached before any feasible schedule was found")]
    TimeoutNoIncumbent,
    #[error("search space of {0} assignments is too large for enumeration")]
    TooLarge(u128),
    #[error("no strategy configured")]
    NoStrategy,
}

/// Finds a schedule minimizing the objective. Returns `Optimal` when the
/// search completed, `FeasibleTimeout` with the incumbent when the time limit
/// struck first.
pub fn solve_exact(instance: &Instance, config: &SolverConfig) -> Result<SolveResult, SolveError> {
    if config.strategies.is_empty() {
        return Err(SolveError::NoStrategy);
    }
    let start = Instant::now();
    let deadline = start + config.time_limit;
    let shared = Arc::new(Shared::default());

    let run = |strategy: Strategy, shared: Arc<Shared>| -> (RunEnd, u64) {
        let mut engine = Engine::new(instance, strategy, config.seed, shared.clone(), deadline);
        let end = match strategy {
            Strategy::ModelImproving => engine.run_model_improving(),
            Strategy::BoundTightening => engine.run_bound_tightening(),
        };
        if end == RunEnd::Exhausted {
            shared.done.store(true, AtomicOrdering::Relaxed);
        }
        (end, engine.nodes)
    };

    let outcomes: Vec<(RunEnd, u64)> = if config.strategies.len() == 1 {
        vec![run(config.strategies[0], shared.clone())]
    } else {
        thread::scope(|scope| {
            let handles: Vec<_> = config
                .strategies
                .iter()
                .map(|&s| {
                    let shared = shared.clone();
                    let run = &run;
                    scope.spawn(move || run(s, shared))
                })
                .collect();
            handles.into_iter().map(|h| h.join().expect("solver thread")).collect()
        })
    };

    let exhausted = outcomes.iter().any(|o| o.0 == RunEnd::Exhausted);
    let nodes = outcomes.iter().map(|o| o.1).sum();
    let best = shared.best.lock().unwrap().take();
    let incumbents = std::mem::take(&mut *shared.trace.lock().unwrap());
    match best {
        None if exhausted => Err(SolveError::Infeasible),
        None => Err(SolveError::TimeoutNoIncumbent),
        Some(inc) => Ok(SolveResult {
            schedule: build_schedule(instance, &inc.assignment),
            objective: inc.objective,
            status: if exhausted {
                SolveStatus::Optimal
            } else {
                SolveStatus::FeasibleTimeout
            },
            elapsed: start.elapsed(),
            nodes_explored: nodes,
            incumbents,
        }),
    }
}

/// Turns a per-controlled-vehicle assignment into a schedule covering every
/// vehicle of the instance, in instance order.
pub(crate) fn build_schedule(instance: &Instance, assignment: &Assignment) -> Schedule {
    let mut next = assignment.iter();
    let vehicles = instance
        .vehicles
        .iter()
        .map(|veh| {
            let (c, times): (usize, Vec<(Step, Step)>) = match veh.kind {
                VehicleKind::Simulated => (0, veh.fixed_times.clone().unwrap_or_default()),
                VehicleKind::Controlled => {
                    let (c, exits) = next.next().expect("assignment covers controlled vehicles");
                    let mut enter = 0;
                    let times = exits
                        .iter()
                        .map(|&x| {
                            let t = (enter, x);
                            enter = x;
                            t
                        })
                        .collect();
                    (*c, times)
                }
            };
            let cand = &veh.candidates[c];
            VehicleSchedule {
                vehicle: veh.id.clone(),
                route: cand.route.id.clone(),
                times: cand
                    .route
                    .streets
                    .iter()
                    .zip(times)
                    .map(|(s, (enter, exit))| StreetTimes {
                        street: s.clone(),
                        enter,
                        exit,
                    })
                    .collect(),
            }
        })
        .collect();
    Schedule { vehicles }
}
