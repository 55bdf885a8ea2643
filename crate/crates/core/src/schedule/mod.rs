//! The route-and-timing problem: instance tables, schedules, the rule
//! checker and the two-level objective.
//!
//! Time is discrete. Every vehicle starts on its origin street at step 0; a
//! controlled vehicle picks one candidate route and an exit step for each
//! street, entering the next street at the step it leaves the previous one.
//! Occupancy of a street is sampled only at steps where some vehicle enters
//! it, and the objective sums those samples (first level) before the
//! vehicles' exit steps at their destinations (second level).

mod check;
mod instance;

pub use check::{check_schedule, objective, occupancy, Rule, Violation};
pub use instance::{
    build_instance, Candidate, Instance, InstanceError, RoundaboutInfo, StreetInfo, Vehicle, VehicleKind,
};

use std::cmp::Ordering;
use std::fmt;

use crate::ids::{RouteId, StreetId, VehicleId};
use crate::net::Step;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StreetTimes {
    pub street: StreetId,
    pub enter: Step,
    pub exit: Step,
}

/// One vehicle's chosen route with enter/exit steps on each of its streets,
/// in route order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VehicleSchedule {
    pub vehicle: VehicleId,
    pub route: RouteId,
    pub times: Vec<StreetTimes>,
}

impl VehicleSchedule {
    pub fn enter(&self, street: &StreetId) -> Option<Step> {
        self.times.iter().find(|t| &t.street == street).map(|t| t.enter)
    }

    pub fn exit(&self, street: &StreetId) -> Option<Step> {
        self.times.iter().find(|t| &t.street == street).map(|t| t.exit)
    }
}

/// A schedule for a set of vehicles.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Schedule {
    pub vehicles: Vec<VehicleSchedule>,
}

impl Schedule {
    pub fn get(&self, id: &VehicleId) -> Option<&VehicleSchedule> {
        self.vehicles.iter().find(|v| &v.vehicle == id)
    }

    pub fn is_empty(&self) -> bool {
        self.vehicles.is_empty()
    }

    /// Sorted copy, vehicles by id. Two schedules are the same assignment
    /// iff their canonical forms are equal.
    pub fn canonical(&self) -> Schedule {
        let mut v = self.vehicles.clone();
        v.sort_by(|a, b| a.vehicle.cmp(&b.vehicle));
        Schedule { vehicles: v }
    }
}

/// Two-level cost, compared lexicographically: total sampled occupancy
/// first, then the sum of destination exit steps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct ObjectiveVector {
    pub level2: u64,
    pub level1: u64,
}

impl ObjectiveVector {
    pub fn new(level2: u64, level1: u64) -> Self {
        Self { level2, level1 }
    }
}

impl Ord for ObjectiveVector {
    fn cmp(&self, other: &Self) -> Ordering {
        (self.level2, self.level1).cmp(&(other.level2, other.level1))
    }
}

impl PartialOrd for ObjectiveVector {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for ObjectiveVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.level2, self.level1)
    }
}
