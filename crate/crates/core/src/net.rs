//! Simplified road network and the street capacity / congestion speed model.
//!
//! A street's capacity is the number of car slots that fit on it,
//! `ceil(lanes * length / car_slot)`, never less than one. Its speed drops
//! through three bands as occupancy crosses fixed fractions of that capacity.
//! Band thresholds are compared in exact rational arithmetic.

use std::collections::{BTreeMap, HashMap};

use num_rational::Ratio;
use thiserror::Error;

use crate::ids::{JunctionId, RoundaboutId, StreetId};

/// Discrete optimizer time step index.
pub type Step = u32;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NetworkError {
    #[error("street {0} has non-positive length")]
    BadLength(StreetId),
    #[error("street {0} has zero lanes")]
    NoLanes(StreetId),
    #[error("duplicate street id {0}")]
    DuplicateStreet(StreetId),
    #[error("link {0} -> {1} references an unknown street")]
    DanglingLink(StreetId, StreetId),
    #[error("link {0} -> {1} does not meet at a junction")]
    DisjointLink(StreetId, StreetId),
    #[error("roundabout {0} references unknown street {1}")]
    UnknownRoundaboutMember(RoundaboutId, StreetId),
}

/// Congestion level of a street.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Band {
    Low,
    Medium,
    Heavy,
}

impl Band {
    pub const ALL: [Band; 3] = [Band::Low, Band::Medium, Band::Heavy];

    pub fn name(self) -> &'static str {
        match self {
            Band::Low => "low",
            Band::Medium => "medium",
            Band::Heavy => "heavy",
        }
    }

    fn index(self) -> usize {
        self as usize
    }
}

/// Occupancy thresholds, band speeds and the per-car slot length.
#[derive(Debug, Clone, PartialEq)]
pub struct TrafficBands {
    /// Fraction of capacity at which traffic becomes medium.
    pub low_frac: Ratio<u64>,
    /// Fraction of capacity at which traffic becomes heavy.
    pub high_frac: Ratio<u64>,
    /// Speeds in km/h for low, medium and heavy traffic.
    pub speeds_kmh: [f64; 3],
    /// Meters of street occupied by one car, safety gap included.
    pub car_slot: f64,
}

impl Default for TrafficBands {
    fn default() -> Self {
        Self {
            low_frac: Ratio::new(2, 5),
            high_frac: Ratio::new(7, 10),
            speeds_kmh: [45.0, 30.0, 15.0],
            car_slot: 8.0,
        }
    }
}

impl TrafficBands {
    pub fn validate(&self) -> Result<(), String> {
        let zero = Ratio::from_integer(0);
        let one = Ratio::from_integer(1);
        if !(zero < self.low_frac && self.low_frac < self.high_frac && self.high_frac < one) {
            return Err("band fractions must satisfy 0 < low < high < 1".into());
        }
        let [l, m, h] = self.speeds_kmh;
        if !(l > m && m > h && h > 0.0) {
            return Err("band speeds must be positive and strictly decreasing".into());
        }
        if !(self.car_slot > 0.0) {
            return Err("car slot must be positive".into());
        }
        Ok(())
    }

    /// Speed of a band in meters per second.
    pub fn speed_ms(&self, band: Band) -> f64 {
        self.speeds_kmh[band.index()] / 3.6
    }

    /// Street capacity in vehicles: `ceil(lanes * length / car_slot)`, at least 1.
    pub fn capacity(&self, length: f64, lanes: u32) -> u32 {
        let slots = lanes as f64 * length / self.car_slot;
        (ceil_tolerant(slots) as u32).max(1)
    }

    /// Band for `occupancy` vehicles on a street of `capacity`. A tie on a
    /// threshold goes to the more congested band.
    pub fn band_for(&self, capacity: u32, occupancy: u32) -> Band {
        let occ = Ratio::from_integer(occupancy as u64);
        let cap = capacity as u64;
        if occ >= self.high_frac * cap {
            Band::Heavy
        } else if occ >= self.low_frac * cap {
            Band::Medium
        } else {
            Band::Low
        }
    }

    /// Exact `[min, max)` occupancy range that maps to `band`; `None` for an
    /// unbounded upper end.
    pub fn threshold(&self, capacity: u32, band: Band) -> (Ratio<u64>, Option<Ratio<u64>>) {
        let cap = capacity as u64;
        match band {
            Band::Low => (Ratio::from_integer(0), Some(self.low_frac * cap)),
            Band::Medium => (self.low_frac * cap, Some(self.high_frac * cap)),
            Band::Heavy => (self.high_frac * cap, None),
        }
    }

    /// Continuous traversal time in seconds.
    pub fn travel_seconds(&self, length: f64, band: Band) -> f64 {
        length / self.speed_ms(band)
    }

    /// Traversal time in whole optimizer steps, rounded up, at least one.
    pub fn travel_steps(&self, length: f64, band: Band, quantum: u32) -> Step {
        assert!(quantum > 0, "quantum must be positive");
        let steps = self.travel_seconds(length, band) / quantum as f64;
        (ceil_tolerant(steps) as Step).max(1)
    }
}

/// Ceiling that ignores floating point noise just above an integer.
pub(crate) fn ceil_tolerant(x: f64) -> f64 {
    let r = x.round();
    if (x - r).abs() < 1e-9 {
        r
    } else {
        x.ceil()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Street {
    pub id: StreetId,
    pub from: JunctionId,
    pub to: JunctionId,
    /// Meters.
    pub length: f64,
    pub lanes: u32,
    pub roundabout: Option<RoundaboutId>,
    /// Original street ids this street was built from.
    pub sources: Vec<StreetId>,
}

impl Street {
    pub fn new(
        id: impl Into<StreetId>,
        from: impl Into<JunctionId>,
        to: impl Into<JunctionId>,
        length: f64,
        lanes: u32,
    ) -> Self {
        let id = id.into();
        Self {
            sources: vec![id.clone()],
            id,
            from: from.into(),
            to: to.into(),
            length,
            lanes,
            roundabout: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Roundabout {
    pub id: RoundaboutId,
    pub members: Vec<StreetId>,
    /// Shared vehicle budget of all member streets.
    pub capacity: u32,
}

/// Immutable directed street graph. Streets are stored sorted by id, so
/// comparing index sequences orders routes like comparing id sequences.
#[derive(Debug, Clone)]
pub struct Network {
    streets: Vec<Street>,
    index: HashMap<StreetId, usize>,
    out_links: Vec<Vec<usize>>,
    roundabouts: Vec<Roundabout>,
    bands: TrafficBands,
}

impl Network {
    pub fn new(
        mut streets: Vec<Street>,
        links: &[(StreetId, StreetId)],
        roundabouts: Vec<Roundabout>,
        bands: TrafficBands,
    ) -> Result<Self, NetworkError> {
        streets.sort_by(|a, b| a.id.cmp(&b.id));
        let mut index = HashMap::with_capacity(streets.len());
        for (i, s) in streets.iter().enumerate() {
            if !(s.length > 0.0) {
                return Err(NetworkError::BadLength(s.id.clone()));
            }
            if s.lanes == 0 {
                return Err(NetworkError::NoLanes(s.id.clone()));
            }
            if index.insert(s.id.clone(), i).is_some() {
                return Err(NetworkError::DuplicateStreet(s.id.clone()));
            }
        }
        let mut out_links = vec![Vec::new(); streets.len()];
        for (a, b) in links {
            let (Some(&ia), Some(&ib)) = (index.get(a), index.get(b)) else {
                return Err(NetworkError::DanglingLink(a.clone(), b.clone()));
            };
            if streets[ia].to != streets[ib].from {
                return Err(NetworkError::DisjointLink(a.clone(), b.clone()));
            }
            out_links[ia].push(ib);
        }
        for l in &mut out_links {
            l.sort_unstable();
            l.dedup();
        }
        let mut roundabouts = roundabouts;
        roundabouts.sort_by(|a, b| a.id.cmp(&b.id));
        for r in &mut roundabouts {
            r.members.sort();
            for m in &r.members {
                let Some(&i) = index.get(m) else {
                    return Err(NetworkError::UnknownRoundaboutMember(r.id.clone(), m.clone()));
                };
                streets[i].roundabout = Some(r.id.clone());
            }
        }
        Ok(Self {
            streets,
            index,
            out_links,
            roundabouts,
            bands,
        })
    }

    pub fn streets(&self) -> &[Street] {
        &self.streets
    }

    pub fn street(&self, idx: usize) -> &Street {
        &self.streets[idx]
    }

    pub fn index_of(&self, id: &StreetId) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn by_id(&self, id: &StreetId) -> Option<&Street> {
        self.index_of(id).map(|i| &self.streets[i])
    }

    pub fn successors(&self, idx: usize) -> &[usize] {
        &self.out_links[idx]
    }

    pub fn has_link(&self, a: usize, b: usize) -> bool {
        self.out_links[a].binary_search(&b).is_ok()
    }

    /// All links as id pairs, in street order.
    pub fn links(&self) -> Vec<(StreetId, StreetId)> {
        self.out_links
            .iter()
            .enumerate()
            .flat_map(|(a, outs)| {
                outs.iter()
                    .map(move |&b| (self.streets[a].id.clone(), self.streets[b].id.clone()))
            })
            .collect()
    }

    pub fn roundabouts(&self) -> &[Roundabout] {
        &self.roundabouts
    }

    pub fn bands(&self) -> &TrafficBands {
        &self.bands
    }

    pub fn capacity(&self, idx: usize) -> u32 {
        let s = &self.streets[idx];
        self.bands.capacity(s.length, s.lanes)
    }

    pub fn travel_steps(&self, idx: usize, band: Band, quantum: u32) -> Step {
        self.bands.travel_steps(self.streets[idx].length, band, quantum)
    }

    /// Junction ids mapped to the streets leaving them.
    pub fn junction_out(&self) -> BTreeMap<&JunctionId, Vec<usize>> {
        let mut m: BTreeMap<&JunctionId, Vec<usize>> = BTreeMap::new();
        for (i, s) in self.streets.iter().enumerate() {
            m.entry(&s.from).or_default().push(i);
        }
        m
    }
}
