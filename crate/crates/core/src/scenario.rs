//! Scenario files: network, demand and configuration in one TOML document.
//!
//! ```toml
//! [config]
//! quantum = 5
//! seed = 0
//!
//! [network]
//! junctions = ["a", "b", "c"]
//! streets = [
//!     { id = "s1", from = "a", to = "b", length = 150.0 },
//!     { id = "s2", from = "b", to = "c", length = 150.0, lanes = 2 },
//! ]
//!
//! [[demand]]
//! id = "v1"
//! origin = "s1"
//! destination = "s2"
//! ```
//!
//! `links` may be omitted, in which case every street entering a junction
//! links to every street leaving it. Instead of listing junctions and
//! streets, `[network.grid]` generates a grid (see [`crate::synth::grid`]).

use std::path::Path;
use std::time::Duration;

use num_rational::Ratio;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ids::{is_fact_constant, JunctionId, RoundaboutId, StreetId, VehicleId};
use crate::net::TrafficBands;
use crate::prep::{PrepError, RawNetwork, RawRoundabout, RawStreet, Usage};
use crate::routes::SearchConfig;
use crate::sim::{Demand, DemandKind};
use crate::solver::SolverConfig;
use crate::synth;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed scenario: {0}")]
    Toml(#[from] toml::de::Error),
    #[error("invalid scenario: {0}")]
    Invalid(String),
    #[error(transparent)]
    Network(#[from] PrepError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    #[serde(default)]
    pub config: ConfigSection,
    pub network: NetworkSection,
    #[serde(default)]
    pub demand: Vec<DemandEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConfigSection {
    /// Seconds per optimizer step.
    pub quantum: u32,
    pub seed: u64,
    pub search: SearchSection,
    pub solver: SolverSection,
    pub bands: BandsSection,
}

impl Default for ConfigSection {
    fn default() -> Self {
        Self {
            quantum: 5,
            seed: 0,
            search: SearchSection::default(),
            solver: SolverSection::default(),
            bands: BandsSection::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SearchSection {
    pub route_limit: usize,
    pub similarity_threshold: f64,
    pub top_k: usize,
}

impl Default for SearchSection {
    fn default() -> Self {
        let d = SearchConfig::default();
        Self {
            route_limit: d.route_limit,
            similarity_threshold: d.similarity_threshold,
            top_k: d.top_k,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSection {
    /// Seconds.
    pub time_limit: f64,
    /// Run the bound-tightening strategy alongside the default one.
    pub portfolio: bool,
}

impl Default for SolverSection {
    fn default() -> Self {
        Self {
            time_limit: 30.0,
            portfolio: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BandsSection {
    pub low_fraction: f64,
    pub high_fraction: f64,
    pub speeds_kmh: [f64; 3],
    pub car_slot: f64,
}

impl Default for BandsSection {
    fn default() -> Self {
        Self {
            low_fraction: 0.4,
            high_fraction: 0.7,
            speeds_kmh: [45.0, 30.0, 15.0],
            car_slot: 8.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkSection {
    #[serde(default)]
    pub junctions: Vec<String>,
    #[serde(default)]
    pub streets: Vec<StreetEntry>,
    pub links: Option<Vec<(String, String)>>,
    #[serde(default)]
    pub roundabouts: Vec<RoundaboutEntry>,
    pub grid: Option<GridEntry>,
}

fn one_lane() -> u32 {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StreetEntry {
    pub id: String,
    pub from: String,
    pub to: String,
    /// Meters.
    pub length: f64,
    #[serde(default = "one_lane")]
    pub lanes: u32,
    #[serde(default)]
    pub usage: Usage,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RoundaboutEntry {
    pub id: String,
    pub ring: Vec<String>,
    pub entries: Vec<String>,
    pub exits: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridEntry {
    pub rows: usize,
    pub cols: usize,
    pub length: f64,
    #[serde(default = "one_lane")]
    pub lanes: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DemandKindEntry {
    #[default]
    Controlled,
    Simulated,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DemandEntry {
    pub id: String,
    pub origin: String,
    pub destination: String,
    /// Seconds.
    #[serde(default)]
    pub arrival: u64,
    #[serde(default)]
    pub kind: DemandKindEntry,
    /// Fixed route of a simulated vehicle.
    pub route: Option<Vec<String>>,
}

/// A parsed and validated scenario.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub raw: RawNetwork,
    pub bands: TrafficBands,
    pub demand: Vec<Demand>,
    pub quantum: u32,
    pub seed: u64,
    pub search: SearchConfig,
    pub solver: SolverConfig,
}

fn fraction(x: f64, what: &str) -> Result<Ratio<u64>, ScenarioError> {
    if !(x > 0.0 && x < 1.0) {
        return Err(ScenarioError::Invalid(format!("{what} must be in (0, 1)")));
    }
    Ok(Ratio::new((x * 1e6).round() as u64, 1_000_000))
}

fn constant(s: &str, what: &str) -> Result<(), ScenarioError> {
    if is_fact_constant(s) {
        Ok(())
    } else {
        Err(ScenarioError::Invalid(format!(
            "{what} id {s:?} must start with a lowercase letter and contain only letters, digits and '_'"
        )))
    }
}

impl ScenarioFile {
    pub fn parse(text: &str) -> Result<Self, ScenarioError> {
        Ok(toml::from_str(text)?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario serializes")
    }

    /// Checks ids and settings and builds the raw network and demand.
    pub fn resolve(&self) -> Result<Scenario, ScenarioError> {
        let c = &self.config;
        if c.quantum == 0 {
            return Err(ScenarioError::Invalid("quantum must be positive".into()));
        }
        let bands = TrafficBands {
            low_frac: fraction(c.bands.low_fraction, "low_fraction")?,
            high_frac: fraction(c.bands.high_fraction, "high_fraction")?,
            speeds_kmh: c.bands.speeds_kmh,
            car_slot: c.bands.car_slot,
        };
        bands.validate().map_err(ScenarioError::Invalid)?;
        let search = SearchConfig {
            route_limit: c.search.route_limit,
            similarity_threshold: c.search.similarity_threshold,
            top_k: c.search.top_k,
        };
        search.validate().map_err(ScenarioError::Invalid)?;
        if !(c.solver.time_limit > 0.0) {
            return Err(ScenarioError::Invalid("time_limit must be positive".into()));
        }
        let mut solver = if c.solver.portfolio {
            SolverConfig::portfolio()
        } else {
            SolverConfig::default()
        };
        solver.time_limit = Duration::from_secs_f64(c.solver.time_limit);
        solver.seed = c.seed;

        let raw = self.network.build()?;
        let mut demand = Vec::with_capacity(self.demand.len());
        let mut seen = std::collections::BTreeSet::new();
        for d in &self.demand {
            constant(&d.id, "vehicle")?;
            if !seen.insert(d.id.as_str()) {
                return Err(ScenarioError::Invalid(format!("duplicate vehicle id {}", d.id)));
            }
            for s in [&d.origin, &d.destination].into_iter().chain(d.route.iter().flatten()) {
                if raw.street(&StreetId::new(s.as_str())).is_none() {
                    return Err(ScenarioError::Invalid(format!("vehicle {}: unknown street {s}", d.id)));
                }
            }
            let kind = match (d.kind, &d.route) {
                (DemandKindEntry::Controlled, None) => DemandKind::Controlled,
                (DemandKindEntry::Controlled, Some(_)) => {
                    return Err(ScenarioError::Invalid(format!(
                        "vehicle {}: only simulated vehicles take a fixed route",
                        d.id
                    )))
                }
                (DemandKindEntry::Simulated, r) => {
                    DemandKind::Simulated(r.as_ref().map(|r| r.iter().map(|s| StreetId::new(s.as_str())).collect()))
                }
            };
            demand.push(Demand {
                id: VehicleId::new(d.id.as_str()),
                origin: StreetId::new(d.origin.as_str()),
                destination: StreetId::new(d.destination.as_str()),
                arrival: d.arrival,
                kind,
            });
        }
        Ok(Scenario {
            raw,
            bands,
            demand,
            quantum: c.quantum,
            seed: c.seed,
            search,
            solver,
        })
    }
}

impl NetworkSection {
    fn build(&self) -> Result<RawNetwork, ScenarioError> {
        if let Some(g) = &self.grid {
            if !self.streets.is_empty() || !self.junctions.is_empty() {
                return Err(ScenarioError::Invalid("grid excludes explicit junctions and streets".into()));
            }
            if g.rows < 2 || g.cols < 2 || !(g.length > 0.0) || g.lanes == 0 {
                return Err(ScenarioError::Invalid("grid needs at least 2x2 junctions and positive length".into()));
            }
            return Ok(synth::grid(g.rows, g.cols, g.length, g.lanes));
        }
        for j in &self.junctions {
            constant(j, "junction")?;
        }
        let mut streets = Vec::with_capacity(self.streets.len());
        for s in &self.streets {
            constant(&s.id, "street")?;
            streets.push(
                RawStreet::new(s.id.as_str(), s.from.as_str(), s.to.as_str(), s.length, s.lanes).with_usage(s.usage),
            );
        }
        let links = self.links.as_ref().map(|l| {
            l.iter()
                .map(|(a, b)| (StreetId::new(a.as_str()), StreetId::new(b.as_str())))
                .collect()
        });
        let mut roundabouts = Vec::new();
        for r in &self.roundabouts {
            constant(&r.id, "roundabout")?;
            let ids = |v: &[String]| v.iter().map(|s| StreetId::new(s.as_str())).collect();
            roundabouts.push(RawRoundabout {
                id: RoundaboutId::new(r.id.as_str()),
                ring: ids(&r.ring),
                entries: ids(&r.entries),
                exits: ids(&r.exits),
            });
        }
        let junctions = self.junctions.iter().map(|j| JunctionId::new(j.as_str()));
        Ok(RawNetwork::new(junctions, streets, links, roundabouts)?)
    }
}

/// Reads, parses and validates a scenario file.
pub fn load(path: &Path) -> Result<Scenario, ScenarioError> {
    let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
        path: path.display().to_string(),
        source,
    })?;
    ScenarioFile::parse(&text)?.resolve()
}
