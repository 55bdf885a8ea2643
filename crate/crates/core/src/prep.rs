//! Network simplification: pruning unusable streets, consolidating
//! roundabouts into one street per entry/exit pair, merging pass-through
//! junctions, and picking the time quantum.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ids::{JunctionId, RoundaboutId, StreetId};
use crate::net::{Band, Network, NetworkError, Roundabout, Street, TrafficBands};
use crate::routes::Route;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PrepError {
    #[error("no drivable street left after pruning")]
    EmptyNetwork,
    #[error("roundabout {0} is malformed: {1}")]
    MalformedRoundabout(RoundaboutId, String),
    #[error("invalid raw network: {0}")]
    Invalid(String),
    #[error(transparent)]
    Network(#[from] NetworkError),
}

/// Who may drive on a street.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Usage {
    #[default]
    General,
    /// Reserved, e.g. for buses.
    Restricted,
    NoTraffic,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RawStreet {
    pub id: StreetId,
    pub from: JunctionId,
    pub to: JunctionId,
    pub length: f64,
    pub lanes: u32,
    pub usage: Usage,
    pub roundabout: Option<RoundaboutId>,
    pub sources: Vec<StreetId>,
}

impl RawStreet {
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
            usage: Usage::General,
            roundabout: None,
        }
    }

    pub fn with_usage(mut self, usage: Usage) -> Self {
        self.usage = usage;
        self
    }
}

/// Roundabout annotation on a raw network: the ring of small streets plus
/// the named streets entering and leaving it.
#[derive(Debug, Clone, PartialEq)]
pub struct RawRoundabout {
    pub id: RoundaboutId,
    pub ring: Vec<StreetId>,
    pub entries: Vec<StreetId>,
    pub exits: Vec<StreetId>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RawNetwork {
    pub junctions: BTreeSet<JunctionId>,
    /// Sorted by id.
    pub streets: Vec<RawStreet>,
    pub links: BTreeSet<(StreetId, StreetId)>,
    /// Rings not yet consolidated.
    pub roundabouts: Vec<RawRoundabout>,
    /// Roundabouts already consolidated into synthetic streets.
    pub consolidated: Vec<Roundabout>,
}

impl RawNetwork {
    /// Builds and validates a raw network. When `links` is `None` every pair
    /// of streets meeting at a junction is linked.
    pub fn new(
        junctions: impl IntoIterator<Item = JunctionId>,
        mut streets: Vec<RawStreet>,
        links: Option<Vec<(StreetId, StreetId)>>,
        roundabouts: Vec<RawRoundabout>,
    ) -> Result<Self, PrepError> {
        streets.sort_by(|a, b| a.id.cmp(&b.id));
        let links = match links {
            Some(l) => l.into_iter().collect(),
            None => derive_links(&streets),
        };
        let raw = Self {
            junctions: junctions.into_iter().collect(),
            streets,
            links,
            roundabouts,
            consolidated: Vec::new(),
        };
        raw.validate()?;
        Ok(raw)
    }

    pub fn validate(&self) -> Result<(), PrepError> {
        let mut ids = HashMap::new();
        for s in &self.streets {
            if ids.insert(&s.id, s).is_some() {
                return Err(PrepError::Invalid(format!("duplicate street id {}", s.id)));
            }
            for j in [&s.from, &s.to] {
                if !self.junctions.contains(j) {
                    return Err(PrepError::Invalid(format!(
                        "street {} references undeclared junction {j}",
                        s.id
                    )));
                }
            }
            if !(s.length > 0.0) || s.lanes == 0 {
                return Err(PrepError::Invalid(format!(
                    "street {} needs positive length and lanes",
                    s.id
                )));
            }
        }
        for (a, b) in &self.links {
            let (Some(sa), Some(sb)) = (ids.get(a), ids.get(b)) else {
                return Err(PrepError::Invalid(format!("dangling link {a} -> {b}")));
            };
            if sa.to != sb.from {
                return Err(PrepError::Invalid(format!(
                    "link {a} -> {b} does not meet at a junction"
                )));
            }
        }
        for r in &self.roundabouts {
            for s in r.ring.iter().chain(&r.entries).chain(&r.exits) {
                if !ids.contains_key(s) {
                    return Err(PrepError::Invalid(format!(
                        "roundabout {} references unknown street {s}",
                        r.id
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn street(&self, id: &StreetId) -> Option<&RawStreet> {
        self.streets
            .binary_search_by(|s| s.id.cmp(id))
            .ok()
            .map(|i| &self.streets[i])
    }

    pub fn total_length(&self) -> f64 {
        self.streets.iter().map(|s| s.length).sum()
    }

    /// Converts into the immutable network model. Fails if rings are still
    /// unconsolidated.
    pub fn into_network(self, bands: TrafficBands) -> Result<Network, PrepError> {
        if let Some(r) = self.roundabouts.first() {
            return Err(PrepError::MalformedRoundabout(
                r.id.clone(),
                "ring not consolidated".into(),
            ));
        }
        let streets = self
            .streets
            .into_iter()
            .map(|s| Street {
                id: s.id,
                from: s.from,
                to: s.to,
                length: s.length,
                lanes: s.lanes,
                roundabout: s.roundabout,
                sources: s.sources,
            })
            .collect();
        let links: Vec<_> = self.links.into_iter().collect();
        Ok(Network::new(streets, &links, self.consolidated, bands)?)
    }
}

/// Every `(a, b)` with `a.to == b.from`.
pub fn derive_links(streets: &[RawStreet]) -> BTreeSet<(StreetId, StreetId)> {
    let mut by_from: BTreeMap<&JunctionId, Vec<&StreetId>> = BTreeMap::new();
    for s in streets {
        by_from.entry(&s.from).or_default().push(&s.id);
    }
    let mut links = BTreeSet::new();
    for s in streets {
        for b in by_from.get(&s.to).into_iter().flatten() {
            links.insert((s.id.clone(), (*b).clone()));
        }
    }
    links
}

/// Drops restricted and no-traffic streets with every link touching them.
pub fn prune_non_drivable(raw: &RawNetwork) -> Result<RawNetwork, PrepError> {
    let keep: BTreeSet<&StreetId> = raw
        .streets
        .iter()
        .filter(|s| s.usage == Usage::General)
        .map(|s| &s.id)
        .collect();
    if keep.is_empty() {
        return Err(PrepError::EmptyNetwork);
    }
    let streets = raw
        .streets
        .iter()
        .filter(|s| keep.contains(&s.id))
        .cloned()
        .collect();
    let links = raw
        .links
        .iter()
        .filter(|(a, b)| keep.contains(a) && keep.contains(b))
        .cloned()
        .collect();
    let roundabouts = raw
        .roundabouts
        .iter()
        .map(|r| RawRoundabout {
            id: r.id.clone(),
            ring: r.ring.clone(),
            entries: r.entries.iter().filter(|s| keep.contains(s)).cloned().collect(),
            exits: r.exits.iter().filter(|s| keep.contains(s)).cloned().collect(),
        })
        .collect();
    Ok(RawNetwork {
        junctions: raw.junctions.clone(),
        streets,
        links,
        roundabouts,
        consolidated: raw.consolidated.clone(),
    })
}

/// Joins the single incoming and single outgoing street of every pass-through
/// junction, repeated until nothing changes. The merged street keeps the id
/// of the upstream street, sums lengths, takes the smaller lane count and
/// concatenates sources. Streets of consolidated roundabouts are never
/// merged; ring segments of an unconsolidated ring only merge with each other.
pub fn merge_degree_two(raw: &RawNetwork) -> RawNetwork {
    let mut net = raw.clone();
    while let Some((a, b)) = find_mergeable(&net) {
        apply_merge(&mut net, &a, &b);
    }
    net
}

fn ring_of<'a>(net: &'a RawNetwork, id: &StreetId) -> Option<&'a RoundaboutId> {
    net.roundabouts
        .iter()
        .find(|r| r.ring.contains(id))
        .map(|r| &r.id)
}

fn find_mergeable(net: &RawNetwork) -> Option<(StreetId, StreetId)> {
    let mut incoming: BTreeMap<&JunctionId, Vec<&RawStreet>> = BTreeMap::new();
    let mut outgoing: BTreeMap<&JunctionId, Vec<&RawStreet>> = BTreeMap::new();
    for s in &net.streets {
        outgoing.entry(&s.from).or_default().push(s);
        incoming.entry(&s.to).or_default().push(s);
    }
    for (j, ins) in &incoming {
        let Some(outs) = outgoing.get(j) else { continue };
        if ins.len() != 1 || outs.len() != 1 {
            continue;
        }
        let (a, b) = (ins[0], outs[0]);
        if a.id == b.id || a.from == b.to {
            continue;
        }
        if a.roundabout.is_some() || b.roundabout.is_some() {
            continue;
        }
        if !net.links.contains(&(a.id.clone(), b.id.clone())) {
            continue;
        }
        if ring_of(net, &a.id) != ring_of(net, &b.id) {
            continue;
        }
        return Some((a.id.clone(), b.id.clone()));
    }
    None
}

fn apply_merge(net: &mut RawNetwork, a: &StreetId, b: &StreetId) {
    let bi = net.streets.iter().position(|s| &s.id == b).unwrap();
    let bs = net.streets.remove(bi);
    let as_ = net.streets.iter_mut().find(|s| &s.id == a).unwrap();
    as_.to = bs.to;
    as_.length += bs.length;
    as_.lanes = as_.lanes.min(bs.lanes);
    as_.sources.extend(bs.sources);
    net.links = std::mem::take(&mut net.links)
        .into_iter()
        .filter(|(x, y)| !(x == a && y == b))
        .map(|(x, y)| if &x == b { (a.clone(), y) } else { (x, y) })
        .collect();
    for r in &mut net.roundabouts {
        if r.ring.contains(b) {
            r.ring.retain(|s| s != b);
        }
        for s in r.entries.iter_mut().chain(r.exits.iter_mut()) {
            if s == b {
                *s = a.clone();
            }
        }
    }
}

/// Replaces each annotated ring with one street per reachable (entry, exit)
/// pair, length equal to the ring arc walked between them. The roundabout's
/// capacity is the sum of its ring segments' capacities.
pub fn expand_roundabouts(
    raw: &RawNetwork,
    bands: &TrafficBands,
) -> Result<(RawNetwork, BTreeMap<RoundaboutId, usize>), PrepError> {
    let mut net = raw.clone();
    let mut expansions = BTreeMap::new();
    let rings = std::mem::take(&mut net.roundabouts);
    let mut ring_ids: BTreeSet<StreetId> = BTreeSet::new();
    let mut new_streets = Vec::new();
    let mut new_links = Vec::new();
    for ring in &rings {
        let (synthetic, links, capacity) = expand_one(raw, ring, bands)?;
        expansions.insert(ring.id.clone(), synthetic.len());
        net.consolidated.push(Roundabout {
            id: ring.id.clone(),
            members: synthetic.iter().map(|s| s.id.clone()).collect(),
            capacity,
        });
        ring_ids.extend(ring.ring.iter().cloned());
        new_streets.extend(synthetic);
        new_links.extend(links);
    }
    net.streets.retain(|s| !ring_ids.contains(&s.id));
    net.links
        .retain(|(a, b)| !ring_ids.contains(a) && !ring_ids.contains(b));
    for s in new_streets {
        if net.street(&s.id).is_some() {
            return Err(PrepError::Invalid(format!(
                "synthetic roundabout street {} collides with an existing id",
                s.id
            )));
        }
        net.streets.push(s);
        net.streets.sort_by(|a, b| a.id.cmp(&b.id));
    }
    net.links.extend(new_links);
    Ok((net, expansions))
}

type Expansion = (Vec<RawStreet>, Vec<(StreetId, StreetId)>, u32);

fn expand_one(raw: &RawNetwork, ring: &RawRoundabout, bands: &TrafficBands) -> Result<Expansion, PrepError> {
    let malformed = |why: &str| PrepError::MalformedRoundabout(ring.id.clone(), why.to_owned());
    if ring.ring.is_empty() {
        return Err(malformed("empty ring"));
    }
    let segs: Vec<&RawStreet> = ring
        .ring
        .iter()
        .map(|id| raw.street(id).ok_or_else(|| malformed("unknown ring street")))
        .collect::<Result<_, _>>()?;
    let mut next_from: HashMap<&JunctionId, &RawStreet> = HashMap::new();
    let mut into: BTreeSet<&JunctionId> = BTreeSet::new();
    for s in &segs {
        if next_from.insert(&s.from, s).is_some() || !into.insert(&s.to) {
            return Err(malformed("ring is not a single directed cycle"));
        }
    }
    // Walk once around from the first segment; must visit every segment.
    let start = &segs[0].from;
    let mut at = start;
    let mut seen = 0;
    loop {
        let Some(s) = next_from.get(at) else {
            return Err(malformed("ring is not a single directed cycle"));
        };
        seen += 1;
        at = &s.to;
        if at == start {
            break;
        }
        if seen > segs.len() {
            return Err(malformed("ring is not a single directed cycle"));
        }
    }
    if seen != segs.len() {
        return Err(malformed("ring is not a single directed cycle"));
    }

    let mut entries: Vec<&RawStreet> = Vec::new();
    for id in &ring.entries {
        let s = raw.street(id).ok_or_else(|| malformed("unknown entry"))?;
        if !next_from.contains_key(&s.to) {
            return Err(malformed("entry does not end on the ring"));
        }
        entries.push(s);
    }
    let mut exits: Vec<&RawStreet> = Vec::new();
    for id in &ring.exits {
        let s = raw.street(id).ok_or_else(|| malformed("unknown exit"))?;
        if !next_from.contains_key(&s.from) {
            return Err(malformed("exit does not start on the ring"));
        }
        exits.push(s);
    }
    entries.sort_by(|a, b| a.id.cmp(&b.id));
    exits.sort_by(|a, b| a.id.cmp(&b.id));

    let mut streets = Vec::new();
    let mut links = Vec::new();
    for e in &entries {
        for x in &exits {
            if e.to == x.from {
                continue;
            }
            let mut at = &e.to;
            let mut length = 0.0;
            let mut lanes = u32::MAX;
            let mut sources = Vec::new();
            while at != &x.from {
                let s = next_from[at];
                length += s.length;
                lanes = lanes.min(s.lanes);
                sources.push(s.id.clone());
                at = &s.to;
            }
            let id = StreetId::new(format!("{}_{}_{}", ring.id, e.id, x.id));
            links.push((e.id.clone(), id.clone()));
            links.push((id.clone(), x.id.clone()));
            streets.push(RawStreet {
                id,
                from: e.to.clone(),
                to: x.from.clone(),
                length,
                lanes,
                usage: Usage::General,
                roundabout: Some(ring.id.clone()),
                sources,
            });
        }
    }
    let capacity = segs.iter().map(|s| bands.capacity(s.length, s.lanes)).sum();
    Ok((streets, links, capacity))
}

/// Consolidates every ring of `raw` and returns the resulting network.
pub fn consolidate_roundabouts(raw: &RawNetwork, bands: &TrafficBands) -> Result<Network, PrepError> {
    let (net, _) = expand_roundabouts(raw, bands)?;
    net.into_network(bands.clone())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PrepOptions {
    /// Consolidate roundabouts before merging pass-through junctions. When
    /// false, consecutive ring segments joined by a plain junction are merged
    /// first, which changes the roundabout's summed capacity.
    pub roundabouts_first: bool,
}

impl Default for PrepOptions {
    fn default() -> Self {
        Self {
            roundabouts_first: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PrepReport {
    pub removed_streets: usize,
    pub merged_chains: usize,
    pub roundabout_expansions: BTreeMap<RoundaboutId, usize>,
    /// Original street id to the simplified streets built from it.
    pub id_map: BTreeMap<StreetId, Vec<StreetId>>,
}

impl PrepReport {
    /// The simplified street a vehicle standing on `original` is on. Only
    /// defined for streets that map to exactly one simplified street.
    pub fn resolve(&self, original: &StreetId) -> Option<&StreetId> {
        match self.id_map.get(original)?.as_slice() {
            [one] => Some(one),
            _ => None,
        }
    }
}

impl fmt::Display for PrepReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "removed_streets = {}", self.removed_streets)?;
        writeln!(f, "merged_chains = {}", self.merged_chains)?;
        for (r, n) in &self.roundabout_expansions {
            writeln!(f, "roundabout {r} expansions = {n}")?;
        }
        for (orig, simp) in &self.id_map {
            let names: Vec<&str> = simp.iter().map(|s| s.as_str()).collect();
            writeln!(f, "map {orig} -> {}", names.join(","))?;
        }
        Ok(())
    }
}

/// Full pipeline: prune, consolidate roundabouts and merge pass-through
/// junctions (order per `opts`), then build the network.
pub fn simplify(
    raw: &RawNetwork,
    bands: &TrafficBands,
    opts: &PrepOptions,
) -> Result<(Network, PrepReport), PrepError> {
    let pruned = prune_non_drivable(raw)?;
    let removed_streets = raw.streets.len() - pruned.streets.len();
    let (merged, expansions) = if opts.roundabouts_first {
        let (expanded, ex) = expand_roundabouts(&pruned, bands)?;
        (merge_degree_two(&expanded), ex)
    } else {
        let merged = merge_degree_two(&pruned);
        expand_roundabouts(&merged, bands)?
    };

    let mut id_map: BTreeMap<StreetId, Vec<StreetId>> = BTreeMap::new();
    let mut merged_chains = 0;
    for s in &merged.streets {
        if s.roundabout.is_none() && s.sources.len() > 1 {
            merged_chains += 1;
        }
        for src in &s.sources {
            id_map.entry(src.clone()).or_default().push(s.id.clone());
        }
    }
    let network = merged.into_network(bands.clone())?;
    Ok((
        network,
        PrepReport {
            removed_streets,
            merged_chains,
            roundabout_expansions: expansions,
            id_map,
        },
    ))
}

/// Picks the quantum whose discretized free-flow traversal of the probe
/// routes is closest to the continuous one. Ties go to the larger quantum.
pub fn choose_quantum(network: &Network, candidates: &[u32], probe_routes: &[Route]) -> u32 {
    assert!(!candidates.is_empty(), "no candidate quantum");
    let bands = network.bands();
    let error = |q: u32| -> f64 {
        probe_routes
            .iter()
            .map(|r| {
                let (mut cont, mut disc) = (0.0, 0.0);
                for id in &r.streets {
                    let s = network.by_id(id).expect("probe route street in network");
                    cont += bands.travel_seconds(s.length, Band::Low);
                    disc += (bands.travel_steps(s.length, Band::Low, q) * q) as f64;
                }
                (disc - cont).abs()
            })
            .sum()
    };
    let mut best = candidates[0];
    let mut best_err = error(best);
    for &q in &candidates[1..] {
        let e = error(q);
        if e < best_err - 1e-9 || ((e - best_err).abs() <= 1e-9 && q > best) {
            best = q;
            best_err = e;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    fn junctions(ids: &[&str]) -> Vec<JunctionId> {
        ids.iter().map(|&j| j.into()).collect()
    }

    fn chain() -> RawNetwork {
        RawNetwork::new(
            junctions(&["j0", "j1", "j2"]),
            vec![RawStreet::new("a", "j0", "j1", 50.0, 1), RawStreet::new("b", "j1", "j2", 30.0, 1)],
            None,
            vec![],
        )
        .unwrap()
    }

    #[test]
    fn merges_two_street_chain() {
        let m = merge_degree_two(&chain());
        assert_eq!(m.streets.len(), 1);
        let s = &m.streets[0];
        assert_eq!(s.length, 80.0);
        assert_eq!(s.sources, vec![StreetId::from("a"), StreetId::from("b")]);
        assert_eq!(s.from, JunctionId::from("j0"));
        assert_eq!(s.to, JunctionId::from("j2"));
    }

    #[test]
    fn merged_lanes_take_the_bottleneck() {
        let raw = RawNetwork::new(
            junctions(&["j0", "j1", "j2"]),
            vec![RawStreet::new("a", "j0", "j1", 50.0, 3), RawStreet::new("b", "j1", "j2", 30.0, 2)],
            None,
            vec![],
        )
        .unwrap();
        assert_eq!(merge_degree_two(&raw).streets[0].lanes, 2);
    }

    #[test]
    fn turn_restriction_blocks_merge() {
        let raw = RawNetwork::new(
            junctions(&["j0", "j1", "j2"]),
            vec![RawStreet::new("a", "j0", "j1", 50.0, 1), RawStreet::new("b", "j1", "j2", 30.0, 1)],
            Some(vec![]),
            vec![],
        )
        .unwrap();
        assert_eq!(merge_degree_two(&raw).streets.len(), 2);
    }

    #[test]
    fn prune_all_restricted_is_empty() {
        let raw = RawNetwork::new(
            junctions(&["j0", "j1"]),
            vec![RawStreet::new("a", "j0", "j1", 50.0, 1).with_usage(Usage::Restricted)],
            None,
            vec![],
        )
        .unwrap();
        assert_eq!(prune_non_drivable(&raw).unwrap_err(), PrepError::EmptyNetwork);
    }

    #[test]
    fn prune_without_restricted_is_identity() {
        let raw = chain();
        assert_eq!(prune_non_drivable(&raw).unwrap(), raw);
    }

    fn roundabout(arms: usize, seg_len: f64) -> RawNetwork {
        let mut j = Vec::new();
        let mut streets = Vec::new();
        let mut ring = Vec::new();
        let mut entries = Vec::new();
        let mut exits = Vec::new();
        for i in 0..arms {
            j.push(JunctionId::new(format!("r{i}")));
            j.push(JunctionId::new(format!("o{i}")));
            let id = format!("ring{i}");
            streets.push(RawStreet::new(id.as_str(), format!("r{i}"), format!("r{}", (i + 1) % arms), seg_len, 1));
            ring.push(StreetId::new(id));
            let e = format!("in{i}");
            let x = format!("out{i}");
            streets.push(RawStreet::new(e.as_str(), format!("o{i}"), format!("r{i}"), 100.0, 1));
            streets.push(RawStreet::new(x.as_str(), format!("r{i}"), format!("o{i}"), 100.0, 1));
            entries.push(StreetId::new(e));
            exits.push(StreetId::new(x));
        }
        RawNetwork::new(
            j,
            streets,
            None,
            vec![RawRoundabout {
                id: "ra".into(),
                ring,
                entries,
                exits,
            }],
        )
        .unwrap()
    }

    #[test]
    fn four_arm_roundabout_expands_to_twelve() {
        let bands = TrafficBands::default();
        let (net, ex) = expand_roundabouts(&roundabout(4, 10.0), &bands).unwrap();
        assert_eq!(ex[&RoundaboutId::from("ra")], 12);
        let mut lengths: Vec<f64> = net
            .streets
            .iter()
            .filter(|s| s.roundabout.is_some())
            .map(|s| s.length)
            .collect();
        lengths.sort_by(f64::total_cmp);
        let mut want = vec![10.0; 4];
        want.extend([20.0; 4]);
        want.extend([30.0; 4]);
        assert_eq!(lengths, want);
        assert!(net.streets.iter().all(|s| !s.id.as_str().starts_with("ring")));
        let s = net.street(&"ra_in0_out2".into()).unwrap();
        assert_eq!(s.length, 20.0);
    }

    #[test]
    fn roundabout_capacity_sums_ring_segments() {
        let bands = TrafficBands::default();
        let (net, _) = expand_roundabouts(&roundabout(4, 4.0), &bands).unwrap();
        assert_eq!(net.consolidated[0].capacity, 4);
    }

    #[test]
    fn single_entry_exit_roundabout() {
        let mut raw = roundabout(2, 10.0);
        raw.roundabouts[0].entries.truncate(1);
        raw.roundabouts[0].exits.remove(0);
        let (_, ex) = expand_roundabouts(&raw, &TrafficBands::default()).unwrap();
        assert_eq!(ex[&RoundaboutId::from("ra")], 1);
    }

    #[test]
    fn broken_ring_is_rejected() {
        let mut raw = roundabout(4, 10.0);
        raw.roundabouts[0].ring.pop();
        let err = expand_roundabouts(&raw, &TrafficBands::default()).unwrap_err();
        assert!(matches!(err, PrepError::MalformedRoundabout(..)));
    }

    #[test]
    fn quantum_choice() {
        let bands = TrafficBands::default();
        let streets = vec![Street::new("s1", "a", "b", 175.0, 1), Street::new("s2", "b", "c", 150.0, 1)];
        let net = Network::new(streets, &[("s1".into(), "s2".into())], vec![], bands).unwrap();
        let r = Route::new("r", vec!["s1".into(), "s2".into()], 325.0);
        assert_eq!(choose_quantum(&net, &[5, 10], std::slice::from_ref(&r)), 5);
        assert_eq!(choose_quantum(&net, &[10], &[r]), 10);
    }

    #[test]
    fn quantum_tie_prefers_larger() {
        let bands = TrafficBands::default();
        // 125 m and 250 m take 10 s and 20 s.
        let streets = vec![Street::new("s1", "a", "b", 125.0, 1), Street::new("s2", "b", "c", 250.0, 1)];
        let net = Network::new(streets, &[("s1".into(), "s2".into())], vec![], bands).unwrap();
        let r = Route::new("r", vec!["s1".into(), "s2".into()], 375.0);
        assert_eq!(choose_quantum(&net, &[5, 10], &[r]), 10);
    }
}
