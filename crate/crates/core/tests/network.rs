use std::collections::{BTreeMap, BTreeSet, VecDeque};

use proptest::prelude::*;

use urbanflow::ids::{JunctionId, StreetId};
use urbanflow::net::{Band, Network, TrafficBands};
use urbanflow::prep::{
    consolidate_roundabouts, merge_degree_two, prune_non_drivable, simplify, PrepOptions, RawNetwork, RawRoundabout,
    RawStreet, Usage,
};

proptest! {
    #[test]
    fn capacity_is_monotone_and_positive(len in 0.1f64..2000.0, extra in 0.0f64..500.0, lanes in 1u32..6) {
        let b = TrafficBands::default();
        let c = b.capacity(len, lanes);
        prop_assert!(c >= 1);
        prop_assert!(b.capacity(len + extra, lanes) >= c);
        prop_assert!(b.capacity(len, lanes + 1) >= c);
    }

    #[test]
    fn bands_never_ease_as_load_grows(cap in 1u32..300) {
        let b = TrafficBands::default();
        let mut last = Band::Low;
        for n in 0..=2 * cap {
            let band = b.band_for(cap, n);
            prop_assert!(band as usize >= last as usize);
            last = band;
        }
        prop_assert_eq!(b.band_for(cap, 0), Band::Low);
        prop_assert_eq!(b.band_for(cap, cap), Band::Heavy);
    }

    #[test]
    fn heavier_traffic_is_never_faster(len in 0.5f64..3000.0, q in 1u32..30) {
        let b = TrafficBands::default();
        let [l, m, h] = Band::ALL.map(|band| b.travel_steps(len, band, q));
        prop_assert!(l <= m && m <= h);
    }

    #[test]
    fn discretization_overshoots_by_less_than_one_step(len in 0.5f64..3000.0, q in 1u32..30) {
        let b = TrafficBands::default();
        for band in Band::ALL {
            let secs = b.travel_seconds(len, band);
            let disc = (b.travel_steps(len, band, q) * q) as f64;
            prop_assert!(disc + 1e-9 >= secs);
            prop_assert!(disc < secs + q as f64 + 1e-9);
        }
    }
}

#[test]
fn documented_capacities() {
    let b = TrafficBands::default();
    assert_eq!(b.capacity(150.0, 1), 19);
    assert_eq!(b.capacity(8.0, 1), 1);
    assert_eq!(b.capacity(1.0, 1), 1);
    assert_eq!(b.capacity(16.000000001, 1), 2);
    assert_eq!(b.capacity(100.0, 2), 25);
}

#[test]
fn band_ties_go_congested() {
    let b = TrafficBands::default();
    // 0.4 * 10 = 4 and 0.7 * 10 = 7 exactly
    assert_eq!(b.band_for(10, 3), Band::Low);
    assert_eq!(b.band_for(10, 4), Band::Medium);
    assert_eq!(b.band_for(10, 6), Band::Medium);
    assert_eq!(b.band_for(10, 7), Band::Heavy);
}

fn raw_strategy() -> impl Strategy<Value = RawNetwork> {
    (3usize..8).prop_flat_map(|n| {
        let street = (0..n, 0..n, 5u32..200, 0u8..10).prop_filter("no loops", |(a, b, _, _)| a != b);
        prop::collection::vec(street, 2..14).prop_map(move |list| {
            let junctions = (0..n).map(|j| JunctionId::new(format!("j{j}")));
            let streets = list
                .into_iter()
                .enumerate()
                .map(|(i, (a, b, len, u))| {
                    let usage = match u {
                        0 => Usage::NoTraffic,
                        1 => Usage::Restricted,
                        _ => Usage::General,
                    };
                    RawStreet::new(format!("s{i}"), format!("j{a}"), format!("j{b}"), len as f64, 1).with_usage(usage)
                })
                .collect();
            RawNetwork::new(junctions, streets, None, Vec::new()).unwrap()
        })
    })
}

fn reachable_raw(raw: &RawNetwork, from: &StreetId) -> BTreeSet<StreetId> {
    let mut seen = BTreeSet::from([from.clone()]);
    let mut queue = VecDeque::from([from.clone()]);
    while let Some(s) = queue.pop_front() {
        for (a, b) in &raw.links {
            if a == &s && seen.insert(b.clone()) {
                queue.push_back(b.clone());
            }
        }
    }
    seen
}

fn reachable_net(net: &Network, from: &StreetId) -> BTreeSet<StreetId> {
    let start = net.index_of(from).unwrap();
    let mut seen = BTreeSet::from([start]);
    let mut queue = VecDeque::from([start]);
    while let Some(s) = queue.pop_front() {
        for &n in net.successors(s) {
            if seen.insert(n) {
                queue.push_back(n);
            }
        }
    }
    seen.into_iter().map(|i| net.street(i).id.clone()).collect()
}

proptest! {
    #[test]
    fn simplification_keeps_reachability(raw in raw_strategy()) {
        let Ok(pruned) = prune_non_drivable(&raw) else { return Ok(()) };
        let Ok((net, report)) = simplify(&raw, &TrafficBands::default(), &PrepOptions::default()) else { return Ok(()) };
        for o in &pruned.streets {
            let so = report.resolve(&o.id).expect("every kept street maps to one street").clone();
            let from_so = reachable_net(&net, &so);
            for d in reachable_raw(&pruned, &o.id) {
                let sd = report.resolve(&d).unwrap();
                prop_assert!(sd == &so || from_so.contains(sd), "{} reaches {} only in the raw network", o.id, d);
            }
        }
    }

    #[test]
    fn merging_keeps_total_length(raw in raw_strategy()) {
        let Ok(pruned) = prune_non_drivable(&raw) else { return Ok(()) };
        let merged = merge_degree_two(&pruned);
        prop_assert!((merged.total_length() - pruned.total_length()).abs() < 1e-6);
    }

    #[test]
    fn sources_are_disjoint(raw in raw_strategy()) {
        let Ok((net, report)) = simplify(&raw, &TrafficBands::default(), &PrepOptions::default()) else { return Ok(()) };
        let mut owner: BTreeMap<&StreetId, &StreetId> = BTreeMap::new();
        for s in net.streets() {
            for src in &s.sources {
                prop_assert!(owner.insert(src, &s.id).is_none(), "{} built into two streets", src);
            }
        }
        // the report covers exactly the kept streets
        let kept: BTreeSet<&StreetId> = report.id_map.keys().collect();
        prop_assert_eq!(kept, owner.keys().copied().collect::<BTreeSet<_>>());
    }
}

fn roundabout(arms: usize) -> RawNetwork {
    let mut j = Vec::new();
    let mut streets = Vec::new();
    for i in 0..arms {
        j.push(JunctionId::new(format!("r{i}")));
        j.push(JunctionId::new(format!("o{i}")));
        streets.push(RawStreet::new(format!("ring{i}"), format!("r{i}"), format!("r{}", (i + 1) % arms), 15.0, 1));
        streets.push(RawStreet::new(format!("in{i}"), format!("o{i}"), format!("r{i}"), 100.0, 1));
        streets.push(RawStreet::new(format!("out{i}"), format!("r{i}"), format!("o{i}"), 100.0, 1));
    }
    let ring = RawRoundabout {
        id: "ra".into(),
        ring: (0..arms).map(|i| StreetId::new(format!("ring{i}"))).collect(),
        entries: (0..arms).map(|i| StreetId::new(format!("in{i}"))).collect(),
        exits: (0..arms).map(|i| StreetId::new(format!("out{i}"))).collect(),
    };
    RawNetwork::new(j, streets, None, vec![ring]).unwrap()
}

#[test]
fn consolidated_roundabout_drops_the_ring() {
    for arms in 2..=6 {
        let raw = roundabout(arms);
        let net = consolidate_roundabouts(&raw, &TrafficBands::default()).unwrap();
        assert!(net.streets().iter().all(|s| !s.id.as_str().starts_with("ring")));
        let r = &net.roundabouts()[0];
        // every entry reaches every exit except the one at its own junction
        assert_eq!(r.members.len(), arms * (arms - 1));
        // 15 m segments hold 2 cars each
        assert_eq!(r.capacity, 2 * arms as u32);
    }
}

#[test]
fn dangling_link_is_rejected_by_name() {
    let streets = vec![RawStreet::new("a", "x", "y", 10.0, 1)];
    let links = vec![(StreetId::new("a"), StreetId::new("ghost"))];
    let err = RawNetwork::new([JunctionId::new("x"), JunctionId::new("y")], streets, Some(links), Vec::new()).unwrap_err();
    assert!(err.to_string().contains("ghost"), "{err}");
}
