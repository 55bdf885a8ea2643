//! Simplifying a small town: a footpath, a chain of short segments and a
//! roundabout.

use urbanflow::ids::{JunctionId, StreetId};
use urbanflow::net::TrafficBands;
use urbanflow::prep::{simplify, PrepOptions, RawNetwork, RawRoundabout, RawStreet, Usage};

fn main() {
    let s = |id: &str, from: &str, to: &str, len: f64| RawStreet::new(id, from, to, len, 1);
    let mut streets = vec![
        // a -> b -> c is one road drawn as two segments
        s("main1", "a", "b", 80.0),
        s("main2", "b", "c", 70.0),
        s("path", "a", "c", 60.0).with_usage(Usage::NoTraffic),
        s("north", "c", "r0", 100.0),
        s("north_back", "r0", "c", 100.0),
        s("east", "r1", "e", 120.0),
        s("south", "f", "r2", 90.0),
    ];
    let ring: Vec<StreetId> = (0..3).map(|i| StreetId::new(format!("ring{i}"))).collect();
    for i in 0..3 {
        streets.push(s(&format!("ring{i}"), &format!("r{i}"), &format!("r{}", (i + 1) % 3), 25.0));
    }
    let junctions = ["a", "b", "c", "e", "f", "r0", "r1", "r2"].map(JunctionId::new);
    let roundabout = RawRoundabout {
        id: "plaza".into(),
        ring,
        entries: vec!["north".into(), "south".into()],
        exits: vec!["north_back".into(), "east".into()],
    };
    let raw = RawNetwork::new(junctions, streets, None, vec![roundabout]).expect("valid network");

    let (network, report) = simplify(&raw, &TrafficBands::default(), &PrepOptions::default()).expect("simplifies");
    println!("{} raw streets, {} after simplification", raw.streets.len(), network.streets().len());
    for (i, st) in network.streets().iter().enumerate() {
        println!("  {:<20} {:>6.1} m  capacity {}", st.id.as_str(), st.length, network.capacity(i));
    }
    for r in network.roundabouts() {
        println!("roundabout {} shares capacity {} over {} streets", r.id, r.capacity, r.members.len());
    }
    print!("{report}");
}
