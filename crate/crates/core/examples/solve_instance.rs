//! Vehicles share a short street next to a longer bypass; the solver decides
//! who takes which and when. Small enough to confirm by exhaustive search.

use urbanflow::ids::StreetId;
use urbanflow::net::{Network, Street, TrafficBands};
use urbanflow::routes::{enumerate_routes, RouteBounds};
use urbanflow::schedule::{build_instance, check_schedule, Candidate, Vehicle};
use urbanflow::solver::{brute_force_space, solve_brute_force, solve_exact, SolverConfig, BRUTE_FORCE_LIMIT};

fn main() {
    let n: usize = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(3);
    let streets = vec![
        Street::new("in", "x", "y", 40.0, 1),
        Street::new("short", "y", "z", 24.0, 1),
        Street::new("bypass", "y", "z", 90.0, 1),
        Street::new("out", "z", "w", 40.0, 1),
    ];
    let id = StreetId::new;
    let links = [
        (id("in"), id("short")),
        (id("in"), id("bypass")),
        (id("short"), id("out")),
        (id("bypass"), id("out")),
    ];
    let network = Network::new(streets, &links, Vec::new(), TrafficBands::default()).unwrap();

    let routes = enumerate_routes(&network, &id("in"), &id("out"), 5).unwrap();
    // everyone else is assumed to take the short street
    let others = vec![&routes[0]; n - 1];
    let vehicles = (0..n)
        .map(|v| {
            let cands = routes
                .iter()
                .enumerate()
                .map(|(k, r)| Candidate {
                    bounds: RouteBounds::compute(&network, r, &others, 5),
                    route: r.clone().with_id(format!("v{v}_r{k}")),
                })
                .collect();
            Vehicle::controlled(format!("v{v}"), cands)
        })
        .collect();
    let instance = build_instance(&network, vehicles, 5).unwrap();

    let exact = match solve_exact(&instance, &SolverConfig::default()) {
        Ok(r) => r,
        Err(e) => {
            // with four or more, the time windows leave no room to stagger
            println!("{n} vehicles: {e}");
            return;
        }
    };
    println!("{:?} {} after {} nodes", exact.status, exact.objective, exact.nodes_explored);
    let trail: Vec<String> = exact.incumbents.iter().map(|o| o.to_string()).collect();
    println!("incumbents: {}", trail.join(" -> "));
    for v in &exact.schedule.vehicles {
        let legs: Vec<String> = v.times.iter().map(|t| format!("{}[{},{})", t.street, t.enter, t.exit)).collect();
        println!("  {} {}", v.vehicle, legs.join(" "));
    }
    assert!(check_schedule(&instance, &exact.schedule).is_empty());

    let space = brute_force_space(&instance);
    if space <= BRUTE_FORCE_LIMIT {
        let brute = solve_brute_force(&instance).unwrap();
        println!("exhaustive search over {space} schedules: {}", brute.objective);
        assert_eq!(brute.objective, exact.objective);
    }
}
