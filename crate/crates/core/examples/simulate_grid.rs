//! Rush hour on an 8x8 grid: both routing policies side by side.
//!
//! Usage: `simulate_grid [vehicles] [per_second] [street_length]`.

use std::time::Duration;

use urbanflow::net::TrafficBands;
use urbanflow::prep::{simplify, PrepOptions};
use urbanflow::sim::{render_kpi_table, run_scenario, Demand, Policy, SimConfig};
use urbanflow::solver::SolveStatus;
use urbanflow::synth::{grid, grid_edges};

fn arg<T: std::str::FromStr>(i: usize, default: T) -> T {
    std::env::args().nth(i).and_then(|a| a.parse().ok()).unwrap_or(default)
}

fn main() {
    let n: usize = arg(1, 150);
    let per_second: u64 = arg(2, 10);
    let length: f64 = arg(3, 30.0);

    let raw = grid(8, 8, length, 1);
    let (network, _) = simplify(&raw, &TrafficBands::default(), &PrepOptions::default()).unwrap();
    let (west, east) = grid_edges(8, 8);
    let demand: Vec<Demand> = (0..n)
        .map(|i| Demand::controlled(format!("v{i}"), west[(i * 3) % 8].clone(), east[(i * 5 + 2) % 8].clone(), i as u64 / per_second))
        .collect();

    let mut optimized = Policy::optimized();
    optimized.solver.time_limit = Duration::from_secs(10);
    let config = SimConfig::default();
    let a = run_scenario(&network, &demand, &optimized, &config).unwrap();
    let b = run_scenario(&network, &demand, &Policy::shortest(), &config).unwrap();
    println!("{}", render_kpi_table(&[("optimized", &a.kpis), ("shortest", &b.kpis)]));

    let optimal = a.solves.iter().filter(|s| s.status == Some(SolveStatus::Optimal)).count();
    let fallback = a.solves.iter().filter(|s| s.error.is_some()).count();
    let slowest = a.solves.iter().map(|s| s.elapsed).max().unwrap_or_default();
    let busiest = a.solves.iter().map(|s| s.active).max().unwrap_or(0);
    println!(
        "{} solver calls: {optimal} optimal, {fallback} fell back to the shortest route, slowest {slowest:?}, up to {busiest} vehicles in the network",
        a.solves.len()
    );
}
