//! Diverse candidate routes across a 4x4 grid.

use urbanflow::net::TrafficBands;
use urbanflow::prep::{simplify, PrepOptions};
use urbanflow::routes::{cluster_routes, enumerate_routes, select_candidates, similarity, SearchConfig};
use urbanflow::synth::{grid, grid_street};

fn main() {
    let raw = grid(4, 4, 100.0, 1);
    let (network, _) = simplify(&raw, &TrafficBands::default(), &PrepOptions::default()).unwrap();
    let (origin, dest) = (grid_street(0, 0, 0, 1), grid_street(3, 2, 3, 3));
    let cfg = SearchConfig::default();

    let all = enumerate_routes(&network, &origin, &dest, cfg.route_limit).unwrap();
    let clusters = cluster_routes(&all, cfg.similarity_threshold);
    let picked = select_candidates(&clusters, cfg.top_k);
    println!(
        "{} routes from {origin} to {dest}, lengths {}..{} m, {} clusters",
        all.len(),
        all[0].length,
        all[all.len() - 1].length,
        clusters.len()
    );
    for r in &picked {
        let names: Vec<&str> = r.streets.iter().map(|s| s.as_str()).collect();
        println!("{:>5} m  {}", r.length, names.join(" "));
    }
    println!("pairwise similarity of the candidates:");
    for a in &picked {
        let row: Vec<String> = picked.iter().map(|b| format!("{:.2}", similarity(a, b))).collect();
        println!("  {}", row.join(" "));
    }
}
