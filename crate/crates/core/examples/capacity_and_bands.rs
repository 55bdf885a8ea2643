//! Street capacity, traffic bands and the resulting travel times.

use urbanflow::net::{Band, TrafficBands};

fn main() {
    let bands = TrafficBands::default();
    let (length, lanes) = (150.0, 2);
    let cap = bands.capacity(length, lanes);
    println!("{length} m, {lanes} lanes: capacity {cap}");

    for band in Band::ALL {
        let (lo, hi) = bands.threshold(cap, band);
        let hi = hi.map_or("inf".to_string(), |h| h.to_string());
        println!(
            "{:<6} occupancy [{lo}, {hi})  {:>5.1} s  {} steps of 5 s",
            band.name(),
            bands.travel_seconds(length, band),
            bands.travel_steps(length, band, 5)
        );
    }

    print!("band by occupancy:");
    for n in 0..=cap {
        print!(" {}", &bands.band_for(cap, n).name()[..1]);
    }
    println!();
}
