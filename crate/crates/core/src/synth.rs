//! Synthetic networks for experiments.

use crate::ids::{JunctionId, StreetId};
use crate::prep::{RawNetwork, RawStreet};

/// Junction id at grid row `r`, column `c`.
pub fn junction(r: usize, c: usize) -> JunctionId {
    JunctionId::new(format!("j{r}_{c}"))
}

/// Id of the street from junction `(r1, c1)` to the neighbouring `(r2, c2)`.
pub fn grid_street(r1: usize, c1: usize, r2: usize, c2: usize) -> StreetId {
    StreetId::new(format!("s{r1}_{c1}_{r2}_{c2}"))
}

/// A `rows` x `cols` grid of junctions with a two-way street of `length`
/// meters between horizontal and vertical neighbours. Every street entering
/// a junction links to every street leaving it.
pub fn grid(rows: usize, cols: usize, length: f64, lanes: u32) -> RawNetwork {
    let mut junctions = Vec::new();
    let mut streets = Vec::new();
    for r in 0..rows {
        for c in 0..cols {
            junctions.push(junction(r, c));
            let mut add = |r2: usize, c2: usize| {
                streets.push(RawStreet::new(grid_street(r, c, r2, c2), junction(r, c), junction(r2, c2), length, lanes));
                streets.push(RawStreet::new(grid_street(r2, c2, r, c), junction(r2, c2), junction(r, c), length, lanes));
            };
            if c + 1 < cols {
                add(r, c + 1);
            }
            if r + 1 < rows {
                add(r + 1, c);
            }
        }
    }
    RawNetwork::new(junctions, streets, None, Vec::new()).expect("grid is well formed")
}

/// Streets leaving the grid's west edge eastwards, one per row, and streets
/// arriving at the east edge, for building cross-town demand.
pub fn grid_edges(rows: usize, cols: usize) -> (Vec<StreetId>, Vec<StreetId>) {
    let west = (0..rows).map(|r| grid_street(r, 0, r, 1)).collect();
    let east = (0..rows).map(|r| grid_street(r, cols - 2, r, cols - 1)).collect();
    (west, east)
}
