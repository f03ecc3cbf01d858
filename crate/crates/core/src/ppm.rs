//! Binary PPM (P6, maxval 255) output for classification grids.

use crate::dynamics::{label_color, GridClassification};
use std::io::Write;

pub fn encode_ppm(grid: &GridClassification) -> Vec<u8> {
    let mut out = Vec::with_capacity(32 + 3 * grid.labels.len());
    write!(out, "P6\n{} {}\n255\n", grid.width, grid.height).expect("in-memory write");
    for label in &grid.labels {
        out.extend_from_slice(&label_color(*label));
    }
    out
}

pub fn write_ppm(path: &std::path::Path, grid: &GridClassification) -> std::io::Result<()> {
    std::fs::write(path, encode_ppm(grid))
}
