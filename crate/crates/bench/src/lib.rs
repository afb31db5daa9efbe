//! Criterion benchmarks for the simulator kernels; see `benches/`.

use aoitail_core::mobility::Point;

/// Deterministic pair midpoints scattered over a 250 m square.
pub fn scattered_midpoints(k: usize) -> Vec<Point> {
    (0..k)
        .map(|i| {
            let t = i as f64;
            [(t * 37.1).rem_euclid(250.0), (t * 91.7 + 13.0).rem_euclid(250.0)]
        })
        .collect()
}
