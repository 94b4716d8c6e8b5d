#![allow(dead_code)]

use degree_forge::geometry::meshes::square_grid;
use degree_forge::geometry::{pt, Point2, SimplicialComplex};
use proptest::prelude::*;

/// An `n x n` grid of the unit square whose interior vertices are moved by
/// up to `0.15 / n` in each coordinate, per the offsets in `jitter`.
pub fn jittered_grid(n: usize, jitter: &[(f64, f64)]) -> SimplicialComplex {
    let c = square_grid(pt(0.0, 0.0), pt(1.0, 1.0), n).unwrap();
    let h = 1.0 / n as f64;
    let mut v = c.vertices().to_vec();
    for (i, p) in v.iter_mut().enumerate() {
        let interior = p.x > 0.0 && p.x < 1.0 && p.y > 0.0 && p.y < 1.0;
        if interior {
            let (dx, dy) = jitter[i % jitter.len()];
            *p = pt(p.x + 0.15 * h * dx, p.y + 0.15 * h * dy);
        }
    }
    SimplicialComplex::new(v, c.triangles().to_vec()).unwrap()
}

pub fn jitter() -> impl Strategy<Value = Vec<(f64, f64)>> {
    prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64), 1..40)
}

pub fn point_in(lo: f64, hi: f64) -> impl Strategy<Value = Point2> {
    (lo..hi, lo..hi).prop_map(|(x, y)| pt(x, y))
}
