//! Ready-made complexes used by the examples, the CLI and the tests.

use std::f64::consts::TAU;

use super::{orient2d, pt, Point2, SimplicialComplex, Triangle};
use crate::error::Result;

/// Reorders each triangle counterclockwise.
fn make_ccw(v: &[Point2], t: &mut [Triangle]) {
    for tri in t.iter_mut() {
        let [a, b, c] = tri.0;
        if orient2d(v[a], v[b], v[c]) < 0.0 {
            *tri = tri.reversed();
        }
    }
}

/// Unit square `[0,1]^2` split along its diagonal.
pub fn unit_square() -> SimplicialComplex {
    SimplicialComplex::new(
        vec![pt(0., 0.), pt(1., 0.), pt(1., 1.), pt(0., 1.)],
        vec![Triangle([0, 1, 2]), Triangle([0, 2, 3])],
    )
    .expect("unit square is a valid complex")
}

/// The rectangle `[lo, hi]` cut into `n x n` cells, each split into two triangles.
pub fn square_grid(lo: Point2, hi: Point2, n: usize) -> Result<SimplicialComplex> {
    let mut v = Vec::with_capacity((n + 1) * (n + 1));
    for j in 0..=n {
        for i in 0..=n {
            v.push(pt(
                lo.x + (hi.x - lo.x) * i as f64 / n as f64,
                lo.y + (hi.y - lo.y) * j as f64 / n as f64,
            ));
        }
    }
    let id = |i: usize, j: usize| j * (n + 1) + i;
    let mut t = Vec::with_capacity(2 * n * n);
    for j in 0..n {
        for i in 0..n {
            t.push(Triangle([id(i, j), id(i + 1, j), id(i + 1, j + 1)]));
            t.push(Triangle([id(i, j), id(i + 1, j + 1), id(i, j + 1)]));
        }
    }
    SimplicialComplex::new(v, t)
}

/// Polar annulus mesh: `rings` radial layers between `r_in` and `r_out`,
/// `sectors` angular cells, each cell split into two counterclockwise triangles.
pub fn annulus(r_in: f64, r_out: f64, rings: usize, sectors: usize) -> Result<SimplicialComplex> {
    let mut v = Vec::with_capacity((rings + 1) * sectors);
    for i in 0..=rings {
        let r = r_in + (r_out - r_in) * i as f64 / rings as f64;
        for j in 0..sectors {
            // stagger alternate rings to avoid long thin cells
            let a = TAU * (j as f64 + 0.5 * (i % 2) as f64) / sectors as f64;
            v.push(pt(r * a.cos(), r * a.sin()));
        }
    }
    let id = |i: usize, j: usize| i * sectors + (j % sectors);
    let mut t = Vec::with_capacity(2 * rings * sectors);
    for i in 0..rings {
        for j in 0..sectors {
            if i % 2 == 0 {
                // inner ring unshifted, outer ring shifted by half a cell
                t.push(Triangle([id(i, j), id(i, j + 1), id(i + 1, j)]));
                t.push(Triangle([id(i, j + 1), id(i + 1, j + 1), id(i + 1, j)]));
            } else {
                t.push(Triangle([id(i, j), id(i + 1, j + 1), id(i + 1, j)]));
                t.push(Triangle([id(i, j), id(i, j + 1), id(i + 1, j + 1)]));
            }
        }
    }
    make_ccw(&v, &mut t);
    SimplicialComplex::new(v, t)
}

/// Annulus mesh whose rings carry a number of vertices proportional to their
/// radius, so that all triangles are close to equilateral with side about
/// `(r_out - r_in) / rings`. Alternate rings are rotated by half a step.
pub fn annulus_graded(r_in: f64, r_out: f64, rings: usize) -> Result<SimplicialComplex> {
    if !(r_in > 0.0 && r_out > r_in && rings >= 1) {
        return Err(crate::error::Error::InvalidArgument("annulus needs 0 < r_in < r_out and rings >= 1".into()));
    }
    let dr = (r_out - r_in) / rings as f64;
    let mut v = Vec::new();
    let mut rings_at = Vec::with_capacity(rings + 1);
    for i in 0..=rings {
        let r = r_in + dr * i as f64;
        let n = ((TAU * r / dr).round() as usize).max(6);
        let off = 0.5 * (i % 2) as f64;
        rings_at.push((v.len(), n, off));
        for j in 0..n {
            let a = TAU * (j as f64 + off) / n as f64;
            v.push(pt(r * a.cos(), r * a.sin()));
        }
    }
    let mut t = Vec::new();
    for w in rings_at.windows(2) {
        stitch(&mut t, w[0], w[1]);
    }
    make_ccw(&v, &mut t);
    SimplicialComplex::new(v, t)
}

/// Triangulates the band between two closed rings `(start, count, offset)`
/// by merging their vertices in angular order.
fn stitch(t: &mut Vec<Triangle>, inner: (usize, usize, f64), outer: (usize, usize, f64)) {
    let (s0, n0, o0) = inner;
    let (s1, n1, o1) = outer;
    let (mut a, mut b) = (0usize, 0usize);
    while a < n0 || b < n1 {
        let ang0 = (a as f64 + 1.0 + o0) / n0 as f64;
        let ang1 = (b as f64 + 1.0 + o1) / n1 as f64;
        if b < n1 && (a >= n0 || ang1 <= ang0) {
            t.push(Triangle([s0 + a % n0, s1 + b, s1 + (b + 1) % n1]));
            b += 1;
        } else {
            t.push(Triangle([s0 + a, s1 + b % n1, s0 + (a + 1) % n0]));
            a += 1;
        }
    }
}

/// Disk mesh: a central fan plus polar rings (`rings >= 1`), all
/// counterclockwise. The centre is vertex 0.
pub fn disk(center: Point2, radius: f64, rings: usize, sectors: usize) -> Result<SimplicialComplex> {
    let mut v = vec![center];
    let mut t = Vec::new();
    let mut ring_start = Vec::with_capacity(rings);
    let mut ring_count = Vec::with_capacity(rings);
    for i in 1..=rings {
        let n = sectors * i;
        let r = radius * i as f64 / rings as f64;
        ring_start.push(v.len());
        ring_count.push(n);
        for j in 0..n {
            let a = TAU * j as f64 / n as f64;
            v.push(center + pt(a.cos(), a.sin()) * r);
        }
    }
    for j in 0..sectors {
        t.push(Triangle([0, 1 + j, 1 + (j + 1) % sectors]));
    }
    // stitch ring i (n_i points) to ring i+1 (n_i + sectors points) by merging angles
    for i in 0..rings.saturating_sub(1) {
        let (s0, n0) = (ring_start[i], ring_count[i]);
        let (s1, n1) = (ring_start[i + 1], ring_count[i + 1]);
        let (mut a, mut b) = (0usize, 0usize);
        while a < n0 || b < n1 {
            let ang0 = (a as f64 + 1.0) / n0 as f64;
            let ang1 = (b as f64 + 1.0) / n1 as f64;
            if b < n1 && (a >= n0 || ang1 <= ang0) {
                t.push(Triangle([s0 + a % n0, s1 + b, s1 + (b + 1) % n1]));
                b += 1;
            } else {
                t.push(Triangle([s0 + a, s1 + b % n1, s0 + (a + 1) % n0]));
                a += 1;
            }
        }
    }
    make_ccw(&v, &mut t);
    SimplicialComplex::new(v, t)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn annulus_is_valid_and_ccw() {
        let c = annulus(0.2, 1.0, 4, 24).unwrap();
        assert!(c.validate().is_valid());
        assert!((0..c.num_triangles()).all(|t| c.signed_area(t) > 0.0));
        let area: f64 = (0..c.num_triangles()).map(|t| c.signed_area(t)).sum();
        let exact = std::f64::consts::PI * (1.0 - 0.04);
        assert!((area - exact).abs() < 0.05 * exact);
    }

    #[test]
    fn graded_annulus_is_valid_and_well_shaped() {
        let c = annulus_graded(0.2, 1.0, 8).unwrap();
        assert!(c.validate().is_valid());
        assert!((0..c.num_triangles()).all(|t| c.signed_area(t) > 0.0));
        assert_eq!(c.boundary_edges().count(), 13 + 63);
        let min_angle = (0..c.num_triangles())
            .flat_map(|t| {
                let p = c.triangle_points(t);
                (0..3).map(move |i| {
                    let (u, w) = (p[(i + 1) % 3] - p[i], p[(i + 2) % 3] - p[i]);
                    u.cross(w).abs().atan2(u.dot(w))
                })
            })
            .fold(f64::INFINITY, f64::min);
        assert!(min_angle > 0.6, "{min_angle}");
    }

    #[test]
    fn disk_is_valid_and_ccw() {
        let c = disk(Point2::ORIGIN, 1.0, 5, 6).unwrap();
        assert!(c.validate().is_valid(), "{:?}", c.validate());
        assert!((0..c.num_triangles()).all(|t| c.signed_area(t) > 0.0));
        let area: f64 = (0..c.num_triangles()).map(|t| c.signed_area(t)).sum();
        assert!((area - std::f64::consts::PI).abs() < 0.1);
    }

    #[test]
    fn square_grid_is_valid() {
        let c = square_grid(pt(-1., -1.), pt(1., 1.), 4).unwrap();
        assert_eq!(c.num_triangles(), 32);
        assert!(c.validate().is_valid());
    }
}
