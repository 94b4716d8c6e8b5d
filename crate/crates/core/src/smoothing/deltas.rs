use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::predicates::point_segment_distance;
use crate::geometry::{BBox, SimplicialComplex, TriangleGrid};
use crate::pl_approx::PLMap;

/// Smallest radius tried before giving up.
pub const DELTA_FLOOR: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Deltas {
    /// Vertex-ball radius.
    pub delta1: f64,
    /// Kernel radius.
    pub delta2: f64,
    /// Minimum distance from a vertex to an edge not incident to it.
    pub vertex_edge_distance: f64,
    /// Smallest triangle angle, in radians.
    pub min_angle: f64,
    /// Lipschitz constant of the PL map (max operator norm of its linear parts).
    pub lipschitz: f64,
    /// `eps / lipschitz`: `|h(x) - h(y)| < eps` whenever `|x - y|` is below it.
    pub modulus: f64,
    pub eps: f64,
}

/// Minimum over vertices `v` and edges `e` with `v` not in `e` of `d(v, e)`.
pub fn vertex_edge_distance(c: &SimplicialComplex) -> f64 {
    let grid = TriangleGrid::build(c);
    (0..c.num_vertices())
        .into_par_iter()
        .map(|v| {
            let p = c.vertex(v);
            let reach = c.neighbors(v).iter().map(|&w| p.dist(c.vertex(w))).fold(0.0, f64::max);
            if reach == 0.0 {
                return f64::INFINITY;
            }
            // the edges opposite v in its star lie within `reach`, so the
            // minimum is attained by a triangle meeting this box
            let mut cand = Vec::new();
            grid.query(&BBox::of([p]).inflate(reach), &mut cand);
            let mut best = f64::INFINITY;
            for t in cand {
                for (a, b) in c.triangles()[t].edges() {
                    if a == v || b == v {
                        continue;
                    }
                    best = best.min(point_segment_distance(p, c.vertex(a), c.vertex(b)));
                }
            }
            best
        })
        .reduce(|| f64::INFINITY, f64::min)
}

pub fn min_triangle_angle(c: &SimplicialComplex) -> f64 {
    (0..c.num_triangles())
        .map(|t| {
            let p = c.triangle_points(t);
            (0..3)
                .map(|i| {
                    let (u, v) = (p[(i + 1) % 3] - p[i], p[(i + 2) % 3] - p[i]);
                    u.cross(v).abs().atan2(u.dot(v))
                })
                .fold(f64::INFINITY, f64::min)
        })
        .fold(f64::INFINITY, f64::min)
}

/// Dyadic search for the vertex-ball radius `delta1` and the kernel radius
/// `delta2`, both starting from the vertex-edge distance `m`.
///
/// `delta1` is the first `m / 2^k` with `2 delta1 < m` (balls pairwise
/// disjoint and meeting the 1-skeleton only in incident edges) and
/// `2 delta1 L < eps` (image of a ball has diameter below `eps`).
///
/// `delta2` is the first `delta1 / 2^k` strictly below
/// `min(eps / L, (delta1/2) sin(alpha/2), m/2)`: a ball of that radius centred
/// outside the half-size vertex balls cannot reach two edges through a
/// common vertex (angle `alpha`) nor two disjoint edges, and so meets at most
/// two triangles.
pub fn choose_deltas(h: &PLMap, eps: f64) -> Result<Deltas> {
    if !(eps > 0.0) {
        return Err(Error::InvalidArgument("eps must be positive".into()));
    }
    let c = h.complex();
    let m = vertex_edge_distance(c);
    let lipschitz = h.max_linear_norm();
    let min_angle = min_triangle_angle(c);
    if !(m.is_finite() && m > 0.0) {
        return Err(Error::NoFeasibleDelta(format!("vertex-edge distance {m}")));
    }
    let modulus = if lipschitz > 0.0 { eps / lipschitz } else { f64::INFINITY };
    let mut d1 = m;
    while !(2.0 * d1 < m && 2.0 * d1 * lipschitz < eps) {
        d1 *= 0.5;
        if d1 < DELTA_FLOOR {
            return Err(Error::NoFeasibleDelta("vertex balls".into()));
        }
    }
    let bound = modulus.min(0.5 * d1 * (0.5 * min_angle).sin()).min(0.5 * m);
    let mut d2 = d1;
    while !(d2 < bound) {
        d2 *= 0.5;
        if d2 < DELTA_FLOOR {
            return Err(Error::NoFeasibleDelta("two-triangle kernel radius".into()));
        }
    }
    Ok(Deltas {
        delta1: d1,
        delta2: d2,
        vertex_edge_distance: m,
        min_angle,
        lipschitz,
        modulus,
        eps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::meshes::{annulus, unit_square};
    use crate::geometry::predicates::point_triangle_distance;
    use crate::geometry::{pt, Triangle};
    use crate::maps::{ComplexPoly, Identity};

    fn equilateral() -> SimplicialComplex {
        SimplicialComplex::new(
            vec![pt(0., 0.), pt(1., 0.), pt(0.5, 0.75f64.sqrt())],
            vec![Triangle([0, 1, 2])],
        )
        .unwrap()
    }

    /// Brute force over all vertex-edge pairs.
    fn brute_vertex_edge(c: &SimplicialComplex) -> f64 {
        let mut best = f64::INFINITY;
        for v in 0..c.num_vertices() {
            for e in c.edges() {
                if e.a != v && e.b != v {
                    best = best.min(point_segment_distance(c.vertex(v), c.vertex(e.a), c.vertex(e.b)));
                }
            }
        }
        best
    }

    #[test]
    fn equilateral_triangle_gets_quarter_height() {
        let h = PLMap::interpolate(&Identity, equilateral()).unwrap();
        let d = choose_deltas(&h, 100.0).unwrap();
        let height = 0.75f64.sqrt();
        assert!((d.vertex_edge_distance - height).abs() < 1e-15);
        assert_eq!(d.delta1, height / 4.0);
        assert!(d.delta2 > 0.0 && d.delta2 < d.delta1);
    }

    #[test]
    fn grid_distance_matches_brute_force() {
        let c = annulus(0.2, 1.0, 3, 10).unwrap();
        assert_eq!(vertex_edge_distance(&c), brute_vertex_edge(&c));
    }

    #[test]
    fn square_balls_meet_at_most_two_triangles() {
        let c = unit_square();
        let h = PLMap::interpolate(&Identity, c.clone()).unwrap();
        let d = choose_deltas(&h, 100.0).unwrap();
        let n = 400;
        for i in 0..=n {
            for j in 0..=n {
                let x = pt(i as f64 / n as f64, j as f64 / n as f64);
                if c.vertices().iter().any(|v| v.dist(x) < d.delta1 / 2.0) {
                    continue;
                }
                let hits = (0..c.num_triangles())
                    .filter(|&t| {
                        let [a, b, cc] = c.triangle_points(t);
                        point_triangle_distance(x, a, b, cc) < d.delta2
                    })
                    .count();
                assert!(hits <= 2, "{x}");
            }
        }
        // nearest vertex region bound
        assert!(d.delta2 <= d.delta1 / 2.0);
    }

    #[test]
    fn deltas_scale_with_the_complex() {
        let c = annulus(0.2, 1.0, 2, 12).unwrap();
        let f = ComplexPoly::square();
        let h = PLMap::interpolate(&f, c.clone()).unwrap();
        let scaled_c = SimplicialComplex::new(c.vertices().iter().map(|&v| v * 2.0).collect(), c.triangles().to_vec()).unwrap();
        let scaled = PLMap::new(scaled_c, h.vertex_images().iter().map(|&w| w * 2.0).collect()).unwrap();
        let a = choose_deltas(&h, 0.05).unwrap();
        let b = choose_deltas(&scaled, 0.1).unwrap();
        assert_eq!(b.delta1, 2.0 * a.delta1);
        assert_eq!(b.delta2, 2.0 * a.delta2);
    }

    #[test]
    fn small_eps_limits_delta1() {
        let h = PLMap::interpolate(&ComplexPoly::square(), unit_square()).unwrap();
        let d = choose_deltas(&h, 1e-3).unwrap();
        assert!(2.0 * d.delta1 * d.lipschitz < 1e-3);
        assert!(d.delta2 < d.modulus);
        assert!(choose_deltas(&h, 0.0).is_err());
    }
}
