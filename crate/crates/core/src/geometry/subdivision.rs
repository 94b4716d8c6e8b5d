use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::complex::{edge_key, SimplicialComplex, Triangle};
use super::point::Point2;
use super::predicates::orient2d;
use crate::error::{Error, Result};
use crate::maps::SampledMap;

/// Default barycentric lattice resolution used to estimate `diam(f(sigma))`.
pub const IMAGE_LATTICE: usize = 10;

/// A refinement of `parent` together with the child-to-parent triangle map.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Subdivision {
    pub parent: SimplicialComplex,
    pub child: SimplicialComplex,
    /// `parent_of[t]` is the parent triangle containing child triangle `t`.
    pub parent_of: Vec<usize>,
    /// Number of parts each parent edge was cut into.
    pub level: usize,
}

impl Subdivision {
    /// Checks that every child vertex lies in its assigned parent triangle.
    ///
    /// Vertices interior to a parent edge come out of a rounded interpolation,
    /// so a sign failure is tolerated only when the excursion is at rounding
    /// scale; the largest such excursion is returned.
    pub fn check_containment(&self) -> std::result::Result<f64, usize> {
        let mut worst = 0.0f64;
        for (t, &pt_) in self.parent_of.iter().enumerate() {
            let [a, b, c] = self.parent.triangle_points(pt_);
            let scale = a.dist(b).max(b.dist(c)).max(c.dist(a));
            let orient = orient2d(a, b, c).signum();
            for v in self.child.triangle_points(t) {
                for (p, q) in [(a, b), (b, c), (c, a)] {
                    let s = orient2d(p, q, v) * orient;
                    if s < 0.0 {
                        let excursion = -s / scale;
                        if excursion > 16.0 * f64::EPSILON * scale {
                            return Err(t);
                        }
                        worst = worst.max(excursion);
                    }
                }
            }
        }
        Ok(worst)
    }

    /// Total area of parent and child (the union test for `|K| = |L|`).
    pub fn areas(&self) -> (f64, f64) {
        let area = |c: &SimplicialComplex| {
            (0..c.num_triangles())
                .map(|t| c.signed_area(t).abs())
                .sum::<f64>()
        };
        (area(&self.parent), area(&self.child))
    }
}

/// Splits every edge into `k` equal parts and every triangle into `k^2`
/// affine copies of itself.
pub fn edgewise_subdivide(c: &SimplicialComplex, k: usize) -> Result<Subdivision> {
    if k == 0 {
        return Err(Error::InvalidArgument("subdivision level must be at least 1".into()));
    }
    let mut vertices: Vec<Point2> = c.vertices().to_vec();
    let mut edge_points: HashMap<(usize, usize, usize), usize> = HashMap::new();
    let mut triangles = Vec::with_capacity(c.num_triangles() * k * k);
    let mut parent_of = Vec::with_capacity(c.num_triangles() * k * k);
    let kf = k as f64;

    for (ti, t) in c.triangles().iter().enumerate() {
        let [ia, ib, ic] = t.0;
        let (a, b, cc) = (c.vertex(ia), c.vertex(ib), c.vertex(ic));
        // lattice point (i, j): a + i/k (b - a) + j/k (c - a)
        let mut local = vec![usize::MAX; (k + 1) * (k + 1)];
        let idx = |i: usize, j: usize| i * (k + 1) + j;
        for i in 0..=k {
            for j in 0..=(k - i) {
                let id = if i == 0 && j == 0 {
                    ia
                } else if i == k {
                    ib
                } else if j == k {
                    ic
                } else if j == 0 {
                    edge_point(&mut vertices, &mut edge_points, c, ia, ib, i, k)
                } else if i == 0 {
                    edge_point(&mut vertices, &mut edge_points, c, ia, ic, j, k)
                } else if i + j == k {
                    edge_point(&mut vertices, &mut edge_points, c, ib, ic, j, k)
                } else {
                    let p = a + (b - a) * (i as f64 / kf) + (cc - a) * (j as f64 / kf);
                    vertices.push(p);
                    vertices.len() - 1
                };
                local[idx(i, j)] = id;
            }
        }
        for i in 0..k {
            for j in 0..(k - i) {
                triangles.push(Triangle([local[idx(i, j)], local[idx(i + 1, j)], local[idx(i, j + 1)]]));
                parent_of.push(ti);
                if i + j + 1 < k {
                    triangles.push(Triangle([
                        local[idx(i + 1, j)],
                        local[idx(i + 1, j + 1)],
                        local[idx(i, j + 1)],
                    ]));
                    parent_of.push(ti);
                }
            }
        }
    }
    let child = SimplicialComplex::new(vertices, triangles)?;
    Ok(Subdivision {
        parent: c.clone(),
        child,
        parent_of,
        level: k,
    })
}

/// Point `step/k` of the way from `u` to `v`, computed from the canonical
/// (lower index first) direction so both incident triangles share it.
fn edge_point(
    vertices: &mut Vec<Point2>,
    cache: &mut HashMap<(usize, usize, usize), usize>,
    c: &SimplicialComplex,
    u: usize,
    v: usize,
    step: usize,
    k: usize,
) -> usize {
    let (lo, hi) = edge_key(u, v);
    let s = if lo == u { step } else { k - step };
    *cache.entry((lo, hi, s)).or_insert_with(|| {
        let p = c.vertex(lo).lerp(c.vertex(hi), s as f64 / k as f64);
        vertices.push(p);
        vertices.len() - 1
    })
}

/// Estimated diameter of `f(sigma)` from a barycentric lattice with `n`
/// divisions per side.
pub fn image_diameter(f: &dyn SampledMap, tri: [Point2; 3], n: usize) -> f64 {
    let pts = barycentric_lattice(tri, n);
    let imgs: Vec<Point2> = pts.into_iter().map(|p| f.eval(p)).collect();
    point_set_diameter(&imgs)
}

pub fn barycentric_lattice(tri: [Point2; 3], n: usize) -> Vec<Point2> {
    let [a, b, c] = tri;
    let nf = n as f64;
    let mut out = Vec::with_capacity((n + 1) * (n + 2) / 2);
    for i in 0..=n {
        for j in 0..=(n - i) {
            out.push(a + (b - a) * (i as f64 / nf) + (c - a) * (j as f64 / nf));
        }
    }
    out
}

pub fn point_set_diameter(pts: &[Point2]) -> f64 {
    if pts.len() <= 12 {
        return brute_diameter(pts);
    }
    brute_diameter(&convex_hull(pts))
}

fn brute_diameter(pts: &[Point2]) -> f64 {
    let mut best = 0.0f64;
    for (i, p) in pts.iter().enumerate() {
        for q in &pts[i + 1..] {
            best = best.max((*p - *q).norm_sq());
        }
    }
    best.sqrt()
}

/// Andrew's monotone chain; collinear points are dropped.
fn convex_hull(pts: &[Point2]) -> Vec<Point2> {
    let mut p = pts.to_vec();
    p.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
    p.dedup();
    if p.len() < 3 {
        return p;
    }
    let mut hull: Vec<Point2> = Vec::with_capacity(2 * p.len());
    for pass in 0..2 {
        let start = hull.len();
        let iter: Box<dyn Iterator<Item = &Point2>> = if pass == 0 { Box::new(p.iter()) } else { Box::new(p.iter().rev()) };
        for &q in iter {
            while hull.len() >= start + 2 && orient2d(hull[hull.len() - 2], hull[hull.len() - 1], q) <= 0.0 {
                hull.pop();
            }
            hull.push(q);
        }
        hull.pop();
    }
    hull
}

/// The result of [`refine_until`]: the subdivision plus the sampled bounds.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Refinement {
    pub subdivision: Subdivision,
    pub max_triangle_diameter: f64,
    pub max_image_diameter: f64,
    /// Barycentric lattice divisions used per child triangle.
    pub image_lattice: usize,
}

/// Finds the least edgewise level `k <= max_level` for which every child
/// triangle has `diam(sigma) < geom_bound` and sampled `diam(f(sigma)) <
/// image_bound`.
pub fn refine_until(
    c: &SimplicialComplex,
    f: &dyn SampledMap,
    geom_bound: f64,
    image_bound: f64,
    max_level: usize,
) -> Result<Refinement> {
    if !(geom_bound > 0.0 && image_bound > 0.0) {
        return Err(Error::InvalidArgument("refinement bounds must be positive".into()));
    }
    let max_diam = (0..c.num_triangles()).map(|t| c.triangle_diameter(t)).fold(0.0, f64::max);
    // child diameters are exactly parent diameters / k
    let mut k0 = 1;
    while max_diam / k0 as f64 >= geom_bound && k0 <= max_level {
        k0 += 1;
    }
    // least feasible level per parent, then the least common level at or
    // above their maximum (feasibility need not be monotone in k)
    let per_parent: Vec<Option<usize>> = (0..c.num_triangles())
        .into_par_iter()
        .map(|t| (k0..=max_level).find(|&k| parent_image_diameter(c, f, t, k, image_bound).is_some()))
        .collect();
    let cap_error = || Error::RefinementCap {
        cap: max_level,
        what: format!("diam < {geom_bound}, image diam < {image_bound}"),
    };
    let mut k = k0;
    for p in &per_parent {
        k = k.max(p.ok_or_else(cap_error)?);
    }
    while k <= max_level {
        if let Some(img) = level_image_diameter(c, f, k, image_bound) {
            let subdivision = edgewise_subdivide(c, k)?;
            let max_triangle_diameter = subdivision.child.mesh_diameter();
            return Ok(Refinement {
                subdivision,
                max_triangle_diameter,
                max_image_diameter: img,
                image_lattice: IMAGE_LATTICE,
            });
        }
        k += 1;
    }
    Err(cap_error())
}

/// Max sampled image diameter over all level-`k` children, or `None` as soon
/// as one child reaches `bound`.
fn level_image_diameter(c: &SimplicialComplex, f: &dyn SampledMap, k: usize, bound: f64) -> Option<f64> {
    let per_parent: Vec<Option<f64>> = (0..c.num_triangles())
        .into_par_iter()
        .map(|t| parent_image_diameter(c, f, t, k, bound))
        .collect();
    per_parent.into_iter().try_fold(0.0f64, |m, d| d.map(|d| m.max(d)))
}

/// Max sampled image diameter over the level-`k` children of parent `t`,
/// or `None` if one reaches `bound`. The corner images give a cheap lower
/// bound that rejects most failing children without the full lattice.
fn parent_image_diameter(c: &SimplicialComplex, f: &dyn SampledMap, t: usize, k: usize, bound: f64) -> Option<f64> {
    let [a, b, cc] = c.triangle_points(t);
    let kf = k as f64;
    let at = |i: usize, j: usize| a + (b - a) * (i as f64 / kf) + (cc - a) * (j as f64 / kf);
    let mut corner = vec![Point2::ORIGIN; (k + 1) * (k + 1)];
    for i in 0..=k {
        for j in 0..=(k - i) {
            corner[i * (k + 1) + j] = f.eval(at(i, j));
        }
    }
    let img = |i: usize, j: usize| corner[i * (k + 1) + j];
    let mut children = Vec::with_capacity(k * k);
    for i in 0..k {
        for j in 0..(k - i) {
            children.push([(i, j), (i + 1, j), (i, j + 1)]);
            if i + j + 1 < k {
                children.push([(i + 1, j), (i + 1, j + 1), (i, j + 1)]);
            }
        }
    }
    for ch in &children {
        if brute_diameter(&ch.map(|(i, j)| img(i, j))) >= bound {
            return None;
        }
    }
    let mut worst = 0.0f64;
    for ch in &children {
        let d = image_diameter(f, ch.map(|(i, j)| at(i, j)), IMAGE_LATTICE);
        if d >= bound {
            return None;
        }
        worst = worst.max(d);
    }
    Some(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::pt;
    use crate::maps::Identity;

    fn single() -> SimplicialComplex {
        SimplicialComplex::new(vec![pt(0., 0.), pt(1., 0.), pt(0., 1.)], vec![Triangle([0, 1, 2])]).unwrap()
    }

    #[test]
    fn level_one_is_identity() {
        let c = single();
        let s = edgewise_subdivide(&c, 1).unwrap();
        assert_eq!(s.child, c);
        assert_eq!(s.parent_of, vec![0]);
    }

    #[test]
    fn level_two_halves_diameter() {
        let c = single();
        let s = edgewise_subdivide(&c, 2).unwrap();
        assert_eq!(s.child.num_triangles(), 4);
        for t in 0..4 {
            assert!((s.child.triangle_diameter(t) - c.triangle_diameter(0) / 2.0).abs() < 1e-15);
        }
        assert!(s.child.validate().is_valid());
        assert!(s.check_containment().is_ok());
    }

    #[test]
    fn zero_level_rejected() {
        assert!(edgewise_subdivide(&single(), 0).is_err());
    }

    #[test]
    fn shared_edges_share_vertices() {
        let c = SimplicialComplex::new(
            vec![pt(0., 0.), pt(1., 0.), pt(1., 1.), pt(0., 1.)],
            vec![Triangle([0, 1, 2]), Triangle([0, 2, 3])],
        )
        .unwrap();
        let s = edgewise_subdivide(&c, 3).unwrap();
        assert_eq!(s.child.num_triangles(), 18);
        // 16 lattice points of a 3x3-cut square
        assert_eq!(s.child.num_vertices(), 16);
        assert!(s.child.validate().is_valid());
    }

    #[test]
    fn refine_identity_huge_bounds() {
        let r = refine_until(&single(), &Identity, 100.0, 100.0, 8).unwrap();
        assert_eq!(r.subdivision.level, 1);
    }

    #[test]
    fn refine_identity_half_diameter() {
        let c = single();
        let d = c.triangle_diameter(0);
        // strict bound: d/2 is not < d/2, so a bound just above it
        let r = refine_until(&c, &Identity, d / 2.0 + 1e-12, 100.0, 8).unwrap();
        assert_eq!(r.subdivision.level, 2);
    }

    #[test]
    fn refine_cap_reported() {
        let r = refine_until(&single(), &Identity, 1e-3, 1.0, 4);
        assert!(matches!(r, Err(Error::RefinementCap { .. })));
    }
}
