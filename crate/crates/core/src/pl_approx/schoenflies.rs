//! PL extension of a boundary homeomorphism from a convex cell onto a
//! simple polygon.
//!
//! The image polygon `P` is shrunk by a miter offset into `P'`; the annulus
//! between `P` and `P'` is triangulated quad by quad and `P'` itself by ear
//! clipping. In the domain the same combinatorics is realised by pushing
//! the boundary points radially onto a small circle around the centroid,
//! where every diagonal triangulation is valid because the inner points are
//! in strictly convex position. If every image triangle has the orientation
//! of `P`, the degree of the interior is one everywhere, so the map is a
//! homeomorphism onto the closed polygon; this is checked exactly.

use serde::{Deserialize, Serialize};

use super::plmap::PLMap;
use crate::error::{Error, Result};
use crate::geometry::predicates::point_segment_distance;
use crate::geometry::{orient2d, ClosedPolyline, Point2, SimplicialComplex, Triangle};

/// A PL boundary map: `domain[i] -> image[i]`, linear in between.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundaryMap {
    domain: Vec<Point2>,
    image: Vec<Point2>,
}

impl BoundaryMap {
    /// `domain` must trace the boundary of a convex polygon (collinear side
    /// points allowed); `image` must be a simple polygon.
    pub fn new(mut domain: Vec<Point2>, mut image: Vec<Point2>) -> Result<Self> {
        if domain.len() != image.len() {
            return Err(Error::InvalidArgument("domain and image lengths differ".into()));
        }
        let cell = ClosedPolyline::new(domain.clone())?;
        if cell.orientation_sign() == 0 {
            return Err(Error::InvalidArgument("domain cell has zero area".into()));
        }
        if cell.orientation_sign() < 0 {
            domain.reverse();
            image.reverse();
        }
        let n = domain.len();
        for i in 0..n {
            if orient2d(domain[(i + n - 1) % n], domain[i], domain[(i + 1) % n]) < 0.0 {
                return Err(Error::InvalidArgument(format!("domain cell is not convex at {i}")));
            }
        }
        let poly = ClosedPolyline::new(image.clone())?;
        if let Some((i, j)) = poly.first_self_intersection() {
            return Err(Error::NonSimplePolygon(i, j));
        }
        Ok(BoundaryMap { domain, image })
    }

    /// The boundary of a triangle mapped affinely to `images`.
    pub fn triangle(tri: [Point2; 3], images: [Point2; 3]) -> Result<Self> {
        Self::new(tri.to_vec(), images.to_vec())
    }

    pub fn domain(&self) -> &[Point2] {
        &self.domain
    }

    pub fn image(&self) -> &[Point2] {
        &self.image
    }

    /// `+1` if the boundary map preserves orientation.
    pub fn orientation(&self) -> f64 {
        ClosedPolyline::new(self.image.clone())
            .map(|p| p.orientation_sign() as f64)
            .unwrap_or(0.0)
    }
}

/// PL homeomorphism of the domain cell onto the image polygon extending the
/// boundary map. The first `n` vertices of the result are the boundary
/// points in input order.
pub fn schoenflies_extend(bm: &BoundaryMap) -> Result<PLMap> {
    let n = bm.domain.len();
    let s = bm.orientation();
    if n == 3 {
        let c = SimplicialComplex::new(bm.domain.clone(), vec![Triangle([0, 1, 2])])?;
        return PLMap::new(c, bm.image.clone());
    }
    let q = &bm.image;
    let inner_domain = inner_ring(&bm.domain);
    let mut tau = 0.25 * min_vertex_edge_distance(q);
    for _ in 0..64 {
        if let Some(inner_image) = offset_ring(q, s, tau) {
            if let Some(core) = ring_and_core(q, &inner_image, s) {
                let mut vertices = bm.domain.clone();
                vertices.extend_from_slice(&inner_domain);
                let mut images = q.clone();
                images.extend_from_slice(&inner_image);
                let c = SimplicialComplex::new(vertices, core)?;
                let h = PLMap::new(c, images)?;
                let sign = if s > 0.0 { 1 } else { -1 };
                if (0..h.complex().num_triangles()).all(|t| h.image_orientation(t) == sign) {
                    return Ok(h);
                }
            }
        }
        tau *= 0.5;
    }
    Err(Error::Triangulation("no valid offset ring for the image polygon".into()))
}

/// Boundary points pushed towards the centroid onto a circle of half the
/// inradius about it.
fn inner_ring(domain: &[Point2]) -> Vec<Point2> {
    let n = domain.len() as f64;
    let g = domain.iter().fold(Point2::ORIGIN, |acc, &p| acc + p) * (1.0 / n);
    let r = 0.5
        * (0..domain.len())
            .map(|i| point_segment_distance(g, domain[i], domain[(i + 1) % domain.len()]))
            .fold(f64::INFINITY, f64::min);
    domain.iter().map(|&b| g + (b - g).normalized() * r).collect()
}

fn min_vertex_edge_distance(q: &[Point2]) -> f64 {
    let n = q.len();
    let mut best = f64::INFINITY;
    for i in 0..n {
        for j in 0..n {
            let k = (j + 1) % n;
            if j == i || k == i {
                continue;
            }
            best = best.min(point_segment_distance(q[i], q[j], q[k]));
        }
    }
    best
}

/// Miter offset of `q` by `tau` towards its interior (`s` is its
/// orientation sign).
fn offset_ring(q: &[Point2], s: f64, tau: f64) -> Option<Vec<Point2>> {
    let n = q.len();
    let normal = |i: usize| -> Point2 { (q[(i + 1) % n] - q[i]).normalized().perp() * s };
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let a = normal((i + n - 1) % n);
        let b = normal(i);
        let denom = 1.0 + a.dot(b);
        if denom < 1e-12 {
            return None;
        }
        let p = q[i] + (a + b) * (tau / denom);
        if !p.is_finite() {
            return None;
        }
        out.push(p);
    }
    Some(out)
}

/// Triangles of the offset annulus and of the ear-clipped inner polygon, in
/// local indices (`0..n` outer, `n..2n` inner), or `None` if some image
/// triangle has the wrong orientation or `P'` is not simple.
fn ring_and_core(q: &[Point2], inner: &[Point2], s: f64) -> Option<Vec<Triangle>> {
    let n = q.len();
    let mut tris = Vec::with_capacity(3 * n);
    for i in 0..n {
        let j = (i + 1) % n;
        for (a, b, c, t) in [
            (q[i], q[j], inner[j], Triangle([i, j, n + j])),
            (q[i], inner[j], inner[i], Triangle([i, n + j, n + i])),
        ] {
            if orient2d(a, b, c) * s <= 0.0 {
                return None;
            }
            tris.push(t);
        }
    }
    let poly = ClosedPolyline::new(inner.to_vec()).ok()?;
    if !poly.is_simple() || poly.orientation_sign() as f64 != s {
        return None;
    }
    for [a, b, c] in ear_clip(inner, s)? {
        tris.push(Triangle([n + a, n + b, n + c]));
    }
    Some(tris)
}

/// Ear-clipping triangulation of a simple polygon with orientation `s`,
/// using exact predicates. Triangles keep the polygon's cyclic order.
pub fn ear_clip(poly: &[Point2], s: f64) -> Option<Vec<[usize; 3]>> {
    let mut idx: Vec<usize> = (0..poly.len()).collect();
    let mut out = Vec::with_capacity(poly.len().saturating_sub(2));
    while idx.len() > 3 {
        let m = idx.len();
        let ear = (0..m).find(|&k| {
            let (a, b, c) = (idx[(k + m - 1) % m], idx[k], idx[(k + 1) % m]);
            if orient2d(poly[a], poly[b], poly[c]) * s <= 0.0 {
                return false;
            }
            idx.iter().all(|&v| {
                v == a
                    || v == b
                    || v == c
                    || orient2d(poly[a], poly[b], poly[v]) * s < 0.0
                    || orient2d(poly[b], poly[c], poly[v]) * s < 0.0
                    || orient2d(poly[c], poly[a], poly[v]) * s < 0.0
            })
        })?;
        let (a, b, c) = (idx[(ear + m - 1) % m], idx[ear], idx[(ear + 1) % m]);
        out.push([a, b, c]);
        idx.remove(ear);
    }
    if orient2d(poly[idx[0]], poly[idx[1]], poly[idx[2]]) * s <= 0.0 {
        return None;
    }
    out.push([idx[0], idx[1], idx[2]]);
    Some(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::pt;
    use crate::maps::SampledMap;

    fn tri() -> [Point2; 3] {
        [pt(0., 0.), pt(1., 0.), pt(0., 1.)]
    }

    #[test]
    fn affine_boundary_gives_one_triangle() {
        let img = [pt(1., 1.), pt(3., 1.5), pt(0.5, 2.)];
        let h = schoenflies_extend(&BoundaryMap::triangle(tri(), img).unwrap()).unwrap();
        assert_eq!(h.complex().num_triangles(), 1);
        assert_eq!(h.vertex_images(), &img);
    }

    #[test]
    fn identity_boundary_gives_identity() {
        let h = schoenflies_extend(&BoundaryMap::triangle(tri(), tri()).unwrap()).unwrap();
        assert!(h.eval(pt(0.2, 0.3)).dist(pt(0.2, 0.3)) < 1e-15);
    }

    #[test]
    fn ear_clip_square_with_notch() {
        let p = [pt(0., 0.), pt(2., 0.), pt(2., 2.), pt(1., 1.), pt(0., 2.)];
        let t = ear_clip(&p, 1.0).unwrap();
        assert_eq!(t.len(), 3);
        let area: f64 = t.iter().map(|&[a, b, c]| 0.5 * orient2d(p[a], p[b], p[c])).sum();
        assert!((area - 3.0).abs() < 1e-12);
    }

    #[test]
    fn nonsimple_image_rejected() {
        let dom = vec![pt(0., 0.), pt(1., 0.), pt(1., 1.), pt(0., 1.)];
        let img = vec![pt(0., 0.), pt(1., 1.), pt(1., 0.), pt(0., 1.)];
        assert!(matches!(BoundaryMap::new(dom, img), Err(Error::NonSimplePolygon(..))));
    }

    #[test]
    fn reversing_boundary_extends() {
        let dom = vec![pt(0., 0.), pt(0.5, 0.), pt(1., 0.), pt(0., 1.)];
        let img: Vec<Point2> = dom.iter().map(|p| pt(p.x, -p.y + 0.1 * p.x * p.x)).collect();
        let h = schoenflies_extend(&BoundaryMap::new(dom, img).unwrap()).unwrap();
        assert!((0..h.complex().num_triangles()).all(|t| h.image_orientation(t) == -1));
    }
}
