//! Locally one-to-one piecewise-linear approximation.
//!
//! [`pl_approximate`] refines the complex until triangles are small in the
//! domain and in the image, measures for every triangle how far its image
//! stays from the images of the nearby vertices (`theta_sigma`), builds a
//! broken-line approximation of the 1-skeleton inside that budget and fills
//! each triangle with a PL homeomorphism onto the polygon bounded by its
//! three broken lines. The result is certified by
//! [`verify_local_injectivity`].

mod injectivity;
mod plmap;
mod schoenflies;
mod skeleton;

pub use injectivity::{verify_local_injectivity, InjectivityCertificate, InjectivityVerdict, ThetaBudget};
pub use plmap::PLMap;
pub use schoenflies::{ear_clip, schoenflies_extend, BoundaryMap};
pub use skeleton::{
    approximate_skeleton, approximate_skeleton_with, BrokenLine, Skeleton, SkeletonApproximation, SkeletonConfig,
};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{barycentric_lattice, orient2d, refine_until, BBox, Point2, SimplicialComplex, Triangle, IMAGE_LATTICE};
use crate::maps::SampledMap;

/// Combinatorial radius used for the skeleton and the `D(sigma)` sets.
pub const NEIGHBORHOOD_DEPTH: usize = 3;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlApproxConfig {
    pub max_refinement: usize,
    pub skeleton: SkeletonConfig,
}

impl Default for PlApproxConfig {
    fn default() -> Self {
        PlApproxConfig {
            max_refinement: 64,
            skeleton: SkeletonConfig {
                arc_samples: 16,
                max_arc_samples: 1 << 12,
                error_samples: 32,
                ..SkeletonConfig::default()
            },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlApproximation {
    pub map: PLMap,
    pub certificate: InjectivityCertificate,
    /// Edgewise subdivision level applied to the input complex.
    pub refinement_level: usize,
    pub max_triangle_diameter: f64,
    pub max_image_diameter: f64,
    pub skeleton_edges: usize,
    pub straight_edges: usize,
    /// Triangles filled by a nontrivial Schoenflies extension.
    pub extended_triangles: usize,
    /// `max |f - h|` over centroids and edge midpoints of the result.
    pub sampled_error: f64,
}

pub fn pl_approximate(f: &dyn SampledMap, complex: &SimplicialComplex, eps: f64, inj_radius: f64) -> Result<PlApproximation> {
    pl_approximate_with(f, complex, eps, inj_radius, &PlApproxConfig::default())
}

pub fn pl_approximate_with(
    f: &dyn SampledMap,
    complex: &SimplicialComplex,
    eps: f64,
    inj_radius: f64,
    cfg: &PlApproxConfig,
) -> Result<PlApproximation> {
    if !(eps > 0.0 && inj_radius > 0.0) {
        return Err(Error::InvalidArgument("eps and inj_radius must be positive".into()));
    }
    let refinement = refine_until(complex, f, inj_radius / 3.0, eps / 3.0, cfg.max_refinement)?;
    let l = &refinement.subdivision.child;
    let sk = Skeleton::from_complex(l);

    let near = sk.all_within(NEIGHBORHOOD_DEPTH);
    let (theta, theta_argmin) = theta_budgets(f, l, &near, eps)?;
    let delta1 = theta.iter().copied().fold(f64::INFINITY, f64::min);
    let skel = skeleton::approximate_skeleton_near(f, &sk, NEIGHBORHOOD_DEPTH, delta1, &cfg.skeleton, Some(near))?;
    let (map, extended_triangles) = assemble(l, &skel)?;

    let mut certificate = verify_local_injectivity(&map);
    certificate.theta = Some(ThetaBudget {
        eps,
        inj_radius,
        refinement_level: refinement.subdivision.level,
        d: NEIGHBORHOOD_DEPTH,
        delta1,
        theta_min: delta1,
        theta_max: theta.iter().copied().fold(0.0, f64::max),
        theta_argmin,
    });
    let sampled_error = sampled_error(f, &map);
    Ok(PlApproximation {
        certificate,
        refinement_level: refinement.subdivision.level,
        max_triangle_diameter: refinement.max_triangle_diameter,
        max_image_diameter: refinement.max_image_diameter,
        skeleton_edges: sk.edges().len(),
        straight_edges: skel.straight_edges,
        extended_triangles,
        sampled_error,
        map,
    })
}

/// `theta_sigma = min(eps/3, d(f(sigma), f(D(sigma))))` where `D(sigma)` is
/// the set of vertices within combinatorial distance 3 of every vertex of
/// `sigma`, excluding its own vertices.
fn theta_budgets(f: &dyn SampledMap, l: &SimplicialComplex, near: &[Vec<(usize, usize)>], eps: f64) -> Result<(Vec<f64>, usize)> {
    let images: Vec<Point2> = l.vertices().par_iter().map(|&v| f.eval(v)).collect();
    let theta: Vec<f64> = (0..l.num_triangles())
        .into_par_iter()
        .map(|t| {
            let [a, b, c] = l.triangles()[t].0;
            let lattice: Vec<Point2> = barycentric_lattice(l.triangle_points(t), IMAGE_LATTICE)
                .into_iter()
                .map(|p| f.eval(p))
                .collect();
            let bbox = BBox::of(lattice.iter().copied());
            let mut th = eps / 3.0;
            let has = |v: usize, u: usize| near[v].binary_search_by_key(&u, |&(x, _)| x).is_ok();
            for &(u, _) in &near[a] {
                if u == a || u == b || u == c || !has(b, u) || !has(c, u) {
                    continue;
                }
                let w = images[u];
                // every lattice point is at least this far from w
                if bbox.distance(w) >= th {
                    continue;
                }
                for q in &lattice {
                    th = th.min(q.dist(w));
                }
            }
            th
        })
        .collect();
    let (argmin, min) = theta
        .iter()
        .copied()
        .enumerate()
        .fold((0, f64::INFINITY), |acc, (i, x)| if x < acc.1 { (i, x) } else { acc });
    if !(min > 0.0) {
        return Err(Error::InjectivityScale { triangle: argmin });
    }
    Ok((theta, argmin))
}

/// Builds `L_1` and `h`: triangles with three straight edges keep their
/// vertex-image interpolation, the others get a Schoenflies extension of the
/// polygon bounded by their broken lines.
fn assemble(l: &SimplicialComplex, skel: &SkeletonApproximation) -> Result<(PLMap, usize)> {
    let sk = &skel.skeleton;
    let mut vertices = l.vertices().to_vec();
    let mut images = skel.vertex_images.clone();
    // interior points of each broken line, as global vertex ids
    let mut edge_inner: Vec<Vec<usize>> = Vec::with_capacity(sk.edges().len());
    for (e, line) in skel.lines.iter().enumerate() {
        let mut ids = Vec::new();
        for k in 1..line.points.len() - 1 {
            vertices.push(sk.edge_point(e, line.times[k]));
            images.push(line.points[k]);
            ids.push(vertices.len() - 1);
        }
        edge_inner.push(ids);
    }
    let mut triangles = Vec::with_capacity(l.num_triangles());
    let mut extended = 0;
    for t in 0..l.num_triangles() {
        let tri = l.triangles()[t];
        let eids = l.triangle_edge_ids(t);
        if eids.iter().all(|&e| skel.lines[e].is_straight()) {
            triangles.push(tri);
            continue;
        }
        extended += 1;
        let [i, j, k] = tri.0;
        let order = if orient2d(l.vertex(i), l.vertex(j), l.vertex(k)) > 0.0 {
            [i, j, k]
        } else {
            [i, k, j]
        };
        let mut boundary = Vec::new();
        for s in 0..3 {
            let (u, v) = (order[s], order[(s + 1) % 3]);
            let e = l.edge_index(u, v).expect("triangle side is an edge");
            boundary.push(u);
            if sk.edges()[e].0 == u {
                boundary.extend(edge_inner[e].iter().copied());
            } else {
                boundary.extend(edge_inner[e].iter().rev().copied());
            }
        }
        let bm = BoundaryMap::new(
            boundary.iter().map(|&g| vertices[g]).collect(),
            boundary.iter().map(|&g| images[g]).collect(),
        )?;
        let local = schoenflies_extend(&bm)?;
        let n = boundary.len();
        let mut global: Vec<usize> = boundary.clone();
        for q in n..local.complex().num_vertices() {
            vertices.push(local.complex().vertex(q));
            images.push(local.vertex_images()[q]);
            global.push(vertices.len() - 1);
        }
        for lt in local.complex().triangles() {
            let [a, b, c] = lt.0;
            triangles.push(Triangle([global[a], global[b], global[c]]));
        }
    }
    let complex = SimplicialComplex::new(vertices, triangles)?;
    Ok((PLMap::new(complex, images)?, extended))
}

fn sampled_error(f: &dyn SampledMap, h: &PLMap) -> f64 {
    let c = h.complex();
    (0..c.num_triangles())
        .into_par_iter()
        .map(|t| {
            let [a, b, cc] = c.triangle_points(t);
            let g = (a + b + cc) * (1.0 / 3.0);
            [g, a.lerp(b, 0.5), b.lerp(cc, 0.5), cc.lerp(a, 0.5)]
                .into_iter()
                .map(|p| f.eval(p).dist(h.affine(t).apply(p)))
                .fold(0.0, f64::max)
        })
        .reduce(|| 0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::meshes::{annulus, unit_square};
    use crate::geometry::{pt, Mat2};
    use crate::maps::{Affine, ComplexPoly};

    #[test]
    fn affine_map_is_reproduced() {
        let f = Affine::new(Mat2::new(2.0, 0.5, -0.3, 1.0), pt(0.1, -0.2));
        let r = pl_approximate(&f, &unit_square(), 0.5, 0.5).unwrap();
        assert!(r.certificate.passed());
        assert_eq!(r.extended_triangles, 0);
        assert!(r.sampled_error < 1e-12);
    }

    #[test]
    fn square_on_coarse_annulus() {
        let c = annulus(0.2, 1.0, 2, 12).unwrap();
        let r = pl_approximate(&ComplexPoly::square(), &c, 0.2, 0.3).unwrap();
        assert!(r.certificate.passed(), "{:?}", r.certificate.verdict);
        assert!(r.sampled_error < 0.2);
        for (v, w) in r.map.complex().vertices().iter().zip(r.map.vertex_images()).take(c.num_vertices()) {
            assert_eq!(ComplexPoly::square().eval(*v), *w);
        }
    }
}
