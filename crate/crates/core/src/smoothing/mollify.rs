use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::kernel::{BumpKernel, PolarRule};
use crate::error::{Error, Result};
use crate::geometry::predicates::{locate_in_triangle, TriangleLocation};
use crate::geometry::{classify_pair, orient2d, BBox, Mat2, Point2, SimplicialComplex, Triangle, TriangleGrid};
use crate::maps::SampledMap;
use crate::pl_approx::PLMap;

/// Quadrature resolution: the rule order per polar direction, the coarser
/// order used for the error estimate, and the adaptive refinement limits
/// used by the single-point [`mollify`] / [`mollify_jacobian`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadratureSpec {
    pub order: usize,
    pub check_order: usize,
    pub max_order: usize,
    /// Disagreement between `order` and `check_order` that triggers doubling.
    pub tolerance: f64,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        QuadratureSpec {
            order: 32,
            check_order: 16,
            max_order: 256,
            tolerance: 1e-10,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate<T> {
    pub value: T,
    /// `|I_order - I_order/2|`.
    pub error_estimate: f64,
    pub order: usize,
}

/// Evaluates `h` at points that are mostly in the same triangle, reusing the
/// last hit before falling back to the grid.
struct Cursor<'a> {
    h: &'a PLMap,
    last: Option<usize>,
}

impl<'a> Cursor<'a> {
    fn new(h: &'a PLMap) -> Self {
        Cursor { h, last: None }
    }

    #[inline]
    fn eval(&mut self, p: Point2) -> Option<Point2> {
        if let Some(t) = self.last {
            let [a, b, c] = self.h.complex().triangle_points(t);
            if locate_in_triangle(a, b, c, p) != TriangleLocation::Outside {
                return Some(self.h.affine(t).apply(p));
            }
        }
        let t = self.h.locate(p)?;
        self.last = Some(t);
        Some(self.h.affine(t).apply(p))
    }
}

fn value_with(h: &PLMap, delta: f64, rule: &PolarRule, x: Point2) -> Result<Point2> {
    let mut cur = Cursor::new(h);
    let mut acc = Point2::ORIGIN;
    for (u, w) in rule.nodes.iter().zip(&rule.weights) {
        let v = cur.eval(x - *u * delta).ok_or(Error::KernelOutsideDomain(x))?;
        acc += v * *w;
    }
    Ok(acc)
}

/// `(1/delta) sum_k h(x - delta u_k) (x) grad omega(u_k)`; `h(x)` is
/// subtracted first since the gradient integrates to zero.
fn jacobian_with(h: &PLMap, delta: f64, rule: &PolarRule, x: Point2) -> Result<Mat2> {
    let mut cur = Cursor::new(h);
    let hx = cur.eval(x).ok_or(Error::KernelOutsideDomain(x))?;
    let mut m = [[0.0; 2]; 2];
    for (u, g) in rule.nodes.iter().zip(&rule.grad_weights) {
        let v = cur.eval(x - *u * delta).ok_or(Error::KernelOutsideDomain(x))? - hx;
        m[0][0] += v.x * g.x;
        m[0][1] += v.x * g.y;
        m[1][0] += v.y * g.x;
        m[1][1] += v.y * g.y;
    }
    Ok(Mat2(m).scale(1.0 / delta))
}

fn adaptive<T: Copy>(
    q: &QuadratureSpec,
    scale: f64,
    eval: impl Fn(&PolarRule) -> Result<T>,
    diff: impl Fn(T, T) -> f64,
) -> Result<Estimate<T>> {
    let mut coarse = eval(PolarRule::get(q.check_order)?)?;
    let mut order = q.order;
    loop {
        let fine = eval(PolarRule::get(order)?)?;
        let err = diff(fine, coarse);
        if err <= q.tolerance * scale || order >= q.max_order {
            return Ok(Estimate {
                value: fine,
                error_estimate: err,
                order,
            });
        }
        coarse = fine;
        order *= 2;
    }
}

/// `(h * omega_delta)(x)` by polar quadrature, doubling the order while the
/// estimate exceeds the tolerance.
pub fn mollify(h: &PLMap, kernel: &BumpKernel, x: Point2) -> Result<Estimate<Point2>> {
    mollify_with(h, kernel, x, &QuadratureSpec::default())
}

pub fn mollify_with(h: &PLMap, kernel: &BumpKernel, x: Point2, q: &QuadratureSpec) -> Result<Estimate<Point2>> {
    let scale = 1.0 + kernel.delta * h.max_linear_norm();
    adaptive(q, scale, |r| value_with(h, kernel.delta, r, x), |a, b| a.dist(b))
}

pub fn mollify_jacobian(h: &PLMap, kernel: &BumpKernel, x: Point2) -> Result<Estimate<Mat2>> {
    mollify_jacobian_with(h, kernel, x, &QuadratureSpec::default())
}

pub fn mollify_jacobian_with(h: &PLMap, kernel: &BumpKernel, x: Point2, q: &QuadratureSpec) -> Result<Estimate<Mat2>> {
    let scale = h.max_linear_norm().max(1e-300);
    adaptive(q, scale, |r| jacobian_with(h, kernel.delta, r, x), |a, b| a.sub(&b).max_abs_entry())
}

/// Appends a strip of triangles outside the boundary of `h`'s complex so
/// that kernel balls centred in `|K|` stay inside the domain.
///
/// Every boundary vertex `v` is pushed outward along its miter direction by
/// a fraction of its shorter boundary edge, and gets the image
/// `h(v) + J_v (v' - v)` with `J_v` the mean linear part of the boundary
/// triangles at `v`. The offset is halved until the strip neither overlaps
/// the complex nor folds against its own triangles.
pub fn extend_domain(h: &PLMap) -> Result<PLMap> {
    let c = h.complex();
    let n = c.num_vertices();
    // boundary vertex -> (outward unit normals, min edge length, linear parts)
    let mut normals: Vec<Vec<Point2>> = vec![Vec::new(); n];
    let mut len = vec![f64::INFINITY; n];
    let mut lin: Vec<Vec<Mat2>> = vec![Vec::new(); n];
    let mut bedges = Vec::new();
    for (_, e) in c.boundary_edges() {
        let t = e.triangles[0];
        let third = c.triangles()[t].0.into_iter().find(|&v| v != e.a && v != e.b).expect("triangle");
        let (a, b) = (c.vertex(e.a), c.vertex(e.b));
        let mut nrm = (b - a).perp().normalized();
        if nrm.dot(c.vertex(third) - a) > 0.0 {
            nrm = -nrm;
        }
        // orient each boundary edge with the complex on its left
        let (u, v) = if orient2d(a, b, c.vertex(third)) > 0.0 { (e.a, e.b) } else { (e.b, e.a) };
        bedges.push((u, v, t));
        for w in [e.a, e.b] {
            normals[w].push(nrm);
            len[w] = len[w].min(a.dist(b));
            lin[w].push(h.linear(t));
        }
    }
    if bedges.is_empty() {
        return Ok(h.clone());
    }
    let mut dirs = vec![Point2::ORIGIN; n];
    let mut jac = vec![Mat2::ZERO; n];
    for v in 0..n {
        match normals[v].as_slice() {
            [] => {}
            [n1, n2] => {
                let k = 1.0 + n1.dot(*n2);
                if k < 1e-6 {
                    return Err(Error::InvalidComplex(format!("boundary turns back at vertex {v}")));
                }
                dirs[v] = (*n1 + *n2) * (1.0 / k);
                jac[v] = lin[v][0].add(&lin[v][1]).scale(0.5);
            }
            other => {
                return Err(Error::InvalidComplex(format!(
                    "vertex {v} has {} boundary edges; the boundary must be a union of simple loops",
                    other.len()
                )))
            }
        }
    }
    let owners: Vec<usize> = bedges.iter().map(|e| e.2).collect();
    let mut factor = 0.5;
    for _ in 0..40 {
        let mut vertices = c.vertices().to_vec();
        let mut images = h.vertex_images().to_vec();
        let mut outer = vec![usize::MAX; n];
        for v in 0..n {
            if normals[v].is_empty() {
                continue;
            }
            let off = dirs[v] * (factor * len[v]);
            outer[v] = vertices.len();
            vertices.push(c.vertex(v) + off);
            images.push(h.vertex_images()[v] + jac[v].apply(off));
        }
        let mut triangles = c.triangles().to_vec();
        let first_new = triangles.len();
        for &(u, v, _) in &bedges {
            // outside is to the right of u -> v
            triangles.push(Triangle([v, u, outer[u]]));
            triangles.push(Triangle([v, outer[u], outer[v]]));
        }
        if let Ok(ext) = SimplicialComplex::new(vertices, triangles) {
            let strip: Vec<usize> = (first_new..ext.num_triangles()).collect();
            if strip_is_embedded(&ext, &strip) {
                let map = PLMap::new(ext, images)?;
                if strip_is_injective(&map, first_new, &owners) {
                    return Ok(map);
                }
            }
        }
        factor *= 0.5;
    }
    Err(Error::InvalidComplex("no valid boundary extension strip".into()))
}

fn strip_is_embedded(c: &SimplicialComplex, strip: &[usize]) -> bool {
    let grid = TriangleGrid::build(c);
    strip.par_iter().all(|&t| {
        let bt = c.triangle_bbox(t);
        let mut cand = Vec::new();
        grid.query(&bt, &mut cand);
        cand.sort_unstable();
        cand.dedup();
        cand.into_iter().filter(|&s| s != t && c.triangle_bbox(s).overlaps(&bt)).all(|s| {
            classify_pair(c.triangle_points(t), c.triangles()[t].0, c.triangle_points(s), c.triangles()[s].0).is_none()
        })
    })
}

/// Each strip triangle keeps the orientation of the boundary triangle it
/// grows from and meets that triangle and the other strip triangles in the
/// image only along common faces.
fn strip_is_injective(map: &PLMap, first_new: usize, owners: &[usize]) -> bool {
    let c = map.complex();
    let stars = c.vertex_stars();
    (first_new..c.num_triangles()).into_par_iter().all(|t| {
        let owner = owners[(t - first_new) / 2];
        map.image_orientation(t) == map.image_orientation(owner)
            && c.adjacent_triangles(&stars, t)
                .into_iter()
                .filter(|&s| s == owner || s >= first_new)
                .all(|s| {
                    classify_pair(map.image_points(t), c.triangles()[t].0, map.image_points(s), c.triangles()[s].0)
                        .is_none()
                })
    })
}

/// `+1` unless more triangles of `h` reverse orientation than preserve it.
pub fn majority_orientation(h: &PLMap) -> i32 {
    let s: i64 = (0..h.complex().num_triangles()).map(|t| h.image_orientation(t) as i64).sum();
    if s < 0 {
        -1
    } else {
        1
    }
}

/// A PL map convolved with a bump kernel. `source` is the map on `|K|`,
/// `extended` the same map with a boundary strip; evaluation uses the fixed
/// order of `quadrature` (no adaptive doubling) so that the map is a single
/// well-defined function.
#[derive(Clone, Debug)]
pub struct MollifiedMap {
    pub source: PLMap,
    pub extended: PLMap,
    pub kernel: BumpKernel,
    pub quadrature: QuadratureSpec,
}

impl MollifiedMap {
    pub fn new(source: PLMap, kernel: BumpKernel) -> Result<Self> {
        let extended = extend_domain(&source)?;
        Ok(Self::with_extension(source, extended, kernel))
    }

    pub fn with_extension(source: PLMap, extended: PLMap, kernel: BumpKernel) -> Self {
        MollifiedMap {
            source,
            extended,
            kernel,
            quadrature: QuadratureSpec::default(),
        }
    }

    fn rule(&self) -> &'static PolarRule {
        PolarRule::get(self.quadrature.order).expect("quadrature order validated")
    }

    pub fn try_eval(&self, x: Point2) -> Result<Point2> {
        value_with(&self.extended, self.kernel.delta, self.rule(), x)
    }

    pub fn try_jacobian(&self, x: Point2) -> Result<Mat2> {
        jacobian_with(&self.extended, self.kernel.delta, self.rule(), x)
    }

    /// Fixed-order value and Jacobian with the coarse-rule error estimates.
    pub fn estimate(&self, x: Point2) -> Result<(Estimate<Point2>, Estimate<Mat2>)> {
        let coarse = PolarRule::get(self.quadrature.check_order)?;
        let v = self.try_eval(x)?;
        let j = self.try_jacobian(x)?;
        let vc = value_with(&self.extended, self.kernel.delta, coarse, x)?;
        let jc = jacobian_with(&self.extended, self.kernel.delta, coarse, x)?;
        let order = self.quadrature.order;
        Ok((
            Estimate {
                value: v,
                error_estimate: v.dist(vc),
                order,
            },
            Estimate {
                value: j,
                error_estimate: j.sub(&jc).max_abs_entry(),
                order,
            },
        ))
    }

    pub fn domain_bbox(&self) -> BBox {
        self.source.complex().bbox()
    }
}

impl SampledMap for MollifiedMap {
    /// Falls back to the source map where the kernel ball leaves the
    /// extended domain.
    fn eval(&self, x: Point2) -> Point2 {
        self.try_eval(x).unwrap_or_else(|_| self.source.eval(x))
    }

    fn jacobian(&self, x: Point2) -> Option<Mat2> {
        self.try_jacobian(x).ok()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::meshes::{annulus, unit_square};
    use crate::geometry::{pt, Mat2};
    use crate::maps::{finite_difference_jacobian, Affine, ComplexPoly, FnMap};
    use crate::smoothing::kernel::kernel_normalize;

    fn two_triangles(apex: Point2) -> PLMap {
        // shared edge (0,0)-(1,0); lower triangle identity, upper one sheared
        let c = SimplicialComplex::new(
            vec![pt(0., 0.), pt(1., 0.), pt(0.5, 1.), pt(0.5, -1.)],
            vec![Triangle([0, 1, 2]), Triangle([0, 3, 1])],
        )
        .unwrap();
        PLMap::new(c, vec![pt(0., 0.), pt(1., 0.), apex, pt(0.5, -1.)]).unwrap()
    }

    /// Fine midpoint rule for the convolution on a Cartesian grid.
    fn riemann(h: &PLMap, k: &BumpKernel, x: Point2, n: usize) -> Point2 {
        let step = 2.0 * k.delta / n as f64;
        let mut acc = Point2::ORIGIN;
        for i in 0..n {
            for j in 0..n {
                let y = pt(-k.delta + step * (i as f64 + 0.5), -k.delta + step * (j as f64 + 0.5));
                let w = k.eval(y);
                if w > 0.0 {
                    acc += h.try_eval(x - y).unwrap() * w;
                }
            }
        }
        acc * (step * step)
    }

    #[test]
    fn linear_map_is_reproduced() {
        let f = Affine::new(Mat2::new(2.0, 0.5, -0.3, 1.0), pt(0.1, -0.2));
        let h = PLMap::interpolate(&f, unit_square()).unwrap();
        let k = kernel_normalize(0.1).unwrap();
        let x = pt(0.7, 0.25);
        let v = mollify(&h, &k, x).unwrap();
        assert!(v.value.dist(f.apply(x)) < 1e-12);
        let j = mollify_jacobian(&h, &k, x).unwrap();
        assert!(j.value.sub(&f.linear).max_abs_entry() < 1e-10);
        // across the diagonal both triangles carry the same linear part
        let on_edge = pt(0.5, 0.5);
        assert!(mollify(&h, &k, on_edge).unwrap().value.dist(f.apply(on_edge)) < 1e-12);
    }

    #[test]
    fn ball_leaving_domain_is_an_error() {
        let h = PLMap::interpolate(&ComplexPoly::square(), unit_square()).unwrap();
        let k = kernel_normalize(0.1).unwrap();
        assert!(matches!(mollify(&h, &k, pt(0.05, 0.5)), Err(Error::KernelOutsideDomain(_))));
    }

    #[test]
    fn edge_point_matches_riemann_oracle() {
        let h = two_triangles(pt(0.8, 1.3));
        let k = kernel_normalize(0.2).unwrap();
        let x = pt(0.45, 0.03);
        let q = mollify(&h, &k, x).unwrap();
        let oracle = riemann(&h, &k, x, 1200);
        assert!(q.value.dist(oracle) < 1e-6, "{} vs {}", q.value, oracle);
    }

    #[test]
    fn symmetric_edge_point_averages_linear_parts() {
        let h = two_triangles(pt(0.8, 1.3));
        let (a, b) = (h.linear(0), h.linear(1));
        let k = kernel_normalize(0.2).unwrap();
        let j = mollify_jacobian(&h, &k, pt(0.5, 0.0)).unwrap().value;
        assert!(j.sub(&a.add(&b).scale(0.5)).max_abs_entry() < 1e-4, "{j:?}");
    }

    #[test]
    fn generic_edge_point_is_convex_combination() {
        let h = two_triangles(pt(0.8, 1.3));
        let (a, b) = (h.linear(0), h.linear(1));
        let k = kernel_normalize(0.2).unwrap();
        let x = pt(0.45, 0.07);
        let j = mollify_jacobian(&h, &k, x).unwrap().value;
        // least-squares alpha in j = b + alpha (a - b)
        let d = a.sub(&b);
        let r = j.sub(&b);
        let dot = |m: &Mat2, n: &Mat2| (0..2).flat_map(|i| (0..2).map(move |k| (i, k))).map(|(i, k)| m.0[i][k] * n.0[i][k]).sum::<f64>();
        let alpha = dot(&r, &d) / dot(&d, &d);
        assert!((0.0..=1.0).contains(&alpha) && alpha > 0.5);
        assert!(r.sub(&d.scale(alpha)).max_abs_entry() < 1e-4);
        // cross-check against central differences of the value
        let m = |p: Point2| mollify(&h, &k, p).unwrap().value;
        let hstep = 1e-4;
        let dx = (m(x + pt(hstep, 0.0)) - m(x - pt(hstep, 0.0))) * (0.5 / hstep);
        let dy = (m(x + pt(0.0, hstep)) - m(x - pt(0.0, hstep))) * (0.5 / hstep);
        let fd = Mat2::from_cols(dx, dy);
        assert!(j.sub(&fd).max_abs_entry() < 1e-4 * j.max_abs_entry(), "{j:?} vs {fd:?}");
    }

    #[test]
    fn extension_covers_boundary_balls() {
        let c = annulus(0.2, 1.0, 2, 12).unwrap();
        let h = PLMap::interpolate(&ComplexPoly::square(), c).unwrap();
        let ext = extend_domain(&h).unwrap();
        assert!(ext.complex().validate().is_valid());
        assert!(crate::pl_approx::verify_local_injectivity(&ext).passed());
        let k = kernel_normalize(0.01).unwrap();
        let m = MollifiedMap::new(h.clone(), k).unwrap();
        // kinks through a vertex lie along polar rays, where a fixed-order
        // rule is much less accurate; test on boundary edges instead
        let mids: Vec<Point2> = h
            .complex()
            .boundary_edges()
            .map(|(_, e)| h.complex().vertex(e.a).lerp(h.complex().vertex(e.b), 0.4))
            .step_by(5)
            .collect();
        for p in mids {
            let v = m.try_eval(p).unwrap();
            assert!(v.dist(h.eval(p)) < 0.01 * 2.5);
            let j = m.try_jacobian(p).unwrap();
            let fine = mollify_jacobian(&ext, &k, p).unwrap();
            assert!(j.sub(&fine.value).max_abs_entry() < 1e-3, "{j:?} vs {fine:?}");
            let val = FnMap::new(|q: Point2| mollify(&ext, &k, q).unwrap().value);
            let fd = finite_difference_jacobian(&val, p, 1e-5);
            assert!(fine.value.sub(&fd).max_abs_entry() < 1e-3, "{fine:?} vs {fd:?}");
        }
    }
}
