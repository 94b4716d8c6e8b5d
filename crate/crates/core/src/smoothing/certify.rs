use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::deltas::Deltas;
use super::mollify::{majority_orientation, MollifiedMap};
use crate::error::Result;
use crate::geometry::{pt, BBox, Mat2, Point2};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum JacobianVerdict {
    PositiveSampled,
    /// Some samples vanish, none have the wrong sign.
    NonnegativeSampled,
    Failed { witness: Point2, det: f64 },
}

/// Sampled sign of the determinant inside the excluded vertex balls.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExcludedZones {
    pub radius: f64,
    pub balls: usize,
    pub samples: usize,
    pub min_det: f64,
    pub nonnegative: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<Point2>,
}

/// Grid evidence for the sign of `det D(h * omega)` over `|K|`.
///
/// Determinants are recorded after multiplying by `orientation`, the
/// majority orientation of the source map, so an orientation-reversing map
/// certifies the same way as a preserving one.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JacobianCertificate {
    #[serde(flatten)]
    pub verdict: JacobianVerdict,
    pub region: BBox,
    pub grid: usize,
    pub orientation: i32,
    pub delta1: f64,
    pub delta2: f64,
    pub included_samples: usize,
    pub min_det: f64,
    pub max_det: f64,
    /// Largest fixed-order vs coarse-order disagreement seen in a Jacobian.
    pub max_quadrature_error: f64,
    pub excluded: ExcludedZones,
}

impl JacobianCertificate {
    pub fn positive(&self) -> bool {
        self.verdict == JacobianVerdict::PositiveSampled
    }
}

/// Where a grid point falls.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SampleZone {
    Outside,
    VertexBall,
    Included,
}

/// Classifies `x` against `|K|` and the balls `B_r(v)`.
///
/// A point of triangle `t` within `r < m` of a vertex `w` must have `w` as a
/// vertex of `t`, so only the three corners are tested.
pub fn classify_sample(m: &MollifiedMap, r: f64, x: Point2) -> SampleZone {
    let Some(t) = m.source.locate(x) else {
        return SampleZone::Outside;
    };
    if m.source.complex().triangle_points(t).iter().any(|v| v.dist(x) < r) {
        SampleZone::VertexBall
    } else {
        SampleZone::Included
    }
}

/// `n x n` lattice spanning `bbox`, row by row.
pub fn grid_points(bbox: BBox, n: usize) -> Vec<Point2> {
    let n = n.max(2);
    let step = |lo: f64, hi: f64, i: usize| lo + (hi - lo) * i as f64 / (n - 1) as f64;
    (0..n)
        .flat_map(|j| (0..n).map(move |i| pt(step(bbox.min.x, bbox.max.x, i), step(bbox.min.y, bbox.max.y, j))))
        .collect()
}

/// Samples the mollified Jacobian on an `n x n` grid over the bounding box of
/// `|K|`, skipping points outside `|K|` and certifying only outside the
/// balls `B_{2 delta1/3}(v)`. The balls get their own nonnegativity check on
/// the grid points that fall inside them and at the vertex centres, taken
/// with a deterministic stride so at most `grid^2` centres are evaluated.
pub fn certify_jacobian(m: &MollifiedMap, deltas: &Deltas, grid: usize) -> Result<JacobianCertificate> {
    let sign = majority_orientation(&m.source) as f64;
    let r = 2.0 * deltas.delta1 / 3.0;
    let region = m.domain_bbox();
    let points = grid_points(region, grid);
    let samples: Vec<(SampleZone, f64, f64)> = points
        .par_iter()
        .map(|&x| {
            let zone = classify_sample(m, r, x);
            if zone == SampleZone::Outside {
                return Ok((zone, 0.0, 0.0));
            }
            let (_, j) = m.estimate(x)?;
            Ok((zone, sign * j.value.det(), j.error_estimate))
        })
        .collect::<Result<_>>()?;
    let mut verdict = JacobianVerdict::PositiveSampled;
    let (mut included, mut min_det, mut max_det, mut max_err) = (0, f64::INFINITY, f64::NEG_INFINITY, 0.0f64);
    let mut ball = (0usize, f64::INFINITY, None);
    for (x, (zone, det, err)) in points.iter().zip(&samples) {
        match zone {
            SampleZone::Outside => {}
            SampleZone::Included => {
                included += 1;
                max_err = max_err.max(*err);
                max_det = max_det.max(*det);
                if *det < min_det {
                    min_det = *det;
                }
                if *det < 0.0 && !matches!(verdict, JacobianVerdict::Failed { .. }) {
                    verdict = JacobianVerdict::Failed { witness: *x, det: *det };
                } else if *det == 0.0 && verdict == JacobianVerdict::PositiveSampled {
                    verdict = JacobianVerdict::NonnegativeSampled;
                }
            }
            SampleZone::VertexBall => note_ball(&mut ball, *x, *det),
        }
    }
    let vertices = m.source.complex().vertices();
    let stride = vertices.len().div_ceil(grid * grid).max(1);
    let chosen: Vec<Point2> = vertices.iter().copied().step_by(stride).collect();
    let centers: Vec<f64> = chosen
        .par_iter()
        .map(|&v| Ok(sign * m.try_jacobian(v)?.det()))
        .collect::<Result<_>>()?;
    for (v, det) in chosen.iter().zip(centers) {
        note_ball(&mut ball, *v, det);
    }
    Ok(JacobianCertificate {
        verdict,
        region,
        grid,
        orientation: sign as i32,
        delta1: deltas.delta1,
        delta2: deltas.delta2,
        included_samples: included,
        min_det,
        max_det,
        max_quadrature_error: max_err,
        excluded: ExcludedZones {
            radius: r,
            balls: m.source.complex().num_vertices(),
            samples: ball.0,
            min_det: ball.1,
            nonnegative: ball.1 >= 0.0,
            witness: ball.2,
        },
    })
}

fn note_ball(acc: &mut (usize, f64, Option<Point2>), x: Point2, det: f64) {
    acc.0 += 1;
    if det < acc.1 {
        acc.1 = det;
    }
    if det < 0.0 && acc.2.is_none() {
        acc.2 = Some(x);
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ConvexVerdict {
    Pass {
        min_det: f64,
        sweep: usize,
        /// `det(alpha A + (1-alpha) B) = c0 + c1 alpha + c2 alpha^2`.
        coefficients: [f64; 3],
    },
    Fail {
        alpha: f64,
        det: f64,
    },
    NotApplicable {
        reason: String,
    },
}

/// Relative tolerance for `det(A - B) = 0`.
pub const SHARED_VECTOR_TOL: f64 = 1e-9;

/// Checks that `det(alpha A + (1 - alpha) B) > 0` on `(0, 1)` for matrices
/// with positive determinants that agree on some nonzero vector, by a sweep
/// of `sweep` interior points and by locating the roots of the quadratic.
pub fn det_convex_check(a: &Mat2, b: &Mat2, sweep: usize) -> ConvexVerdict {
    let (da, db) = (a.det(), b.det());
    if !(da > 0.0 && db > 0.0) {
        return ConvexVerdict::NotApplicable {
            reason: format!("determinants {da:e}, {db:e} are not both positive"),
        };
    }
    let d = a.sub(b);
    let c2 = d.det();
    let scale = a.max_abs_entry().max(b.max_abs_entry()).powi(2);
    if c2.abs() > SHARED_VECTOR_TOL * scale {
        return ConvexVerdict::NotApplicable {
            reason: format!("det(A - B) = {c2:e}: no common vector"),
        };
    }
    let c0 = db;
    let c1 = da - db - c2;
    let q = |t: f64| c0 + t * (c1 + t * c2);
    let mut min_det = f64::INFINITY;
    for k in 1..=sweep {
        let t = k as f64 / (sweep + 1) as f64;
        let v = a.scale(t).add(&b.scale(1.0 - t)).det();
        if !(v > 0.0) {
            return ConvexVerdict::Fail { alpha: t, det: v };
        }
        min_det = min_det.min(v);
    }
    // analytic: the minimum over [0,1] of the quadratic is at an endpoint or
    // at its vertex
    if c2 > 0.0 {
        let t = -c1 / (2.0 * c2);
        if t > 0.0 && t < 1.0 && !(q(t) > 0.0) {
            return ConvexVerdict::Fail { alpha: t, det: q(t) };
        }
    }
    ConvexVerdict::Pass {
        min_det,
        sweep,
        coefficients: [c0, c1, c2],
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::meshes::{annulus, square_grid};
    use crate::geometry::predicates::point_triangle_distance;
    use crate::geometry::{SimplicialComplex, Triangle};
    use crate::maps::{Affine, ComplexPoly};
    use crate::pl_approx::PLMap;
    use crate::smoothing::deltas::choose_deltas;
    use crate::smoothing::kernel::kernel_normalize;

    fn mollified(h: PLMap, eps: f64) -> (MollifiedMap, Deltas) {
        let m0 = MollifiedMap::new(h, kernel_normalize(1.0).unwrap()).unwrap();
        let d = choose_deltas(&m0.extended, eps).unwrap();
        let m = MollifiedMap::with_extension(m0.source, m0.extended, kernel_normalize(d.delta2).unwrap());
        (m, d)
    }

    #[test]
    fn identity_pair_and_diagonal_pair_pass() {
        assert!(matches!(det_convex_check(&Mat2::IDENTITY, &Mat2::IDENTITY, 99), ConvexVerdict::Pass { .. }));
        let v = det_convex_check(&Mat2::IDENTITY, &Mat2::diag(2.0, 1.0), 99);
        let ConvexVerdict::Pass { coefficients, .. } = v else { panic!("{v:?}") };
        // (alpha + 2 beta)(alpha + beta) with beta = 1 - alpha: 2 - alpha
        assert_eq!(coefficients, [2.0, -1.0, 0.0]);
    }

    #[test]
    fn precondition_failures_are_not_applicable() {
        let r = Mat2::rotation(2.0);
        assert!(matches!(det_convex_check(&Mat2::IDENTITY, &r, 99), ConvexVerdict::NotApplicable { .. }));
        assert!(matches!(
            det_convex_check(&Mat2::IDENTITY, &Mat2::diag(-1.0, 1.0), 99),
            ConvexVerdict::NotApplicable { .. }
        ));
    }

    #[test]
    fn affine_map_certifies_with_its_determinant() {
        let f = Affine::new(Mat2::new(1.5, 0.3, -0.2, 0.8), pt(0.0, 0.0));
        let h = PLMap::interpolate(&f, annulus(0.3, 1.0, 2, 10).unwrap()).unwrap();
        let (m, d) = mollified(h, 0.05);
        let cert = certify_jacobian(&m, &d, 40).unwrap();
        assert!(cert.positive());
        assert!((cert.min_det - f.linear.det()).abs() < 1e-8);
        assert!((cert.max_det - f.linear.det()).abs() < 1e-8);
        assert!(cert.excluded.nonnegative);
    }

    #[test]
    fn two_positive_triangles_certify() {
        let c = SimplicialComplex::new(
            vec![pt(0., 0.), pt(1., 0.), pt(0.5, 1.), pt(0.5, -1.)],
            vec![Triangle([0, 1, 2]), Triangle([0, 3, 1])],
        )
        .unwrap();
        let h = PLMap::new(c, vec![pt(0., 0.), pt(1., 0.), pt(0.9, 0.4), pt(0.5, -1.)]).unwrap();
        let (m, d) = mollified(h, 1.0);
        let cert = certify_jacobian(&m, &d, 101).unwrap();
        assert!(cert.positive(), "{cert:?}");
    }

    #[test]
    fn fold_fails_next_to_a_reversed_triangle() {
        // identity on a 4x4 grid with the centre image pushed across a
        // neighbouring edge, which reverses part of its star
        let c = square_grid(pt(0., 0.), pt(1., 1.), 4).unwrap();
        let centre = c.vertices().iter().position(|v| *v == pt(0.5, 0.5)).unwrap();
        let mut images = c.vertices().to_vec();
        images[centre] = pt(0.85, 0.5);
        let h = PLMap::new(c, images).unwrap();
        let reversed: Vec<usize> = (0..h.complex().num_triangles()).filter(|&t| h.image_orientation(t) < 0).collect();
        assert!(!reversed.is_empty());
        let (m, d) = mollified(h, 1.0);
        let cert = certify_jacobian(&m, &d, 101).unwrap();
        let JacobianVerdict::Failed { witness, det } = cert.verdict else { panic!("{cert:?}") };
        assert!(det < 0.0);
        let near = reversed.iter().any(|&t| {
            let [a, b, cc] = m.source.complex().triangle_points(t);
            point_triangle_distance(witness, a, b, cc) <= d.delta2
        });
        assert!(near, "{witness}");
    }

    #[test]
    fn square_pl_map_on_annulus_is_positive() {
        let h = PLMap::interpolate(&ComplexPoly::square(), annulus(0.2, 1.0, 3, 16).unwrap()).unwrap();
        let (m, d) = mollified(h, 0.1);
        let cert = certify_jacobian(&m, &d, 60).unwrap();
        assert!(cert.positive(), "{cert:?}");
        assert!(cert.min_det > 0.1);
    }
}
