mod common;

use common::{jitter, jittered_grid, point_in};
use degree_forge::geometry::predicates::point_triangle_distance;
use degree_forge::geometry::{pt, BBox, Mat2, Point2};
use degree_forge::maps::{ComplexPoly, FnMap, SampledMap};
use degree_forge::pl_approx::{verify_local_injectivity, PLMap};
use degree_forge::smoothing::{
    certify_jacobian, choose_deltas, det_convex_check, grid_points, kernel_normalize, mollify, mollify_jacobian,
    poly_fit_up_to, ConvexVerdict, FitSamples, JacobianVerdict, MollifiedMap,
};
use num_complex::Complex64;
use proptest::prelude::*;

fn square_interpolant(n: usize, j: &[(f64, f64)]) -> PLMap {
    PLMap::interpolate(&ComplexPoly::square(), jittered_grid(n, j)).unwrap()
}

/// Triangles whose closed set comes within `r` of `x`.
fn triangles_near(h: &PLMap, x: Point2, r: f64) -> Vec<usize> {
    let c = h.complex();
    (0..c.num_triangles())
        .filter(|&t| {
            let [a, b, d] = c.triangle_points(t);
            point_triangle_distance(x, a, b, d) < r
        })
        .collect()
}

/// A pair with `A v = B v = lambda v` and positive determinants.
fn eigen_pair() -> impl Strategy<Value = (Mat2, Mat2)> {
    (0.0..std::f64::consts::TAU, 0.2..3.0f64, any::<bool>(), (-3.0..3.0f64, 0.05..3.0f64), (-3.0..3.0f64, 0.05..3.0f64))
        .prop_map(|(theta, lambda, neg, (a1, a2), (b1, b2))| {
            let v = pt(theta.cos(), theta.sin());
            let w = v.perp();
            let lambda = if neg { -lambda } else { lambda };
            // in the basis (v, w) the matrices are [[lambda, a1], [0, a2']]
            // with sign(a2') = sign(lambda), so both determinants are positive
            let s = lambda.signum();
            let col = |x1: f64, x2: f64| v * x1 + w * (s * x2);
            let basis_inv = Mat2::from_cols(v, w).inverse().unwrap();
            let a = Mat2::from_cols(v * lambda, col(a1, a2)).mul(&basis_inv);
            let b = Mat2::from_cols(v * lambda, col(b1, b2)).mul(&basis_inv);
            (a, b)
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn mollifier_error_shrinks_as_delta_halves(
        j in jitter(),
        pts in prop::collection::vec(point_in(0.1, 0.9), 500),
    ) {
        let h = square_interpolant(4, &j);
        let mut errors = Vec::new();
        for level in 0..5 {
            let kernel = kernel_normalize(0.08 / f64::powi(2.0, level)).unwrap();
            let e = pts
                .iter()
                .map(|&x| mollify(&h, &kernel, x).unwrap().value.dist(h.eval(x)))
                .fold(0.0, f64::max);
            errors.push(e);
        }
        for w in errors.windows(2) {
            prop_assert!(w[1] < w[0], "{errors:?}");
        }
        prop_assert!(errors[4] < errors[0] / 4.0, "{errors:?}");
    }

    #[test]
    fn mollifier_is_exact_inside_one_triangle(j in jitter(), x in point_in(0.02, 0.98), frac in 0.1..0.95f64) {
        let h = square_interpolant(3, &j);
        let t = h.locate(x).unwrap();
        let [a, b, c] = h.complex().triangle_points(t);
        let inner = [(a, b), (b, c), (c, a)]
            .iter()
            .map(|&(p, q)| degree_forge::geometry::predicates::point_segment_distance(x, p, q))
            .fold(f64::INFINITY, f64::min);
        prop_assume!(inner > 1e-4);
        let kernel = kernel_normalize(frac * inner).unwrap();
        let m = mollify(&h, &kernel, x).unwrap();
        prop_assert!(m.value.dist(h.eval_on(t, x)) < 1e-8);
        let jac = mollify_jacobian(&h, &kernel, x).unwrap();
        prop_assert!(jac.value.sub(&h.linear(t)).max_abs_entry() < 1e-8);
    }

    #[test]
    fn two_triangle_jacobian_is_a_convex_combination(
        j in jitter(),
        x in point_in(0.05, 0.95),
        delta in 0.005..0.05f64,
    ) {
        let h = square_interpolant(4, &j);
        let near = triangles_near(&h, x, delta);
        prop_assume!(near.len() == 2);
        let (a, b) = (h.linear(near[0]), h.linear(near[1]));
        let d = a.sub(&b);
        let dd: f64 = d.0.iter().flatten().map(|v| v * v).sum();
        prop_assume!(dd > 1e-12);
        let jac = mollify_jacobian(&h, &kernel_normalize(delta).unwrap(), x).unwrap().value;
        let r = jac.sub(&b);
        let alpha = r.0.iter().flatten().zip(d.0.iter().flatten()).map(|(p, q)| p * q).sum::<f64>() / dd;
        prop_assert!((-1e-9..=1.0 + 1e-9).contains(&alpha), "alpha {alpha}");
        prop_assert!(r.sub(&d.scale(alpha)).max_abs_entry() < 1e-4);
    }

    #[test]
    fn locally_injective_pl_maps_never_fail_certification(
        j in jitter(),
        m in (0.5..2.0f64, -0.4..0.4f64, -0.4..0.4f64, 0.5..2.0f64),
        bend in -0.3..0.3f64,
    ) {
        let f = FnMap::new(move |p: Point2| pt(m.0 * p.x + m.1 * p.y + bend * p.y * p.y, m.2 * p.x + m.3 * p.y));
        let h = PLMap::interpolate(&f, jittered_grid(3, &j)).unwrap();
        prop_assume!(verify_local_injectivity(&h).passed());
        prop_assume!((0..h.complex().num_triangles()).all(|t| h.image_orientation(t) == 1));
        let deltas = choose_deltas(&h, 0.1).unwrap();
        let mm = MollifiedMap::new(h, kernel_normalize(deltas.delta2).unwrap()).unwrap();
        let cert = certify_jacobian(&mm, &deltas, 40).unwrap();
        prop_assert!(!matches!(cert.verdict, JacobianVerdict::Failed { .. }), "{:?}", cert.verdict);
        prop_assert!(cert.excluded.nonnegative);
    }

    #[test]
    fn fitted_jacobian_stays_within_perturbation_bound(
        coeffs in prop::collection::vec((-0.5..0.5f64, -0.5..0.5f64), 4),
        degree in 1usize..4,
    ) {
        let hol: Vec<Complex64> = [Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)]
            .into_iter()
            .chain(coeffs.iter().map(|&(re, im)| Complex64::new(re, im)))
            .collect();
        let g = ComplexPoly::new(hol, vec![Complex64::new(0.1, 0.0)]);
        let domain = BBox::of([pt(-0.5, -0.5), pt(0.5, 0.5)]);
        let s = FitSamples::from_map(&g, grid_points(domain, 15), domain).unwrap();
        let fit = poly_fit_up_to(&s, degree, degree, 1e6, 1e6).unwrap();
        let e = fit.deriv_error;
        let bound = 2.0 * e * (2.0 * s.max_derivative() + e);
        prop_assert!(fit.jacobian.max_det_difference <= bound * (1.0 + 1e-12) + 1e-14);
        for (p, jg) in s.points.iter().zip(&s.jacobians) {
            let (_, jp) = fit.map.eval_with_jacobian(*p);
            prop_assert!((jp.det() - jg.det()).abs() <= bound * (1.0 + 1e-12) + 1e-14);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn shared_eigendirection_keeps_convex_combinations_invertible((a, b) in eigen_pair()) {
        prop_assert!(a.det() > 0.0 && b.det() > 0.0);
        match det_convex_check(&a, &b, 99) {
            ConvexVerdict::Pass { min_det, .. } => prop_assert!(min_det > 0.0),
            other => prop_assert!(false, "{other:?}"),
        }
    }

    #[test]
    fn pairs_without_common_vector_are_not_applicable(theta in 0.1..3.0f64) {
        let a = Mat2::IDENTITY;
        let b = Mat2::rotation(theta);
        prop_assume!(a.sub(&b).det().abs() > 1e-3);
        let verdict = det_convex_check(&a, &b, 99);
        prop_assert!(matches!(verdict, ConvexVerdict::NotApplicable { .. }), "{:?}", verdict);
    }
}
