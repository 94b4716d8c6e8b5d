use std::f64::consts::TAU;

use degree_forge::degree::{brouwer_degree, degree_oracle_regular, winding_number, Region};
use degree_forge::geometry::{pt, ClosedPolyline, Mat2, Point2};
use degree_forge::maps::{Affine, ComplexPoly, FnMap, SampledMap};
use proptest::prelude::*;

/// Star-shaped polygon around the origin with the given radii.
fn star(radii: &[f64]) -> ClosedPolyline {
    let n = radii.len();
    let pts = radii
        .iter()
        .enumerate()
        .map(|(i, &r)| {
            let a = TAU * i as f64 / n as f64;
            pt(r * a.cos(), r * a.sin())
        })
        .collect();
    ClosedPolyline::new(pts).unwrap()
}

fn unit_disk() -> Region {
    Region::disk(Point2::ORIGIN, 1.0, 256).unwrap()
}

fn standard_maps() -> Vec<ComplexPoly> {
    vec![ComplexPoly::monomial(1), ComplexPoly::square(), ComplexPoly::cube(), ComplexPoly::conj()]
}

fn nondegenerate_matrix() -> impl Strategy<Value = Mat2> {
    (-2.0..2.0f64, -2.0..2.0f64, -2.0..2.0f64, -2.0..2.0f64)
        .prop_map(|(a, b, c, d)| Mat2::new(a, b, c, d))
        .prop_filter("nondegenerate", |m| m.det().abs() > 0.1)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn reversing_the_curve_negates_winding(
        radii in prop::collection::vec(0.3..1.5f64, 3..40),
        x in -2.0..2.0f64,
        y in -2.0..2.0f64,
    ) {
        let curve = star(&radii);
        let p = pt(x, y);
        if let Ok(w) = winding_number(&curve, p) {
            prop_assert_eq!(winding_number(&curve.reversed(), p).unwrap(), -w);
            prop_assert!(w == 0 || w.abs() == 1);
        }
    }

    #[test]
    fn small_perturbations_preserve_degree(
        which in 0usize..4,
        r in 0.0..0.4f64,
        angle in 0.0..TAU,
        freq in (1.0..6.0f64, 1.0..6.0f64),
        phase in (0.0..TAU, 0.0..TAU),
        scale in 0.0..0.99f64,
    ) {
        let f = standard_maps().swap_remove(which);
        let u = unit_disk();
        let p = pt(r * angle.cos(), r * angle.sin());
        let base = brouwer_degree(&f, &u, p).unwrap();
        // |(cos, sin)| <= sqrt(2), so the sup norm stays below clearance / 2.
        let amp = scale * base.boundary_clearance / (2.0 * 2f64.sqrt());
        let f2 = f.clone();
        let g = FnMap::new(move |z: Point2| {
            f2.eval(z) + pt((freq.0 * z.x + phase.0).cos(), (freq.1 * z.y + phase.1).sin()) * amp
        });
        prop_assert_eq!(brouwer_degree(&g, &u, p).unwrap().degree, base.degree);
    }

    #[test]
    fn winding_matches_preimage_count_for_affine_maps(
        m in nondegenerate_matrix(),
        b in (-0.5..0.5f64, -0.5..0.5f64),
        p in (-1.5..1.5f64, -1.5..1.5f64),
    ) {
        let f = Affine::new(m, pt(b.0, b.1));
        let u = unit_disk();
        let p = pt(p.0, p.1);
        let preimage = m.inverse().unwrap().apply(p - f.offset);
        // keep the preimage away from the circle so both methods apply
        prop_assume!((preimage.norm() - 1.0).abs() > 0.02);
        let winding = brouwer_degree(&f, &u, p).unwrap().degree;
        let oracle = degree_oracle_regular(&f, &u, p, 64).unwrap().degree;
        prop_assert_eq!(winding, oracle);
        let expected = if preimage.norm() < 1.0 { m.det().signum() as i32 } else { 0 };
        prop_assert_eq!(winding, expected);
    }

    #[test]
    fn targets_in_one_component_share_degree(
        which in 0usize..4,
        a in (-0.6..0.6f64, -0.6..0.6f64),
        b in (-0.6..0.6f64, -0.6..0.6f64),
    ) {
        // z^k maps the unit circle onto itself, so the open disk of radius
        // 0.9 is a connected set missing the boundary image.
        let f = standard_maps().swap_remove(which);
        let u = unit_disk();
        let da = brouwer_degree(&f, &u, pt(a.0, a.1)).unwrap().degree;
        let db = brouwer_degree(&f, &u, pt(b.0, b.1)).unwrap().degree;
        prop_assert_eq!(da, db);
    }
}

#[test]
fn winding_matches_oracle_on_standard_maps() {
    let u = unit_disk();
    for f in standard_maps() {
        for p in [pt(0.3, 0.1), pt(-0.2, 0.25), pt(0.05, -0.4)] {
            let w = brouwer_degree(&f, &u, p).unwrap().degree;
            let o = degree_oracle_regular(&f, &u, p, 256).unwrap().degree;
            assert_eq!(w, o, "{f:?} at {p}");
        }
    }
}
