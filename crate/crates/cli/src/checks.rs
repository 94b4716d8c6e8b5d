//! Seeded Monte Carlo checks. Seeds choose test points only; no geometric
//! construction depends on them.

use degree_forge::geometry::predicates::barycentric;
use degree_forge::geometry::{Point2, SimplicialComplex};
use degree_forge::maps::SampledMap;
use degree_forge::pl_approx::PLMap;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Uniform point of a triangle, strictly inside up to rounding.
fn point_in(rng: &mut ChaCha8Rng, [a, b, c]: [Point2; 3]) -> Point2 {
    let (mut u, mut v): (f64, f64) = (rng.gen(), rng.gen());
    if u + v > 1.0 {
        (u, v) = (1.0 - u, 1.0 - v);
    }
    a + (b - a) * u + (c - a) * v
}

/// `n` points uniform on `|K|` (area-weighted triangle choice).
pub fn random_points(c: &SimplicialComplex, n: usize, seed: u64) -> Vec<Point2> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cumulative = Vec::with_capacity(c.num_triangles());
    let mut total = 0.0;
    for t in 0..c.num_triangles() {
        total += c.signed_area(t).abs();
        cumulative.push(total);
    }
    (0..n)
        .map(|_| {
            let r = rng.gen::<f64>() * total;
            let t = cumulative.partition_point(|&s| s < r).min(c.num_triangles() - 1);
            point_in(&mut rng, c.triangle_points(t))
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampledError {
    pub max: f64,
    pub witness: Point2,
    pub samples: usize,
    pub seed: u64,
}

/// `max |f - g|` over seeded random points of `|K|`.
pub fn sampled_error(f: &dyn SampledMap, g: &dyn SampledMap, c: &SimplicialComplex, n: usize, seed: u64) -> SampledError {
    let points = random_points(c, n, seed);
    let (max, witness) = points
        .iter()
        .map(|&p| (f.eval(p).dist(g.eval(p)), p))
        .fold((0.0, points[0]), |acc, x| if x.0 > acc.0 { x } else { acc });
    SampledError {
        max,
        witness,
        samples: n,
        seed,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CollisionReport {
    pub samples: usize,
    pub seed: u64,
    pub violations: usize,
    /// `(x, y)` with `x != y` in adjacent triangles and `h(x) = h(y)`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<(Point2, Point2)>,
}

/// Brute-force injectivity probe on adjacent triangles: for a random point
/// `x` of a triangle `t` and a random triangle `t'` sharing a vertex with
/// `t`, solves `h|t'(y) = h(x)` and reports a collision when `y` lies
/// strictly inside `t'`.
pub fn collision_sampling(h: &PLMap, samples: usize, seed: u64) -> CollisionReport {
    let c = h.complex();
    let mut star: Vec<Vec<usize>> = vec![Vec::new(); c.num_vertices()];
    for (t, tri) in c.triangles().iter().enumerate() {
        for &v in &tri.0 {
            star[v].push(t);
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = CollisionReport {
        samples,
        seed,
        violations: 0,
        witness: None,
    };
    let inverses: Vec<_> = (0..c.num_triangles()).map(|t| h.affine(t).linear.inverse()).collect();
    for _ in 0..samples {
        let t = rng.gen_range(0..c.num_triangles());
        let v = c.triangles()[t].0[rng.gen_range(0..3)];
        let others: Vec<usize> = star[v].iter().copied().filter(|&s| s != t).collect();
        if others.is_empty() {
            continue;
        }
        let s = others[rng.gen_range(0..others.len())];
        let x = point_in(&mut rng, c.triangle_points(t));
        let q = h.affine(t).apply(x);
        let Some(inv) = inverses[s] else { continue };
        let y = inv.apply(q - h.affine(s).offset);
        let [a, b, cc] = c.triangle_points(s);
        let inside = barycentric(a, b, cc, y).iter().all(|&l| l > 1e-12);
        if inside && y.dist(x) > 1e-12 {
            report.violations += 1;
            report.witness.get_or_insert((x, y));
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use degree_forge::geometry::meshes::square_grid;
    use degree_forge::geometry::pt;
    use degree_forge::maps::Identity;

    #[test]
    fn random_points_are_seeded_and_inside() {
        let c = square_grid(pt(0.0, 0.0), pt(1.0, 1.0), 3).unwrap();
        let a = random_points(&c, 100, 7);
        assert_eq!(a, random_points(&c, 100, 7));
        assert_ne!(a, random_points(&c, 100, 8));
        assert!(a.iter().all(|p| (0.0..=1.0).contains(&p.x) && (0.0..=1.0).contains(&p.y)));
    }

    #[test]
    fn identity_has_no_collisions_and_a_fold_does() {
        let c = square_grid(pt(0.0, 0.0), pt(1.0, 1.0), 4).unwrap();
        let h = PLMap::interpolate(&Identity, c.clone()).unwrap();
        assert_eq!(collision_sampling(&h, 10_000, 1).violations, 0);
        // push the centre vertex across its star
        let mut images = c.vertices().to_vec();
        let centre = images.iter().position(|&v| v == pt(0.5, 0.5)).unwrap();
        images[centre] = pt(0.85, 0.5);
        let folded = PLMap::new(c, images).unwrap();
        let r = collision_sampling(&folded, 10_000, 1);
        assert!(r.violations > 0);
        let (x, y) = r.witness.unwrap();
        assert!(folded.eval(x).dist(folded.eval(y)) < 1e-12);
    }
}
