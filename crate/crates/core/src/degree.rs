//! Brouwer degree of planar maps.
//!
//! The degree of `f` on a region `U` at a target `p` is the winding number of
//! the closed curve `f(dU)` around `p`. [`brouwer_degree`] samples the
//! boundary image, doubling the sample count until the winding number is
//! stable and consecutive image samples are closer than the estimated
//! clearance `d(p, f(dU))`; a perturbation smaller than half the clearance
//! cannot change the degree, which is what makes the discretization sound.
//!
//! [`degree_oracle_regular`] is an independent route: it locates preimages
//! by grid seeding and Newton polishing and sums Jacobian signs.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::predicates::{on_segment, orient2d, point_polyline_distance};
use crate::geometry::{BBox, ClosedPolyline, Point2};
use crate::maps::SampledMap;

/// Exact winding number of `curve` around `p` by signed crossing counting.
pub fn winding_number(curve: &ClosedPolyline, p: Point2) -> Result<i32> {
    winding_of_points(curve.points(), p)
}

fn winding_of_points(points: &[Point2], p: Point2) -> Result<i32> {
    let n = points.len();
    let mut w = 0;
    for i in 0..n {
        let a = points[i];
        let b = points[(i + 1) % n];
        if on_segment(a, b, p) {
            return Err(Error::PointOnCurve { point: p, segment: i });
        }
        if a.y <= p.y {
            if b.y > p.y && orient2d(a, b, p) > 0.0 {
                w += 1;
            }
        } else if b.y <= p.y && orient2d(a, b, p) < 0.0 {
            w -= 1;
        }
    }
    Ok(w)
}

/// A bounded open set given by its simple, counterclockwise boundary.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Region {
    boundary: ClosedPolyline,
}

impl Region {
    /// Checks simplicity and normalizes the boundary to counterclockwise.
    pub fn new(boundary: ClosedPolyline) -> Result<Self> {
        if let Some((i, j)) = boundary.first_self_intersection() {
            return Err(Error::NonSimpleBoundary(i, j));
        }
        let boundary = if boundary.orientation_sign() < 0 {
            boundary.reversed()
        } else {
            boundary
        };
        Ok(Region { boundary })
    }

    /// Polygonal disk with `segments` sides.
    pub fn disk(center: Point2, radius: f64, segments: usize) -> Result<Self> {
        Self::new(ClosedPolyline::circle(center, radius, segments)?)
    }

    pub fn boundary(&self) -> &ClosedPolyline {
        &self.boundary
    }

    pub fn bbox(&self) -> BBox {
        self.boundary.bbox()
    }

    /// Strictly inside (exact); `None` on the boundary.
    pub fn contains(&self, p: Point2) -> Option<bool> {
        winding_number(&self.boundary, p).ok().map(|w| w != 0)
    }
}

impl<'de> Deserialize<'de> for Region {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Boundary {
                boundary: ClosedPolyline,
            },
            Disk {
                center: Point2,
                radius: f64,
                #[serde(default = "default_segments")]
                segments: usize,
            },
        }
        fn default_segments() -> usize {
            1024
        }
        let r = match Repr::deserialize(d)? {
            Repr::Boundary { boundary } => Region::new(boundary),
            Repr::Disk {
                center,
                radius,
                segments,
            } => Region::disk(center, radius, segments),
        };
        r.map_err(serde::de::Error::custom)
    }
}

/// Boundary sampling schedule: start count and cap for the doubling search.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DegreeSampling {
    pub initial_samples: usize,
    pub max_samples: usize,
}

impl Default for DegreeSampling {
    fn default() -> Self {
        DegreeSampling {
            initial_samples: 64,
            max_samples: 1 << 20,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DegreeReport {
    pub degree: i32,
    pub target: Point2,
    /// Estimated `d(p, f(dU))`: nearest sampled image minus half the largest
    /// gap between consecutive image samples.
    pub boundary_clearance: f64,
    /// Number of doublings past the initial sample count.
    pub refinement_level: u32,
    pub boundary_samples: usize,
    pub min_sample_distance: f64,
    pub max_sample_gap: f64,
}

struct LevelStats {
    winding: Option<i32>,
    min_dist: f64,
    max_gap: f64,
}

fn level_stats(f: &dyn SampledMap, u: &Region, p: Point2, n: usize) -> LevelStats {
    let samples = u.boundary().sample_uniform(n);
    let mut imgs: Vec<Point2> = if n >= 4096 {
        samples.par_iter().map(|&x| f.eval(x)).collect()
    } else {
        samples.iter().map(|&x| f.eval(x)).collect()
    };
    let min_dist = imgs.iter().map(|q| q.dist(p)).fold(f64::INFINITY, f64::min);
    let max_gap = (0..imgs.len())
        .map(|i| imgs[i].dist(imgs[(i + 1) % imgs.len()]))
        .fold(0.0, f64::max);
    imgs.dedup();
    while imgs.len() > 1 && imgs.first() == imgs.last() {
        imgs.pop();
    }
    let winding = if imgs.len() < 3 {
        None
    } else {
        winding_of_points(&imgs, p).ok()
    };
    LevelStats {
        winding,
        min_dist,
        max_gap,
    }
}

/// Degree of `f` on `u` at `p` with the default sampling schedule.
pub fn brouwer_degree(f: &dyn SampledMap, u: &Region, p: Point2) -> Result<DegreeReport> {
    brouwer_degree_with(f, u, p, DegreeSampling::default())
}

pub fn brouwer_degree_with(
    f: &dyn SampledMap,
    u: &Region,
    p: Point2,
    sampling: DegreeSampling,
) -> Result<DegreeReport> {
    let mut n = sampling.initial_samples.max(8);
    let mut level = 0u32;
    let mut previous: Option<i32> = None;
    let mut last = None;
    while n <= sampling.max_samples {
        let s = level_stats(f, u, p, n);
        let stable = s.winding.is_some() && s.winding == previous;
        if stable && s.max_gap < s.min_dist {
            return Ok(DegreeReport {
                degree: s.winding.unwrap(),
                target: p,
                boundary_clearance: s.min_dist - 0.5 * s.max_gap,
                refinement_level: level,
                boundary_samples: n,
                min_sample_distance: s.min_dist,
                max_sample_gap: s.max_gap,
            });
        }
        previous = s.winding;
        last = Some(s);
        n *= 2;
        level += 1;
    }
    let clearance = last.map(|s| s.min_dist - 0.5 * s.max_gap).unwrap_or(0.0);
    Err(Error::ClearanceTooSmall {
        clearance,
        samples: sampling.max_samples,
    })
}

/// Newton polishing parameters of the regular-value oracle.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NewtonConfig {
    pub max_iterations: usize,
    /// Residual `|f(x) - p|` accepted as converged.
    pub tolerance: f64,
    /// Preimages closer than this are the same point.
    pub dedup_radius: f64,
    /// Smallest admissible `|det J|` at a preimage.
    pub jacobian_floor: f64,
}

impl Default for NewtonConfig {
    fn default() -> Self {
        NewtonConfig {
            max_iterations: 50,
            tolerance: 1e-12,
            dedup_radius: 1e-8,
            jacobian_floor: 1e-9,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Preimage {
    pub point: Point2,
    pub jacobian_det: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    pub degree: i32,
    pub preimages: Vec<Preimage>,
    pub grid: usize,
    pub newton: NewtonConfig,
}

/// Newton iteration for `f(x) = p` from `x0`.
pub fn newton_solve(f: &dyn SampledMap, p: Point2, x0: Point2, cfg: &NewtonConfig) -> Option<Point2> {
    let mut x = x0;
    for _ in 0..cfg.max_iterations {
        let r = f.eval(x) - p;
        if r.norm() < cfg.tolerance {
            return Some(x);
        }
        let j = f.jacobian(x)?;
        let step = j.inverse()?.apply(r);
        if !step.is_finite() {
            return None;
        }
        x = x - step;
    }
    ((f.eval(x) - p).norm() < cfg.tolerance).then_some(x)
}

/// Finds the preimages of `p` in the cells of a `grid x grid` lattice over
/// `bbox` whose corner images could reach `p`, polished by Newton.
pub fn find_preimages(
    f: &dyn SampledMap,
    bbox: BBox,
    p: Point2,
    grid: usize,
    cfg: &NewtonConfig,
) -> Result<Vec<Point2>> {
    if grid == 0 {
        return Err(Error::InvalidArgument("grid must be positive".into()));
    }
    if f.jacobian(bbox.min).is_none() {
        return Err(Error::MissingJacobian);
    }
    let hx = bbox.width() / grid as f64;
    let hy = bbox.height() / grid as f64;
    let node = |i: usize, j: usize| Point2 {
        x: bbox.min.x + hx * i as f64,
        y: bbox.min.y + hy * j as f64,
    };
    let values: Vec<Point2> = (0..=grid)
        .into_par_iter()
        .flat_map_iter(|j| (0..=grid).map(move |i| f.eval(node(i, j))).collect::<Vec<_>>())
        .collect();
    let value = |i: usize, j: usize| values[j * (grid + 1) + i];
    let mut found: Vec<Point2> = (0..grid)
        .into_par_iter()
        .flat_map_iter(|j| {
            let mut local = Vec::new();
            for i in 0..grid {
                let corners = [value(i, j), value(i + 1, j), value(i + 1, j + 1), value(i, j + 1)];
                let b = BBox::of(corners);
                let spread = b.diagonal();
                if !b.inflate(spread).overlaps(&BBox::of([p])) {
                    continue;
                }
                let seed = Point2 {
                    x: bbox.min.x + hx * (i as f64 + 0.5),
                    y: bbox.min.y + hy * (j as f64 + 0.5),
                };
                if let Some(x) = newton_solve(f, p, seed, cfg) {
                    local.push(x);
                }
            }
            local
        })
        .collect();
    found.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
    let mut unique: Vec<Point2> = Vec::new();
    for x in found {
        if unique.iter().all(|u| u.dist(x) > cfg.dedup_radius) {
            unique.push(x);
        }
    }
    Ok(unique)
}

/// Degree as the sum of Jacobian signs over preimages (regular values only).
pub fn degree_oracle_regular(
    f: &dyn SampledMap,
    u: &Region,
    p: Point2,
    grid: usize,
) -> Result<OracleReport> {
    degree_oracle_with(f, u, p, grid, NewtonConfig::default())
}

pub fn degree_oracle_with(
    f: &dyn SampledMap,
    u: &Region,
    p: Point2,
    grid: usize,
    cfg: NewtonConfig,
) -> Result<OracleReport> {
    let bbox = u.bbox();
    let pad = 1e-3 * bbox.diagonal();
    let candidates = find_preimages(f, bbox.inflate(pad), p, grid, &cfg)?;
    let mut preimages = Vec::new();
    let mut degree = 0;
    for x in candidates {
        let boundary_dist = point_polyline_distance(x, u.boundary().points())
            .min(x.dist(u.boundary().points()[0]));
        let inside = match u.contains(x) {
            None => return Err(Error::PreimageOnBoundary(x)),
            Some(b) => b,
        };
        if boundary_dist < cfg.dedup_radius {
            return Err(Error::PreimageOnBoundary(x));
        }
        if !inside {
            continue;
        }
        let det = f.jacobian(x).ok_or(Error::MissingJacobian)?.det();
        if det.abs() < cfg.jacobian_floor {
            return Err(Error::NotRegular { point: x, jacobian: det });
        }
        degree += if det > 0.0 { 1 } else { -1 };
        preimages.push(Preimage {
            point: x,
            jacobian_det: det,
        });
    }
    Ok(OracleReport {
        degree,
        preimages,
        grid,
        newton: cfg,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Property1Verdict {
    Consistent,
    Violated {
        region: usize,
        target: Point2,
        degree: i32,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegionDegree {
    pub region: usize,
    pub report: DegreeReport,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Property1Report {
    pub reports: Vec<RegionDegree>,
    pub verdict: Property1Verdict,
    /// `Consistent` covers only the supplied regions and targets.
    pub scope: String,
}

/// Falsifier for the nonnegative-degree condition over a finite family of
/// regions and targets. The first negative degree is the witness.
pub fn property1_check(
    f: &dyn SampledMap,
    regions: &[Region],
    targets: &[Vec<Point2>],
) -> Result<Property1Report> {
    if regions.len() != targets.len() {
        return Err(Error::InvalidArgument("one target list per region".into()));
    }
    let mut reports = Vec::new();
    let mut verdict = Property1Verdict::Consistent;
    for (ri, (u, ts)) in regions.iter().zip(targets).enumerate() {
        for &p in ts {
            let report = brouwer_degree(f, u, p)?;
            if report.degree < 0 && verdict == Property1Verdict::Consistent {
                verdict = Property1Verdict::Violated {
                    region: ri,
                    target: p,
                    degree: report.degree,
                };
            }
            reports.push(RegionDegree { region: ri, report });
        }
    }
    Ok(Property1Report {
        reports,
        verdict,
        scope: format!(
            "sampled family only: {} regions, {} targets",
            regions.len(),
            targets.iter().map(Vec::len).sum::<usize>()
        ),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::pt;
    use crate::maps::{ComplexPoly, Identity};

    fn unit_disk() -> Region {
        Region::disk(Point2::ORIGIN, 1.0, 1024).unwrap()
    }

    #[test]
    fn winding_of_circle() {
        let c = ClosedPolyline::circle(Point2::ORIGIN, 1.0, 64).unwrap();
        assert_eq!(winding_number(&c, Point2::ORIGIN).unwrap(), 1);
        assert_eq!(winding_number(&c, pt(3.0, 0.0)).unwrap(), 0);
        assert_eq!(winding_number(&c.reversed(), Point2::ORIGIN).unwrap(), -1);
    }

    #[test]
    fn winding_of_squared_circle() {
        let c = ClosedPolyline::circle(Point2::ORIGIN, 1.0, 64).unwrap();
        let sq = ComplexPoly::square();
        let img = ClosedPolyline::new(c.points().iter().map(|&p| sq.eval(p)).collect()).unwrap();
        assert_eq!(winding_number(&img, Point2::ORIGIN).unwrap(), 2);
    }

    #[test]
    fn point_on_curve_rejected() {
        let c = ClosedPolyline::new(vec![pt(0., 0.), pt(1., 0.), pt(0., 1.)]).unwrap();
        assert!(matches!(winding_number(&c, pt(0.5, 0.0)), Err(Error::PointOnCurve { .. })));
        assert!(matches!(winding_number(&c, pt(0.0, 0.0)), Err(Error::PointOnCurve { .. })));
    }

    #[test]
    fn degree_examples() {
        let u = unit_disk();
        assert_eq!(brouwer_degree(&Identity, &u, Point2::ORIGIN).unwrap().degree, 1);
        assert_eq!(brouwer_degree(&ComplexPoly::square(), &u, pt(0.3, 0.0)).unwrap().degree, 2);
        assert_eq!(brouwer_degree(&ComplexPoly::conj(), &u, Point2::ORIGIN).unwrap().degree, -1);
        assert_eq!(brouwer_degree(&ComplexPoly::square(), &u, pt(2.0, 0.5)).unwrap().degree, 0);
    }

    #[test]
    fn target_on_boundary_image_is_rejected() {
        let u = Region::disk(Point2::ORIGIN, 1.0, 256).unwrap();
        let r = brouwer_degree_with(
            &Identity,
            &u,
            pt(1.0, 0.0),
            DegreeSampling {
                initial_samples: 64,
                max_samples: 1 << 12,
            },
        );
        assert!(matches!(r, Err(Error::ClearanceTooSmall { .. })));
    }

    #[test]
    fn report_clearance_is_positive() {
        let r = brouwer_degree(&ComplexPoly::square(), &unit_disk(), pt(0.1, 0.1)).unwrap();
        assert!(r.boundary_clearance > 0.8 && r.boundary_clearance <= r.min_sample_distance);
    }

    #[test]
    fn oracle_examples() {
        let u = unit_disk();
        assert_eq!(degree_oracle_regular(&Identity, &u, pt(0.2, 0.1), 64).unwrap().degree, 1);
        let r = degree_oracle_regular(&ComplexPoly::square(), &u, pt(0.25, 0.0), 256).unwrap();
        assert_eq!(r.degree, 2);
        let mut xs: Vec<f64> = r.preimages.iter().map(|p| p.point.x).collect();
        xs.sort_by(f64::total_cmp);
        assert!((xs[0] + 0.5).abs() < 1e-12 && (xs[1] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn oracle_finds_all_cube_roots() {
        let r = degree_oracle_regular(&ComplexPoly::cube(), &unit_disk(), pt(0.1, 0.0), 256).unwrap();
        assert_eq!(r.degree, 3);
        // analytic roots 0.1^(1/3) e^{2 pi i k / 3}
        let rho = 0.1f64.cbrt();
        for k in 0..3 {
            let a = std::f64::consts::TAU * k as f64 / 3.0;
            let root = pt(rho * a.cos(), rho * a.sin());
            assert!(r.preimages.iter().any(|p| p.point.dist(root) < 1e-10), "missing root {k}");
        }
    }

    #[test]
    fn oracle_rejects_critical_value() {
        let r = degree_oracle_regular(&ComplexPoly::square(), &unit_disk(), Point2::ORIGIN, 64);
        assert!(matches!(r, Err(Error::NotRegular { .. })));
    }

    #[test]
    fn region_rejects_bowtie() {
        let c = ClosedPolyline::new(vec![pt(0., 0.), pt(1., 1.), pt(1., 0.), pt(0., 1.)]).unwrap();
        assert!(matches!(Region::new(c), Err(Error::NonSimpleBoundary(..))));
    }

    #[test]
    fn region_json_forms() {
        let r: Region = serde_json::from_str(r#"{"center": [0, 0], "radius": 1.0, "segments": 32}"#).unwrap();
        assert_eq!(r.boundary().len(), 32);
        let r: Region = serde_json::from_str(r#"{"boundary": [[0,0],[0,1],[1,0]]}"#).unwrap();
        assert_eq!(r.boundary().orientation_sign(), 1);
    }

    #[test]
    fn property1_examples() {
        let u = unit_disk();
        let r = property1_check(&ComplexPoly::conj(), std::slice::from_ref(&u), &[vec![Point2::ORIGIN]]).unwrap();
        assert_eq!(
            r.verdict,
            Property1Verdict::Violated {
                region: 0,
                target: Point2::ORIGIN,
                degree: -1
            }
        );
        let r = property1_check(&Identity, &[u], &[vec![pt(0.1, 0.2), pt(1.5, 0.0)]]).unwrap();
        assert_eq!(r.verdict, Property1Verdict::Consistent);
        assert!(r.reports.iter().all(|d| d.report.degree == 0 || d.report.degree == 1));
    }
}
