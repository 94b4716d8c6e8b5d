//! Inverse-branch tracking for degree-two maps of the unit disk.
//!
//! A map `g` close to `z^2` covers the small circle
//! `gamma(phi) = e^{i phi} / (2 + eps)` twice. Continuing both preimages of
//! `gamma(0)` once around the loop either returns each branch to itself or
//! exchanges them. For `z^2` the branches exchange; a positive-Jacobian `g`
//! within a quarter of `z^2` would have to both exchange them (degree two
//! around the loop) and keep them apart (each in its own disk), which is the
//! contradiction [`falsify_quarter_bound`] looks for candidate by candidate.

use std::f64::consts::{PI, TAU};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::degree::{degree_oracle_with, NewtonConfig, Region};
use crate::error::{Error, Result};
use crate::geometry::{pt, Mat2, Point2};
use crate::maps::{ComplexPoly, SampledMap};

pub const DEFAULT_EPS_LOOP: f64 = 0.1;
pub const MIN_STEPS: usize = 256;
/// Residual `|g(y) - gamma(phi)|` every accepted step must reach.
pub const CONTINUATION_TOL: f64 = 1e-10;
/// A full loop counts as a swap (or as no swap) only when one matching
/// distance beats the other by this factor.
pub const SWAP_FACTOR: f64 = 10.0;
pub const SEED_GRID: usize = 256;
/// Branches closer than this have merged.
pub const COLLISION_RADIUS: f64 = 1e-6;
/// Step halvings allowed inside one loop step.
const MAX_HALVINGS: usize = 30;

/// `e^{i phi} / (2 + eps_loop)`.
pub fn loop_point(eps_loop: f64, phi: f64) -> Point2 {
    let r = 1.0 / (2.0 + eps_loop);
    pt(r * phi.cos(), r * phi.sin())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SupDistance {
    /// Largest sampled `|f - g|`: a lower bound for the true sup.
    pub value: f64,
    pub witness: Point2,
    pub grid: usize,
    pub samples: usize,
}

/// Max of `|f - g|` over the `grid x grid` lattice points of the region's
/// bounding box that lie in the closed region, plus the boundary vertices.
pub fn sup_distance(f: &dyn SampledMap, g: &dyn SampledMap, region: &Region, grid: usize) -> Result<SupDistance> {
    if grid < 2 {
        return Err(Error::InvalidArgument("grid needs at least 2 points per side".into()));
    }
    let points = region_samples(region, grid);
    let (value, witness) = points
        .par_iter()
        .map(|&p| (f.eval(p).dist(g.eval(p)), p))
        .collect::<Vec<_>>()
        .into_iter()
        .fold((0.0, points[0]), |acc, x| if x.0 > acc.0 { x } else { acc });
    Ok(SupDistance {
        value,
        witness,
        grid,
        samples: points.len(),
    })
}

fn region_samples(region: &Region, grid: usize) -> Vec<Point2> {
    let b = region.bbox();
    let step = |lo: f64, hi: f64, k: usize| lo + (hi - lo) * k as f64 / (grid - 1) as f64;
    let mut points: Vec<Point2> = (0..grid)
        .flat_map(|j| (0..grid).map(move |i| pt(step(b.min.x, b.max.x, i), step(b.min.y, b.max.y, j))))
        .filter(|&p| region.contains(p) != Some(false))
        .collect();
    points.extend_from_slice(region.boundary().points());
    points
}

fn unit_disk() -> Region {
    Region::disk(Point2::ORIGIN, 1.0, 512).expect("circle is simple")
}

/// Both inverse branches of `g` over the loop, sampled at `phi_k = 2 pi k / steps`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BranchTrack {
    pub eps_loop: f64,
    pub steps: usize,
    pub phi: Vec<f64>,
    pub y1: Vec<Point2>,
    pub y2: Vec<Point2>,
    /// `|y1 - y2|` at every sample.
    pub separation: Vec<f64>,
    pub tolerance: f64,
    pub max_residual: f64,
    /// Extra substeps caused by step halving.
    pub halvings: usize,
    /// `max |y1 + y2|`, zero for an odd-symmetric map such as `z^2`.
    pub antipodal_defect: f64,
    /// Samples where the two points do not sit one in each of the disks of
    /// radius 1/2 around `+-e^{i phi/2} / sqrt(2 + eps_loop)`.
    pub disk_violations: usize,
}

impl BranchTrack {
    pub fn min_separation(&self) -> f64 {
        self.separation.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// One Newton correction towards `target`, started from `y`.
fn newton_to(g: &dyn SampledMap, target: Point2, y: Point2) -> Option<Point2> {
    let step = g.jacobian(y)?.inverse()?.apply(g.eval(y) - target);
    let next = y - step;
    next.is_finite().then_some(next)
}

/// Moves a branch from `gamma(phi0)` to `gamma(phi1)`: Euler predictor
/// followed by Newton, accepted when the residual reaches the tolerance
/// and the corrector stays close to the predictor.
fn advance(g: &dyn SampledMap, y: Point2, target: Point2) -> Option<Point2> {
    let pred = newton_to(g, target, y)?;
    let mut x = pred;
    for _ in 0..12 {
        if g.eval(x).dist(target) < CONTINUATION_TOL {
            let jump = pred.dist(y);
            return (x.dist(pred) <= 0.25 * jump + CONTINUATION_TOL).then_some(x);
        }
        x = newton_to(g, target, x)?;
    }
    None
}

/// Continues `y` across one loop step, halving the step until `advance`
/// succeeds. Returns the new point and the number of substeps used.
fn continue_step(g: &dyn SampledMap, eps_loop: f64, y: Point2, phi0: f64, phi1: f64, step: usize) -> Result<(Point2, usize)> {
    let mut pieces = 1usize;
    'outer: for _ in 0..=MAX_HALVINGS {
        let mut x = y;
        for k in 1..=pieces {
            let phi = phi0 + (phi1 - phi0) * k as f64 / pieces as f64;
            match advance(g, x, loop_point(eps_loop, phi)) {
                Some(next) => x = next,
                None => {
                    pieces *= 2;
                    continue 'outer;
                }
            }
        }
        return Ok((x, pieces));
    }
    Err(Error::ContinuationStall { step })
}

/// Newton continuation of the two preimages of `gamma(0)` in the unit disk
/// around the loop, seeded by the regular-value degree oracle.
pub fn track_branches(g: &dyn SampledMap, eps_loop: f64, steps: usize) -> Result<BranchTrack> {
    if !(eps_loop > 0.0) {
        return Err(Error::InvalidArgument("eps_loop must be positive".into()));
    }
    if steps < MIN_STEPS {
        return Err(Error::InvalidArgument(format!("need at least {MIN_STEPS} steps")));
    }
    let newton = NewtonConfig {
        tolerance: 1e-11,
        ..NewtonConfig::default()
    };
    let seeds = degree_oracle_with(g, &unit_disk(), loop_point(eps_loop, 0.0), SEED_GRID, newton)?.preimages;
    if seeds.len() != 2 {
        return Err(Error::PreimageCount(seeds.len()));
    }
    let mut y = [seeds[0].point, seeds[1].point];
    let centre_radius = 1.0 / (2.0 + eps_loop).sqrt();
    let mut track = BranchTrack {
        eps_loop,
        steps,
        phi: vec![0.0],
        y1: vec![y[0]],
        y2: vec![y[1]],
        separation: vec![y[0].dist(y[1])],
        tolerance: CONTINUATION_TOL,
        max_residual: 0.0,
        halvings: 0,
        antipodal_defect: (y[0] + y[1]).norm(),
        disk_violations: 0,
    };
    for k in 1..=steps {
        let (phi0, phi1) = (TAU * (k - 1) as f64 / steps as f64, TAU * k as f64 / steps as f64);
        for (b, yb) in y.iter_mut().enumerate() {
            let (next, pieces) = continue_step(g, eps_loop, *yb, phi0, phi1, k)?;
            if next.norm() > 1.0 {
                return Err(Error::BranchEscape { branch: b + 1, step: k });
            }
            track.halvings += pieces - 1;
            *yb = next;
        }
        let separation = y[0].dist(y[1]);
        if separation < COLLISION_RADIUS {
            return Err(Error::BranchCollision { step: k, separation });
        }
        let target = loop_point(eps_loop, phi1);
        for yb in y {
            track.max_residual = track.max_residual.max(g.eval(yb).dist(target));
        }
        let c = pt(centre_radius * (0.5 * phi1).cos(), centre_radius * (0.5 * phi1).sin());
        let in_plus = |p: Point2| p.dist(c) < 0.5;
        let in_minus = |p: Point2| p.dist(-c) < 0.5;
        let one_each = (in_plus(y[0]) && in_minus(y[1])) || (in_minus(y[0]) && in_plus(y[1]));
        if !one_each {
            track.disk_violations += 1;
        }
        track.antipodal_defect = track.antipodal_defect.max((y[0] + y[1]).norm());
        track.phi.push(phi1);
        track.y1.push(y[0]);
        track.y2.push(y[1]);
        track.separation.push(separation);
    }
    Ok(track)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MonodromyReport {
    pub swapped: bool,
    /// Whether one matching distance beat the other by [`SWAP_FACTOR`];
    /// when false the swap call is `false` by default, not by evidence.
    pub decisive: bool,
    /// `|y1(2 pi) - y1(0)|`.
    pub distance_to_own_start: f64,
    /// `|y1(2 pi) - y2(0)|`.
    pub distance_to_other_start: f64,
    pub swap_factor: f64,
    pub eps_loop: f64,
    pub steps: usize,
    /// Sampled `||z^2 - g||` on the unit disk.
    pub sup_error: SupDistance,
    pub track: BranchTrack,
}

pub fn monodromy_check(g: &dyn SampledMap, eps_loop: f64, steps: usize) -> Result<MonodromyReport> {
    let track = track_branches(g, eps_loop, steps)?;
    let end = *track.y1.last().expect("track is nonempty");
    let own = end.dist(track.y1[0]);
    let other = end.dist(track.y2[0]);
    let swapped = SWAP_FACTOR * other <= own;
    let kept = SWAP_FACTOR * own <= other;
    Ok(MonodromyReport {
        swapped,
        decisive: swapped || kept,
        distance_to_own_start: own,
        distance_to_other_start: other,
        swap_factor: SWAP_FACTOR,
        eps_loop,
        steps,
        sup_error: sup_distance(&ComplexPoly::square(), g, &unit_disk(), 201)?,
        track,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FalsifyConfig {
    /// Lattice points per side over `[-1, 1]^2`; odd so the origin is sampled.
    pub grid: usize,
    /// Allowance for the sampled sup underestimating the true sup.
    pub slack: f64,
    pub eps_loop: f64,
    pub steps: usize,
}

impl Default for FalsifyConfig {
    fn default() -> Self {
        FalsifyConfig {
            grid: 201,
            slack: 0.02,
            eps_loop: DEFAULT_EPS_LOOP,
            steps: 512,
        }
    }
}

/// `det J_g` on the lattice points of the closed unit disk.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiskJacobianSamples {
    pub grid: usize,
    pub samples: usize,
    pub min_det: f64,
    pub min_at: Point2,
    pub all_positive: bool,
}

pub fn disk_jacobian_samples(g: &dyn SampledMap, grid: usize) -> Result<DiskJacobianSamples> {
    if grid < 2 {
        return Err(Error::InvalidArgument("grid needs at least 2 points per side".into()));
    }
    let points = region_samples(&unit_disk(), grid);
    let dets: Vec<f64> = points
        .par_iter()
        .map(|&p| g.jacobian(p).map(|j| j.det()).ok_or(Error::MissingJacobian))
        .collect::<Result<_>>()?;
    let (min_det, min_at) = dets
        .iter()
        .zip(&points)
        .fold((f64::INFINITY, points[0]), |acc, (&d, &p)| if d < acc.0 { (d, p) } else { acc });
    Ok(DiskJacobianSamples {
        grid,
        samples: points.len(),
        min_det,
        min_at,
        all_positive: min_det > 0.0,
    })
}

/// Which hypothesis of the quarter bound a candidate breaks, checked in
/// this order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum QuarterVerdict {
    /// Sampled `||z^2 - g|| >= 1/4 - slack`.
    SupErrorAtLeastQuarter { sup_error: f64 },
    /// Some sampled `det J_g <= 0`.
    NonpositiveJacobian { at: Point2, det: f64 },
    /// Both hypotheses hold on the samples yet the branches swap, so the
    /// samples missed a fold or a large error somewhere.
    MonodromyContradiction,
    /// Both hypotheses hold and the branches stay apart: would refute the bound.
    Counterexample,
    /// Both hypotheses hold on the samples but the branches could not be
    /// followed around the loop.
    TrackingFailed { error: String },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FalsifyReport {
    #[serde(flatten)]
    pub verdict: QuarterVerdict,
    pub sup_error: SupDistance,
    pub jacobian: DiskJacobianSamples,
    pub threshold: f64,
    /// Present whenever tracking succeeded, whatever the verdict.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub monodromy: Option<MonodromySummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tracking_error: Option<String>,
    pub config: FalsifyConfig,
}

impl FalsifyReport {
    /// The combination the bound forbids: small error, positive Jacobian
    /// samples, and branches that do not swap.
    pub fn is_counterexample(&self) -> bool {
        self.sup_error.value < 0.25
            && self.jacobian.all_positive
            && self.monodromy.as_ref().is_some_and(|m| !m.swapped)
    }
}

/// [`MonodromyReport`] without the tracks.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MonodromySummary {
    pub swapped: bool,
    pub decisive: bool,
    pub distance_to_own_start: f64,
    pub distance_to_other_start: f64,
    pub min_separation: f64,
    pub disk_violations: usize,
}

impl From<&MonodromyReport> for MonodromySummary {
    fn from(r: &MonodromyReport) -> Self {
        MonodromySummary {
            swapped: r.swapped,
            decisive: r.decisive,
            distance_to_own_start: r.distance_to_own_start,
            distance_to_other_start: r.distance_to_other_start,
            min_separation: r.track.min_separation(),
            disk_violations: r.track.disk_violations,
        }
    }
}

/// Checks one candidate against the hypotheses of the quarter bound for
/// `z^2` on the unit disk. Never proves the bound; it reports which
/// hypothesis the candidate breaks.
pub fn falsify_quarter_bound(g: &dyn SampledMap, cfg: &FalsifyConfig) -> Result<FalsifyReport> {
    let sup_error = sup_distance(&ComplexPoly::square(), g, &unit_disk(), cfg.grid)?;
    let jacobian = disk_jacobian_samples(g, cfg.grid)?;
    let threshold = 0.25 - cfg.slack;
    let (monodromy, tracking_error) = match monodromy_check(g, cfg.eps_loop, cfg.steps) {
        Ok(r) => (Some(MonodromySummary::from(&r)), None),
        Err(e) => (None, Some(e.to_string())),
    };
    let verdict = if sup_error.value >= threshold {
        QuarterVerdict::SupErrorAtLeastQuarter { sup_error: sup_error.value }
    } else if !jacobian.all_positive {
        QuarterVerdict::NonpositiveJacobian {
            at: jacobian.min_at,
            det: jacobian.min_det,
        }
    } else {
        match (&monodromy, &tracking_error) {
            (Some(m), _) if m.swapped => QuarterVerdict::MonodromyContradiction,
            (Some(_), _) => QuarterVerdict::Counterexample,
            (None, e) => QuarterVerdict::TrackingFailed {
                error: e.clone().unwrap_or_default(),
            },
        }
    };
    Ok(FalsifyReport {
        verdict,
        sup_error,
        jacobian,
        threshold,
        monodromy,
        tracking_error,
        config: *cfg,
    })
}

/// Two affine sheets: the half planes `Re z >= 0` and `Re z < 0` each map
/// onto a disk containing the loop, so the branches never meet.
#[derive(Clone, Copy, Debug, Default)]
pub struct DisjointSheets;

impl DisjointSheets {
    const SCALE: f64 = 1.5;
    const OFFSET: f64 = 0.5;
}

impl SampledMap for DisjointSheets {
    fn eval(&self, p: Point2) -> Point2 {
        let c = if p.x >= 0.0 { Self::OFFSET } else { -Self::OFFSET };
        pt(Self::SCALE * (p.x - c), Self::SCALE * p.y)
    }

    fn jacobian(&self, _p: Point2) -> Option<Mat2> {
        Some(Mat2::diag(Self::SCALE, Self::SCALE))
    }
}

/// Phase of `y` relative to the loop start, unwrapped along a track; a
/// branch of `z^2` turns by half a revolution over the loop.
pub fn unwrapped_turn(track: &[Point2]) -> f64 {
    let mut total = 0.0;
    for w in track.windows(2) {
        let d = w[1].y.atan2(w[1].x) - w[0].y.atan2(w[0].x);
        total += (d + PI).rem_euclid(TAU) - PI;
    }
    total / TAU
}
