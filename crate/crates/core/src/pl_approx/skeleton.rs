//! Broken-line approximation of a map on a 1-skeleton.
//!
//! Every vertex `v_i` gets a disk `N_i` about `w_i = f(v_i)` whose radius
//! `eps_i` keeps it away from the images of nearby vertices and edges. On
//! each edge the image arc is traced out of `N_a` and into `N_b`, replaced by
//! a simplified broken line `B'` and closed off with radial segments to the
//! centres: `B'' = w_a y ∪ B' ∪ y' w_b`. The broken line is carried with
//! the edge parameter, so `g(v_a + t (v_b - v_a))` is the point of `B''` at
//! time `t` and the error `|f - g|` is measured pointwise along the edge.
//!
//! Disjointness of broken lines of edges within combinatorial distance `d`
//! is checked with exact predicates. Finally each line is replaced by the
//! straight chord `w_a w_b` whenever that keeps every check green, so maps
//! that are already fine enough come out with straight edges.

use std::collections::HashSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::predicates::{point_segment_distance, segment_contact, SegmentContact};
use crate::geometry::{edge_key, BBox, Point2, SimplicialComplex};
use crate::maps::SampledMap;

/// A 1-complex: vertices and undirected edges `(a, b)` with `a < b`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Skeleton {
    vertices: Vec<Point2>,
    edges: Vec<(usize, usize)>,
    #[serde(skip)]
    incident: Vec<Vec<usize>>,
}

impl Skeleton {
    pub fn new(vertices: Vec<Point2>, edges: Vec<(usize, usize)>) -> Result<Self> {
        let mut seen = HashSet::new();
        let mut canon = Vec::with_capacity(edges.len());
        for (i, &(a, b)) in edges.iter().enumerate() {
            if a == b || a >= vertices.len() || b >= vertices.len() {
                return Err(Error::InvalidComplex(format!("bad skeleton edge {i}: ({a}, {b})")));
            }
            if vertices[a] == vertices[b] {
                return Err(Error::InvalidComplex(format!("skeleton edge {i} has zero length")));
            }
            let k = edge_key(a, b);
            if !seen.insert(k) {
                return Err(Error::InvalidComplex(format!("duplicate skeleton edge {i}")));
            }
            canon.push(k);
        }
        let mut incident = vec![Vec::new(); vertices.len()];
        for (e, &(a, b)) in canon.iter().enumerate() {
            incident[a].push(e);
            incident[b].push(e);
        }
        Ok(Skeleton {
            vertices,
            edges: canon,
            incident,
        })
    }

    /// The 1-skeleton of a complex, with the complex's edge numbering.
    pub fn from_complex(c: &SimplicialComplex) -> Self {
        Self::new(c.vertices().to_vec(), c.edges().iter().map(|e| (e.a, e.b)).collect())
            .expect("complex edges form a valid skeleton")
    }

    /// Path through the points in order.
    pub fn path(points: Vec<Point2>) -> Result<Self> {
        let edges = (1..points.len()).map(|i| (i - 1, i)).collect();
        Self::new(points, edges)
    }

    pub fn vertices(&self) -> &[Point2] {
        &self.vertices
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn incident(&self, v: usize) -> &[usize] {
        &self.incident[v]
    }

    pub fn edge_point(&self, e: usize, t: f64) -> Point2 {
        let (a, b) = self.edges[e];
        self.vertices[a].lerp(self.vertices[b], t)
    }

    /// Sorted `(vertex, distance)` pairs within `depth` edges of `src`.
    pub fn within(&self, src: usize, depth: usize) -> Vec<(usize, usize)> {
        let mut marks = vec![usize::MAX; self.vertices.len()];
        self.within_marked(src, depth, &mut marks)
    }

    /// `within` for every vertex.
    pub fn all_within(&self, depth: usize) -> Vec<Vec<(usize, usize)>> {
        let nv = self.vertices.len();
        (0..nv)
            .into_par_iter()
            .map_init(|| vec![usize::MAX; nv], |marks, v| self.within_marked(v, depth, marks))
            .collect()
    }

    /// BFS using `marks[w] == src` as the visited set, so one scratch buffer
    /// serves many sources.
    fn within_marked(&self, src: usize, depth: usize, marks: &mut [usize]) -> Vec<(usize, usize)> {
        let mut out = vec![(src, 0usize)];
        marks[src] = src;
        let mut start = 0;
        for dist in 1..=depth {
            let end = out.len();
            for k in start..end {
                let u = out[k].0;
                for &e in &self.incident[u] {
                    let (a, b) = self.edges[e];
                    let w = if a == u { b } else { a };
                    if marks[w] != src {
                        marks[w] = src;
                        out.push((w, dist));
                    }
                }
            }
            start = end;
        }
        out.sort_unstable();
        out
    }
}

impl<'de> Deserialize<'de> for Skeleton {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Repr {
            vertices: Vec<Point2>,
            edges: Vec<(usize, usize)>,
        }
        let r = Repr::deserialize(d)?;
        Skeleton::new(r.vertices, r.edges).map_err(serde::de::Error::custom)
    }
}

/// A polygonal path carried by the edge parameter `t` in `[0, 1]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BrokenLine {
    pub points: Vec<Point2>,
    /// Strictly increasing, from 0 to 1.
    pub times: Vec<f64>,
}

impl BrokenLine {
    pub fn straight(a: Point2, b: Point2) -> Self {
        BrokenLine {
            points: vec![a, b],
            times: vec![0.0, 1.0],
        }
    }

    pub fn is_straight(&self) -> bool {
        self.points.len() == 2
    }

    pub fn eval(&self, t: f64) -> Point2 {
        let k = match self.times.partition_point(|&s| s <= t) {
            0 => 0,
            k if k >= self.times.len() => self.times.len() - 2,
            k => k - 1,
        };
        let (t0, t1) = (self.times[k], self.times[k + 1]);
        let u = ((t - t0) / (t1 - t0)).clamp(0.0, 1.0);
        self.points[k].lerp(self.points[k + 1], u)
    }

    pub fn bbox(&self) -> BBox {
        BBox::of(self.points.iter().copied())
    }

    pub fn reversed(&self) -> BrokenLine {
        BrokenLine {
            points: self.points.iter().rev().copied().collect(),
            times: self.times.iter().rev().map(|t| 1.0 - t).collect(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SkeletonConfig {
    /// Initial samples per edge for arc tracing; doubled on ambiguity.
    pub arc_samples: usize,
    pub max_arc_samples: usize,
    /// Samples per edge for the final `|f - g|` check.
    pub error_samples: usize,
    /// Rounds of tolerance halving for edges failing the exact checks.
    pub max_repairs: usize,
    pub straighten: bool,
}

impl Default for SkeletonConfig {
    fn default() -> Self {
        SkeletonConfig {
            arc_samples: 1 << 12,
            max_arc_samples: 1 << 16,
            error_samples: 1000,
            max_repairs: 24,
            straighten: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SkeletonApproximation {
    pub skeleton: Skeleton,
    pub d: usize,
    pub eps: f64,
    pub vertex_images: Vec<Point2>,
    /// One broken line per skeleton edge, oriented from the lower vertex.
    pub lines: Vec<BrokenLine>,
    /// Neighbourhood radii `eps_i`.
    pub radii: Vec<f64>,
    /// Largest arc sample count used on any edge.
    pub arc_samples: usize,
    pub error_samples: usize,
    pub max_sampled_error: f64,
    pub straight_edges: usize,
    /// Broken-line pairs tested for disjointness.
    pub checked_pairs: usize,
}

impl SkeletonApproximation {
    /// `g` on edge `e` at parameter `t`.
    pub fn eval_edge(&self, e: usize, t: f64) -> Point2 {
        self.lines[e].eval(t)
    }
}

/// Sampled image of an edge: `arc[k] = f(v_a + k/(n-1) (v_b - v_a))`.
struct Arc {
    points: Vec<Point2>,
    max_gap: f64,
    bbox: BBox,
}

impl Arc {
    fn sample(f: &dyn SampledMap, sk: &Skeleton, e: usize, n: usize) -> Arc {
        let points: Vec<Point2> = (0..n)
            .map(|k| f.eval(sk.edge_point(e, k as f64 / (n - 1) as f64)))
            .collect();
        let max_gap = points.windows(2).map(|w| w[0].dist(w[1])).fold(0.0, f64::max);
        let bbox = BBox::of(points.iter().copied());
        Arc { points, max_gap, bbox }
    }

    fn time(&self, k: usize) -> f64 {
        k as f64 / (self.points.len() - 1) as f64
    }

    fn distance(&self, p: Point2) -> f64 {
        self.points
            .windows(2)
            .map(|w| point_segment_distance(p, w[0], w[1]))
            .fold(f64::INFINITY, f64::min)
    }
}

/// Context shared by all per-edge steps.
struct Setup<'a> {
    sk: &'a Skeleton,
    eps: f64,
    w: Vec<Point2>,
    /// Sorted neighbourhoods `within(v, d)`.
    near: Vec<Vec<(usize, usize)>>,
}

impl Setup<'_> {
    /// Edges whose both endpoints are within `d` of both endpoints of `e`.
    fn candidate_edges(&self, e: usize) -> Vec<usize> {
        let (a, b) = self.sk.edges[e];
        let common = sorted_intersection(&self.near[a], &self.near[b]);
        let mut out = self.edges_inside(&common);
        out.retain(|&e2| e2 != e);
        out
    }

    /// Edges with both endpoints within `d` of `v`.
    fn edges_around(&self, v: usize) -> Vec<usize> {
        let set: Vec<usize> = self.near[v].iter().map(|&(u, _)| u).collect();
        self.edges_inside(&set)
    }

    /// Edges with both endpoints in the sorted vertex set.
    fn edges_inside(&self, set: &[usize]) -> Vec<usize> {
        let mut out = Vec::new();
        for &u in set {
            for &e in &self.sk.incident[u] {
                let (a, b) = self.sk.edges[e];
                let w = if a == u { b } else { a };
                if w > u && set.binary_search(&w).is_ok() {
                    out.push(e);
                }
            }
        }
        out.sort_unstable();
        out
    }
}

fn sorted_intersection(x: &[(usize, usize)], y: &[(usize, usize)]) -> Vec<usize> {
    let (mut i, mut j) = (0, 0);
    let mut out = Vec::new();
    while i < x.len() && j < y.len() {
        match x[i].0.cmp(&y[j].0) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                out.push(x[i].0);
                i += 1;
                j += 1;
            }
        }
    }
    out
}

/// Radius `eps_i` at vertex `i` from the current arc samples.
fn neighborhood_radius(s: &Setup, arcs: &[Arc], i: usize) -> Result<f64> {
    let wi = s.w[i];
    let mut r = s.eps / 9.0;
    for &(j, dist) in &s.near[i] {
        if dist == 0 {
            continue;
        }
        let sep = wi.dist(s.w[j]);
        if sep == 0.0 {
            return Err(Error::NeighborhoodCondition {
                vertex: i,
                detail: format!("f(v_{i}) = f(v_{j}) at combinatorial distance {dist}"),
            });
        }
        r = r.min(0.45 * sep);
    }
    for e in s.edges_around(i) {
        let (a, b) = s.sk.edges[e];
        let arc = &arcs[e];
        if arc.bbox.distance(wi) - 0.5 * arc.max_gap >= r / 0.9 {
            continue;
        }
        let clearance = if a != i && b != i {
            arc.distance(wi)
        } else {
            // own edge: the arc must not come back once it has left the
            // eps/6 ball, so only that far part constrains the radius
            let n = arc.points.len();
            let at = |k: usize| if a == i { arc.points[k] } else { arc.points[n - 1 - k] };
            match (0..n).find(|&k| at(k).dist(wi) > s.eps / 6.0) {
                Some(k) if k + 1 == n => at(k).dist(wi),
                Some(k) => (k..n - 1)
                    .map(|j| point_segment_distance(wi, at(j), at(j + 1)))
                    .fold(f64::INFINITY, f64::min),
                None => f64::INFINITY,
            }
        };
        r = r.min(0.9 * (clearance - 0.5 * arc.max_gap));
    }
    Ok(r)
}

/// Parameters where the arc leaves `N_a` for the last time and then first
/// enters `N_b`, with the sampled crossings resolved by bisection. `None`
/// means the sampling is too coarse to decide: a chord between later
/// samples dips into the disk, so a re-entry may hide between them.
fn trace(f: &dyn SampledMap, sk: &Skeleton, e: usize, arc: &Arc, wa: Point2, ra: f64, wb: Point2, rb: f64) -> Option<(f64, f64)> {
    let n = arc.points.len();
    let pts = &arc.points;
    let ka = pts.iter().rposition(|p| p.dist(wa) <= ra)?;
    if ka + 1 >= n {
        return None;
    }
    if (ka + 1..n - 1).any(|k| point_segment_distance(wa, pts[k], pts[k + 1]) <= ra) {
        return None;
    }
    let tx = bisect(|t| f.eval(sk.edge_point(e, t)).dist(wa) <= ra, arc.time(ka), arc.time(ka + 1));
    let kb = (ka + 1..n).find(|&k| pts[k].dist(wb) <= rb)?;
    if (ka + 1..kb.saturating_sub(1)).any(|k| point_segment_distance(wb, pts[k], pts[k + 1]) <= rb) {
        return None;
    }
    let lo = arc.time(kb - 1).max(tx);
    let txp = bisect(|t| f.eval(sk.edge_point(e, t)).dist(wb) > rb, lo, arc.time(kb));
    (txp > tx).then_some((tx, txp))
}

/// Largest `t` in `[lo, hi]` with `inside(t)`, given `inside(lo)` and not
/// `inside(hi)`.
fn bisect(inside: impl Fn(f64) -> bool, mut lo: f64, mut hi: f64) -> f64 {
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if inside(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

/// Time-synchronised Douglas-Peucker: keeps the fewest samples such that
/// the chord between kept samples, walked at constant speed in `t`, stays
/// within `tol` of every dropped sample.
fn simplify(times: &[f64], pts: &[Point2], tol: f64) -> Vec<usize> {
    let mut keep = vec![false; pts.len()];
    keep[0] = true;
    keep[pts.len() - 1] = true;
    let mut stack = vec![(0usize, pts.len() - 1)];
    while let Some((i, j)) = stack.pop() {
        if j <= i + 1 {
            continue;
        }
        let (mut worst, mut at) = (0.0, i);
        for k in i + 1..j {
            let u = (times[k] - times[i]) / (times[j] - times[i]);
            let d = pts[k].dist(pts[i].lerp(pts[j], u));
            if d > worst {
                worst = d;
                at = k;
            }
        }
        if worst > tol {
            keep[at] = true;
            stack.push((i, at));
            stack.push((at, j));
        }
    }
    (0..pts.len()).filter(|&k| keep[k]).collect()
}

/// Roots `u` in `[0, 1]` of `|p + u (q - p) - c| = r`.
fn circle_roots(p: Point2, q: Point2, c: Point2, r: f64) -> Option<(f64, f64)> {
    let d = q - p;
    let m = p - c;
    let a = d.norm_sq();
    let b = 2.0 * m.dot(d);
    let cc = m.norm_sq() - r * r;
    let disc = b * b - 4.0 * a * cc;
    if a == 0.0 || disc < 0.0 {
        return None;
    }
    let sq = disc.sqrt();
    Some(((-b - sq) / (2.0 * a), (-b + sq) / (2.0 * a)))
}

/// Builds `B''` for one edge from the traced arc with tube tolerance `tol`.
fn route(
    f: &dyn SampledMap,
    sk: &Skeleton,
    e: usize,
    arc: &Arc,
    (wa, ra): (Point2, f64),
    (wb, rb): (Point2, f64),
    (tx, txp): (f64, f64),
    tol: f64,
) -> Option<BrokenLine> {
    let mut times = vec![tx];
    let mut pts = vec![f.eval(sk.edge_point(e, tx))];
    for k in 0..arc.points.len() {
        let t = arc.time(k);
        if t > tx && t < txp {
            times.push(t);
            pts.push(arc.points[k]);
        }
    }
    times.push(txp);
    pts.push(f.eval(sk.edge_point(e, txp)));
    let kept = simplify(&times, &pts, tol);
    let bt: Vec<f64> = kept.iter().map(|&k| times[k]).collect();
    let bp: Vec<Point2> = kept.iter().map(|&k| pts[k]).collect();

    // y: last point of B in the closed disk N_a
    let mut y = (bp[0], bt[0], 0usize);
    for s in (0..bp.len() - 1).rev() {
        let (p, q) = (bp[s], bp[s + 1]);
        if let Some((u0, u1)) = circle_roots(p, q, wa, ra) {
            if u0 <= 1.0 && u1 >= 0.0 {
                let u = u1.min(1.0);
                y = (p.lerp(q, u), bt[s] + u * (bt[s + 1] - bt[s]), s);
                break;
            }
        }
    }
    // y': first point of B after y in the closed disk N_b
    let mut yp = (bp[bp.len() - 1], bt[bt.len() - 1], bp.len() - 2);
    for s in y.2..bp.len() - 1 {
        let (p, q) = (bp[s], bp[s + 1]);
        let from = if s == y.2 { (y.1 - bt[s]) / (bt[s + 1] - bt[s]) } else { 0.0 };
        if let Some((u0, u1)) = circle_roots(p, q, wb, rb) {
            let u = u0.max(from);
            if u <= u1 && u <= 1.0 {
                yp = (p.lerp(q, u), bt[s] + u * (bt[s + 1] - bt[s]), s);
                break;
            }
        }
    }
    let mut points = vec![wa, y.0];
    let mut ts = vec![0.0, y.1];
    for s in y.2 + 1..=yp.2 {
        points.push(bp[s]);
        ts.push(bt[s]);
    }
    points.push(yp.0);
    ts.push(yp.1);
    points.push(wb);
    ts.push(1.0);
    // drop zero-length pieces and non-increasing times
    let mut line = BrokenLine {
        points: vec![points[0]],
        times: vec![0.0],
    };
    for k in 1..points.len() {
        let last = *line.points.last().unwrap();
        let lt = *line.times.last().unwrap();
        if points[k] != last && ts[k] > lt {
            line.points.push(points[k]);
            line.times.push(ts[k]);
        } else if k == points.len() - 1 {
            // the end vertex is fixed
            line.points.pop();
            line.times.pop();
            line.points.push(points[k]);
            line.times.push(1.0);
        }
    }
    (line.points.len() >= 2 && line.points[0] == wa && *line.points.last().unwrap() == wb).then_some(line)
}

/// Exact test of one broken line against another (or itself when `same`).
fn lines_conflict(l1: &BrokenLine, e1: (usize, usize), l2: &BrokenLine, e2: (usize, usize)) -> bool {
    if !l1.bbox().overlaps(&l2.bbox()) {
        return false;
    }
    let shared: Option<(bool, bool)> = if e1.0 == e2.0 {
        Some((true, true))
    } else if e1.0 == e2.1 {
        Some((true, false))
    } else if e1.1 == e2.0 {
        Some((false, true))
    } else if e1.1 == e2.1 {
        Some((false, false))
    } else {
        None
    };
    let n1 = l1.points.len() - 1;
    let n2 = l2.points.len() - 1;
    for i in 0..n1 {
        let (a, b) = (l1.points[i], l1.points[i + 1]);
        let bi = BBox::of([a, b]);
        for j in 0..n2 {
            let (c, d) = (l2.points[j], l2.points[j + 1]);
            if !bi.overlaps(&BBox::of([c, d])) {
                continue;
            }
            let contact = segment_contact(a, b, c, d);
            if contact == SegmentContact::Disjoint {
                continue;
            }
            // the only allowed contact is the shared endpoint, between the two
            // segments incident to it
            let allowed = match shared {
                Some((first1, first2)) => {
                    let s1 = if first1 { 0 } else { n1 - 1 };
                    let s2 = if first2 { 0 } else { n2 - 1 };
                    i == s1 && j == s2 && contact == SegmentContact::Point
                }
                None => false,
            };
            if !allowed {
                return true;
            }
        }
    }
    false
}

fn self_conflict(l: &BrokenLine) -> bool {
    let n = l.points.len() - 1;
    for i in 0..n {
        for j in i + 1..n {
            let c = segment_contact(l.points[i], l.points[i + 1], l.points[j], l.points[j + 1]);
            let bad = if j == i + 1 {
                c == SegmentContact::Overlap
            } else {
                c != SegmentContact::Disjoint
            };
            if bad {
                return true;
            }
        }
    }
    false
}

fn edge_conflicts(s: &Setup, lines: &[BrokenLine], e: usize, candidates: &[usize], line: &BrokenLine) -> bool {
    self_conflict(line)
        || candidates
            .iter()
            .any(|&e2| lines_conflict(line, s.sk.edges[e], &lines[e2], s.sk.edges[e2]))
}

fn max_error(f: &dyn SampledMap, sk: &Skeleton, e: usize, line: &BrokenLine, n: usize) -> f64 {
    (0..=n)
        .map(|k| {
            let t = k as f64 / n as f64;
            f.eval(sk.edge_point(e, t)).dist(line.eval(t))
        })
        .fold(0.0, f64::max)
}

/// Broken-line approximation with the default sampling configuration.
pub fn approximate_skeleton(f: &dyn SampledMap, sk: &Skeleton, d: usize, eps: f64) -> Result<SkeletonApproximation> {
    approximate_skeleton_with(f, sk, d, eps, &SkeletonConfig::default())
}

pub fn approximate_skeleton_with(
    f: &dyn SampledMap,
    sk: &Skeleton,
    d: usize,
    eps: f64,
    cfg: &SkeletonConfig,
) -> Result<SkeletonApproximation> {
    approximate_skeleton_near(f, sk, d, eps, cfg, None)
}

/// As `approximate_skeleton_with`, reusing precomputed `within(v, d)` sets.
pub(crate) fn approximate_skeleton_near(
    f: &dyn SampledMap,
    sk: &Skeleton,
    d: usize,
    eps: f64,
    cfg: &SkeletonConfig,
    near: Option<Vec<Vec<(usize, usize)>>>,
) -> Result<SkeletonApproximation> {
    if d < 2 {
        return Err(Error::InvalidArgument("d must be at least 2".into()));
    }
    if !(eps > 0.0) {
        return Err(Error::InvalidArgument("eps must be positive".into()));
    }
    let nv = sk.vertices.len();
    let ne = sk.edges.len();
    let near = match near {
        Some(n) => n,
        None => sk.all_within(d),
    };
    let setup = Setup {
        sk,
        eps,
        w: sk.vertices.iter().map(|&v| f.eval(v)).collect(),
        near,
    };
    let s = &setup;

    // neighbourhood radii and arc tracing, resampling ambiguous edges
    let mut samples = vec![cfg.arc_samples.max(4); ne];
    let mut arcs: Vec<Arc> = (0..ne).into_par_iter().map(|e| Arc::sample(f, sk, e, samples[e])).collect();
    let (radii, traces) = loop {
        let radii: Vec<f64> = (0..nv)
            .into_par_iter()
            .map(|i| neighborhood_radius(s, &arcs, i))
            .collect::<Result<_>>()?;
        let traces: Vec<Option<(f64, f64)>> = (0..ne)
            .into_par_iter()
            .map(|e| {
                let (a, b) = sk.edges[e];
                if radii[a] <= 0.0 || radii[b] <= 0.0 {
                    return None;
                }
                trace(f, sk, e, &arcs[e], s.w[a], radii[a], s.w[b], radii[b])
            })
            .collect();
        let redo: Vec<usize> = (0..ne).filter(|&e| traces[e].is_none()).collect();
        if redo.is_empty() {
            break (radii, traces);
        }
        for &e in &redo {
            if samples[e] >= cfg.max_arc_samples {
                let (a, b) = sk.edges[e];
                let v = if radii[a] <= radii[b] { a } else { b };
                return Err(Error::NeighborhoodCondition {
                    vertex: v,
                    detail: format!(
                        "edge {e}: radius {:e} not resolvable with {} samples",
                        radii[v], samples[e]
                    ),
                });
            }
            samples[e] *= 2;
        }
        let redone: Vec<Arc> = redo.par_iter().map(|&e| Arc::sample(f, sk, e, samples[e])).collect();
        for (e, arc) in redo.into_iter().zip(redone) {
            arcs[e] = arc;
        }
    };

    // route broken lines; repair conflicts by shrinking the tube tolerance
    let mut tol: Vec<f64> = (0..ne)
        .map(|e| {
            let (a, b) = sk.edges[e];
            0.1 * radii[a].min(radii[b])
        })
        .collect();
    let build = |e: usize, tol: f64| -> Result<BrokenLine> {
        let (a, b) = sk.edges[e];
        route(f, sk, e, &arcs[e], (s.w[a], radii[a]), (s.w[b], radii[b]), traces[e].unwrap(), tol)
            .ok_or_else(|| Error::TubeRouting(format!("edge {e}: broken line degenerated")))
    };
    let mut lines: Vec<BrokenLine> = (0..ne).into_par_iter().map(|e| build(e, tol[e])).collect::<Result<_>>()?;
    let candidates: Vec<Vec<usize>> = (0..ne).into_par_iter().map(|e| s.candidate_edges(e)).collect();
    let checked_pairs = candidates.iter().map(Vec::len).sum::<usize>() / 2 + ne;
    // each unordered pair once; both members of a conflicting pair are bad
    let flagged: Vec<Vec<usize>> = (0..ne)
        .into_par_iter()
        .map(|e| {
            let mut out = Vec::new();
            if self_conflict(&lines[e]) {
                out.push(e);
            }
            for &e2 in candidates[e].iter().filter(|&&e2| e2 > e) {
                if lines_conflict(&lines[e], sk.edges[e], &lines[e2], sk.edges[e2]) {
                    out.extend([e, e2]);
                }
            }
            out
        })
        .collect();
    let mut bad: Vec<usize> = flagged.into_iter().flatten().collect();
    bad.sort_unstable();
    bad.dedup();
    let mut rounds = 0;
    while !bad.is_empty() {
        if rounds == cfg.max_repairs {
            return Err(Error::TubeRouting(format!(
                "{} edges still conflict after {rounds} repairs (first: edge {})",
                bad.len(),
                bad[0]
            )));
        }
        rounds += 1;
        for &e in &bad {
            tol[e] *= 0.5;
            lines[e] = build(e, tol[e])?;
        }
        let mut touched: Vec<usize> = bad.iter().flat_map(|&e| candidates[e].iter().copied().chain([e])).collect();
        touched.sort_unstable();
        touched.dedup();
        bad = touched
            .into_iter()
            .filter(|&e| edge_conflicts(s, &lines, e, &candidates[e], &lines[e]))
            .collect();
    }

    // greedy straightening, accepted only when every check stays green
    if cfg.straighten {
        for e in 0..ne {
            if lines[e].is_straight() {
                continue;
            }
            let (a, b) = sk.edges[e];
            let chord = BrokenLine::straight(s.w[a], s.w[b]);
            let arc = &arcs[e];
            let dev = (0..arc.points.len())
                .map(|k| arc.points[k].dist(chord.eval(arc.time(k))))
                .fold(0.0, f64::max);
            if dev >= eps / 3.0 {
                continue;
            }
            if !edge_conflicts(s, &lines, e, &candidates[e], &chord) {
                lines[e] = chord;
            }
        }
    }

    let errors: Vec<f64> = (0..ne)
        .into_par_iter()
        .map(|e| max_error(f, sk, e, &lines[e], cfg.error_samples))
        .collect();
    let max_sampled_error = errors.iter().copied().fold(0.0, f64::max);
    if max_sampled_error >= eps {
        let e = errors.iter().position(|&x| x >= eps).unwrap();
        return Err(Error::TubeRouting(format!(
            "edge {e}: sampled error {:e} not below {eps:e}",
            errors[e]
        )));
    }
    Ok(SkeletonApproximation {
        skeleton: sk.clone(),
        d,
        eps,
        vertex_images: setup.w.clone(),
        straight_edges: lines.iter().filter(|l| l.is_straight()).count(),
        lines,
        radii,
        arc_samples: samples.iter().copied().max().unwrap_or(0),
        error_samples: cfg.error_samples,
        max_sampled_error,
        checked_pairs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::pt;
    use crate::maps::{Affine, Identity};
    use crate::geometry::Mat2;

    #[test]
    fn identity_path_gives_straight_edges() {
        let sk = Skeleton::path(vec![pt(0., 0.), pt(1., 0.), pt(1., 1.), pt(2., 1.)]).unwrap();
        let g = approximate_skeleton(&Identity, &sk, 2, 0.1).unwrap();
        assert_eq!(g.straight_edges, 3);
        for (e, &(a, b)) in sk.edges().iter().enumerate() {
            assert_eq!(g.lines[e].points, vec![sk.vertices()[a], sk.vertices()[b]]);
        }
    }

    #[test]
    fn rotation_on_triangle_boundary() {
        let sk = Skeleton::new(vec![pt(0., 0.), pt(1., 0.), pt(0., 1.)], vec![(0, 1), (1, 2), (0, 2)]).unwrap();
        let rot = Affine::new(Mat2::rotation(std::f64::consts::PI / 6.0), Point2::ORIGIN);
        let g = approximate_skeleton(&rot, &sk, 2, 0.05).unwrap();
        assert_eq!(g.straight_edges, 3);
        for (i, &v) in sk.vertices().iter().enumerate() {
            assert_eq!(g.vertex_images[i], rot.apply(v));
        }
    }

    #[test]
    fn time_synchronised_simplification() {
        let times: Vec<f64> = (0..=10).map(|k| k as f64 / 10.0).collect();
        let pts: Vec<Point2> = times.iter().map(|&t| pt(t, 0.0)).collect();
        assert_eq!(simplify(&times, &pts, 1e-12), vec![0, 10]);
        // same track walked at uneven speed must keep the speed change
        let pts: Vec<Point2> = times.iter().map(|&t| pt(t * t, 0.0)).collect();
        assert!(simplify(&times, &pts, 1e-3).len() > 2);
    }

    #[test]
    fn broken_line_eval_at_times() {
        let l = BrokenLine {
            points: vec![pt(0., 0.), pt(1., 0.), pt(1., 1.)],
            times: vec![0.0, 0.25, 1.0],
        };
        assert_eq!(l.eval(0.0), pt(0., 0.));
        assert_eq!(l.eval(0.25), pt(1., 0.));
        assert!(l.eval(0.625).dist(pt(1., 0.5)) < 1e-15);
        assert_eq!(l.eval(1.0), pt(1., 1.));
        assert!(l.reversed().eval(0.375).dist(pt(1., 0.5)) < 1e-15);
    }

    #[test]
    fn coincident_vertex_images_rejected() {
        let sk = Skeleton::path(vec![pt(-1., 0.), pt(0., 0.5), pt(1., 0.)]).unwrap();
        let fold = crate::maps::FnMap::new(|p: Point2| pt(p.x.abs(), p.y));
        assert!(matches!(
            approximate_skeleton(&fold, &sk, 2, 0.1),
            Err(Error::NeighborhoodCondition { .. })
        ));
    }
}
