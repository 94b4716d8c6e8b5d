use std::collections::{HashMap, VecDeque};

use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::point::Point2;
use super::predicates::{
    in_closed_cone, locate_in_triangle, orient2d, segments_intersect, BBox, Orientation,
    TriangleLocation,
};
use crate::error::{Error, Result};

/// Vertex indices of a triangle in its complex's vertex table.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Triangle(pub [usize; 3]);

impl Triangle {
    pub fn new(a: usize, b: usize, c: usize) -> Self {
        Triangle([a, b, c])
    }

    pub fn contains_vertex(&self, v: usize) -> bool {
        self.0.contains(&v)
    }

    /// Directed edges `(a,b), (b,c), (c,a)`.
    pub fn edges(&self) -> [(usize, usize); 3] {
        let [a, b, c] = self.0;
        [(a, b), (b, c), (c, a)]
    }

    pub fn reversed(&self) -> Triangle {
        let [a, b, c] = self.0;
        Triangle([a, c, b])
    }
}

impl Serialize for Triangle {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.0.serialize(s)
    }
}

impl<'de> Deserialize<'de> for Triangle {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        Ok(Triangle(<[usize; 3]>::deserialize(d)?))
    }
}

/// Undirected edge `a < b` with its incident triangles.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Edge {
    pub a: usize,
    pub b: usize,
    pub triangles: Vec<usize>,
}

impl Edge {
    pub fn is_boundary(&self) -> bool {
        self.triangles.len() == 1
    }

    pub fn other(&self, v: usize) -> usize {
        if v == self.a {
            self.b
        } else {
            self.a
        }
    }
}

#[inline]
pub fn edge_key(u: usize, v: usize) -> (usize, usize) {
    if u < v {
        (u, v)
    } else {
        (v, u)
    }
}

/// A planar simplicial 2-complex.
///
/// Construction checks index ranges, finiteness and nondegeneracy; the
/// intersection condition between triangles is checked by
/// [`SimplicialComplex::validate`].
#[derive(Clone, Debug)]
pub struct SimplicialComplex {
    vertices: Vec<Point2>,
    triangles: Vec<Triangle>,
    edges: Vec<Edge>,
    edge_lookup: HashMap<(usize, usize), usize>,
    triangle_edges: Vec<[usize; 3]>,
    neighbors: Vec<Vec<usize>>,
}

impl PartialEq for SimplicialComplex {
    fn eq(&self, other: &Self) -> bool {
        self.vertices == other.vertices && self.triangles == other.triangles
    }
}

impl SimplicialComplex {
    pub fn new(vertices: Vec<Point2>, triangles: Vec<Triangle>) -> Result<Self> {
        for (i, v) in vertices.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::NonFinite(format!("vertex {i}")));
            }
        }
        let n = vertices.len();
        let mut edges: Vec<Edge> = Vec::new();
        let mut edge_lookup = HashMap::new();
        let mut triangle_edges = Vec::with_capacity(triangles.len());
        let mut neighbors = vec![Vec::new(); n];
        for (ti, t) in triangles.iter().enumerate() {
            let [a, b, c] = t.0;
            if a >= n || b >= n || c >= n {
                return Err(Error::InvalidComplex(format!("triangle {ti} references a missing vertex")));
            }
            if a == b || b == c || a == c {
                return Err(Error::InvalidComplex(format!("triangle {ti} repeats a vertex")));
            }
            if orient2d(vertices[a], vertices[b], vertices[c]) == 0.0 {
                return Err(Error::InvalidComplex(format!("triangle {ti} is degenerate")));
            }
            let mut te = [0usize; 3];
            for (k, (u, v)) in t.edges().into_iter().enumerate() {
                let key = edge_key(u, v);
                let ei = *edge_lookup.entry(key).or_insert_with(|| {
                    edges.push(Edge {
                        a: key.0,
                        b: key.1,
                        triangles: Vec::new(),
                    });
                    neighbors[key.0].push(key.1);
                    neighbors[key.1].push(key.0);
                    edges.len() - 1
                });
                edges[ei].triangles.push(ti);
                te[k] = ei;
            }
            triangle_edges.push(te);
        }
        for nb in &mut neighbors {
            nb.sort_unstable();
        }
        Ok(SimplicialComplex {
            vertices,
            triangles,
            edges,
            edge_lookup,
            triangle_edges,
            neighbors,
        })
    }

    pub fn vertices(&self) -> &[Point2] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[Triangle] {
        &self.triangles
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn vertex(&self, i: usize) -> Point2 {
        self.vertices[i]
    }

    pub fn triangle_points(&self, t: usize) -> [Point2; 3] {
        let [a, b, c] = self.triangles[t].0;
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    /// Signed area; positive for counterclockwise triangles.
    pub fn signed_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangle_points(t);
        0.5 * (b - a).cross(c - a)
    }

    pub fn orientation(&self, t: usize) -> Orientation {
        let [a, b, c] = self.triangle_points(t);
        super::predicates::orientation(a, b, c)
    }

    pub fn triangle_diameter(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangle_points(t);
        a.dist(b).max(b.dist(c)).max(c.dist(a))
    }

    /// Largest triangle diameter.
    pub fn mesh_diameter(&self) -> f64 {
        (0..self.triangles.len())
            .map(|t| self.triangle_diameter(t))
            .fold(0.0, f64::max)
    }

    pub fn bbox(&self) -> BBox {
        BBox::of(self.vertices.iter().copied())
    }

    pub fn triangle_bbox(&self, t: usize) -> BBox {
        BBox::of(self.triangle_points(t))
    }

    pub fn edge_index(&self, u: usize, v: usize) -> Option<usize> {
        self.edge_lookup.get(&edge_key(u, v)).copied()
    }

    /// Edge ids of triangle `t`, in the order of [`Triangle::edges`].
    pub fn triangle_edge_ids(&self, t: usize) -> [usize; 3] {
        self.triangle_edges[t]
    }

    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.neighbors[v]
    }

    pub fn boundary_edges(&self) -> impl Iterator<Item = (usize, &Edge)> {
        self.edges.iter().enumerate().filter(|(_, e)| e.is_boundary())
    }

    /// Breadth-first distances from `src`, truncated at `max_depth`.
    /// Returns `(vertex, distance)` pairs in BFS order.
    pub fn vertices_within(&self, src: usize, max_depth: usize) -> Vec<(usize, usize)> {
        let mut seen = HashMap::new();
        seen.insert(src, 0usize);
        let mut out = vec![(src, 0)];
        let mut queue = VecDeque::from([src]);
        while let Some(u) = queue.pop_front() {
            let du = seen[&u];
            if du == max_depth {
                continue;
            }
            for &w in &self.neighbors[u] {
                if let std::collections::hash_map::Entry::Vacant(e) = seen.entry(w) {
                    e.insert(du + 1);
                    out.push((w, du + 1));
                    queue.push_back(w);
                }
            }
        }
        out
    }

    /// Edge-count distance on the 1-skeleton; `None` when unreachable.
    pub fn combinatorial_distance(&self, u: usize, v: usize) -> Option<usize> {
        combinatorial_distance(self, u, v)
    }

    /// Triangles incident to each vertex.
    pub fn vertex_stars(&self) -> Vec<Vec<usize>> {
        let mut stars = vec![Vec::new(); self.vertices.len()];
        for (ti, t) in self.triangles.iter().enumerate() {
            for &v in &t.0 {
                stars[v].push(ti);
            }
        }
        stars
    }

    /// Triangles that share at least one vertex with `t` (excluding `t`).
    pub fn adjacent_triangles(&self, stars: &[Vec<usize>], t: usize) -> Vec<usize> {
        let mut out: Vec<usize> = self.triangles[t]
            .0
            .iter()
            .flat_map(|&v| stars[v].iter().copied())
            .filter(|&s| s != t)
            .collect();
        out.sort_unstable();
        out.dedup();
        out
    }

    pub fn validate(&self) -> ValidationReport {
        validate_complex(self)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("complex serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

#[derive(Serialize, Deserialize)]
struct ComplexRepr {
    vertices: Vec<Point2>,
    triangles: Vec<Triangle>,
}

impl Serialize for SimplicialComplex {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Ref<'a> {
            vertices: &'a [Point2],
            triangles: &'a [Triangle],
        }
        Ref {
            vertices: &self.vertices,
            triangles: &self.triangles,
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for SimplicialComplex {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let r = ComplexRepr::deserialize(d)?;
        SimplicialComplex::new(r.vertices, r.triangles).map_err(serde::de::Error::custom)
    }
}

/// Graph distance between two vertices of the 1-skeleton.
pub fn combinatorial_distance(c: &SimplicialComplex, u: usize, v: usize) -> Option<usize> {
    if u == v {
        return Some(0);
    }
    let mut dist = vec![usize::MAX; c.num_vertices()];
    dist[u] = 0;
    let mut queue = VecDeque::from([u]);
    while let Some(x) = queue.pop_front() {
        for &w in c.neighbors(x) {
            if dist[w] == usize::MAX {
                dist[w] = dist[x] + 1;
                if w == v {
                    return Some(dist[w]);
                }
                queue.push_back(w);
            }
        }
    }
    None
}

/// Uniform bucket grid over triangle bounding boxes.
#[derive(Clone, Debug)]
pub struct TriangleGrid {
    origin: Point2,
    cell: f64,
    nx: usize,
    ny: usize,
    buckets: Vec<Vec<u32>>,
}

impl TriangleGrid {
    pub fn build(c: &SimplicialComplex) -> Self {
        Self::build_from(c.num_triangles(), |t| c.triangle_points(t), c.bbox())
    }

    /// Builds a grid over `n` triangles given by a point accessor.
    pub fn build_from(n: usize, tri: impl Fn(usize) -> [Point2; 3], bbox: BBox) -> Self {
        let bbox = bbox.inflate(1e-9 * (1.0 + bbox.diagonal()));
        let area = (bbox.width() * bbox.height()).max(1e-300);
        let cells = (n.max(1) as f64).clamp(1.0, 4.0e6);
        let mut cell = (area / cells).sqrt();
        if !(cell > 0.0) {
            cell = 1.0;
        }
        let nx = ((bbox.width() / cell).ceil() as usize).max(1);
        let ny = ((bbox.height() / cell).ceil() as usize).max(1);
        let mut grid = TriangleGrid {
            origin: bbox.min,
            cell,
            nx,
            ny,
            buckets: vec![Vec::new(); nx * ny],
        };
        for t in 0..n {
            let b = BBox::of(tri(t));
            let (x0, y0) = grid.cell_of(b.min);
            let (x1, y1) = grid.cell_of(b.max);
            for iy in y0..=y1 {
                for ix in x0..=x1 {
                    grid.buckets[iy * nx + ix].push(t as u32);
                }
            }
        }
        grid
    }

    #[inline]
    fn cell_of(&self, p: Point2) -> (usize, usize) {
        let fx = ((p.x - self.origin.x) / self.cell).floor();
        let fy = ((p.y - self.origin.y) / self.cell).floor();
        let ix = if fx <= 0.0 { 0 } else { (fx as usize).min(self.nx - 1) };
        let iy = if fy <= 0.0 { 0 } else { (fy as usize).min(self.ny - 1) };
        (ix, iy)
    }

    /// Triangles whose bounding box cell range contains `p`.
    #[inline]
    pub fn candidates(&self, p: Point2) -> &[u32] {
        let (ix, iy) = self.cell_of(p);
        &self.buckets[iy * self.nx + ix]
    }

    /// Candidate triangles for a box query (may contain duplicates).
    pub fn query(&self, b: &BBox, out: &mut Vec<usize>) {
        let (x0, y0) = self.cell_of(b.min);
        let (x1, y1) = self.cell_of(b.max);
        for iy in y0..=y1 {
            for ix in x0..=x1 {
                out.extend(self.buckets[iy * self.nx + ix].iter().map(|&t| t as usize));
            }
        }
    }

    /// First triangle of `c` containing `p` (closed test).
    pub fn locate(&self, c: &SimplicialComplex, p: Point2) -> Option<usize> {
        let mut boundary_hit = None;
        for &t in self.candidates(p) {
            let [a, b, cc] = c.triangle_points(t as usize);
            match locate_in_triangle(a, b, cc, p) {
                TriangleLocation::Inside => return Some(t as usize),
                TriangleLocation::Boundary => {
                    if boundary_hit.is_none() {
                        boundary_hit = Some(t as usize)
                    }
                }
                TriangleLocation::Outside => {}
            }
        }
        boundary_hit
    }
}

/// How a pair of triangles breaks the complex condition.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairViolation {
    /// Same three vertices.
    Duplicate,
    /// Closed triangles meet outside their common face.
    Overlap,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ViolatingPair {
    pub first: usize,
    pub second: usize,
    pub kind: PairViolation,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub pairs: Vec<ViolatingPair>,
    /// Edges `(a, b)` carried by more than two triangles.
    pub overloaded_edges: Vec<(usize, usize)>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.pairs.is_empty() && self.overloaded_edges.is_empty()
    }
}

/// Classifies the intersection of two closed triangles against their shared
/// vertex set. Returns `None` when they meet exactly in the shared face.
pub fn classify_pair(
    p: [Point2; 3],
    ip: [usize; 3],
    q: [Point2; 3],
    iq: [usize; 3],
) -> Option<PairViolation> {
    let shared: Vec<(usize, usize)> = (0..3)
        .flat_map(|i| (0..3).map(move |j| (i, j)))
        .filter(|&(i, j)| ip[i] == iq[j])
        .collect();
    match shared.len() {
        3 => Some(PairViolation::Duplicate),
        2 => {
            let (i0, _) = shared[0];
            let (i1, _) = shared[1];
            let ia = 3 - i0 - i1;
            let jb = 3 - shared[0].1 - shared[1].1;
            let s1 = orient2d(p[i0], p[i1], p[ia]);
            let s2 = orient2d(p[i0], p[i1], q[jb]);
            if (s1 > 0.0 && s2 < 0.0) || (s1 < 0.0 && s2 > 0.0) {
                None
            } else {
                Some(PairViolation::Overlap)
            }
        }
        1 => {
            let (i, j) = shared[0];
            let apex = p[i];
            let (p1, p2) = (p[(i + 1) % 3], p[(i + 2) % 3]);
            let (q1, q2) = (q[(j + 1) % 3], q[(j + 2) % 3]);
            let touches = in_closed_cone(apex, p1, p2, q1)
                || in_closed_cone(apex, p1, p2, q2)
                || in_closed_cone(apex, q1, q2, p1)
                || in_closed_cone(apex, q1, q2, p2);
            touches.then_some(PairViolation::Overlap)
        }
        _ => {
            for a in 0..3 {
                for b in 0..3 {
                    if segments_intersect(p[a], p[(a + 1) % 3], q[b], q[(b + 1) % 3]) {
                        return Some(PairViolation::Overlap);
                    }
                }
            }
            let inside = |t: [Point2; 3], x: Point2| {
                locate_in_triangle(t[0], t[1], t[2], x) != TriangleLocation::Outside
            };
            if inside(q, p[0]) || inside(p, q[0]) {
                return Some(PairViolation::Overlap);
            }
            None
        }
    }
}

/// Lists every triangle pair that violates the complex condition.
pub fn validate_complex(c: &SimplicialComplex) -> ValidationReport {
    let grid = TriangleGrid::build(c);
    let mut pairs: Vec<ViolatingPair> = (0..c.num_triangles())
        .into_par_iter()
        .flat_map_iter(|t| {
            let mut cand = Vec::new();
            let bt = c.triangle_bbox(t);
            grid.query(&bt, &mut cand);
            cand.sort_unstable();
            cand.dedup();
            let p = c.triangle_points(t);
            let ip = c.triangles()[t].0;
            cand.into_iter()
                .filter(move |&s| s > t && c.triangle_bbox(s).overlaps(&bt))
                .filter_map(move |s| {
                    classify_pair(p, ip, c.triangle_points(s), c.triangles()[s].0).map(|kind| {
                        ViolatingPair {
                            first: t,
                            second: s,
                            kind,
                        }
                    })
                })
                .collect::<Vec<_>>()
        })
        .collect();
    pairs.sort_by_key(|v| (v.first, v.second));
    let overloaded_edges = c
        .edges()
        .iter()
        .filter(|e| e.triangles.len() > 2)
        .map(|e| (e.a, e.b))
        .collect();
    ValidationReport {
        pairs,
        overloaded_edges,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::pt;

    fn tri(pts: &[(f64, f64)], tris: &[[usize; 3]]) -> SimplicialComplex {
        SimplicialComplex::new(
            pts.iter().map(|&(x, y)| pt(x, y)).collect(),
            tris.iter().map(|&t| Triangle(t)).collect(),
        )
        .unwrap()
    }

    #[test]
    fn disjoint_triangles_are_valid() {
        let c = tri(
            &[(0., 0.), (1., 0.), (0., 1.), (3., 0.), (4., 0.), (3., 1.)],
            &[[0, 1, 2], [3, 4, 5]],
        );
        assert!(validate_complex(&c).is_valid());
    }

    #[test]
    fn shared_edge_is_valid() {
        let c = tri(&[(0., 0.), (1., 0.), (1., 1.), (0., 1.)], &[[0, 1, 2], [0, 2, 3]]);
        assert!(validate_complex(&c).is_valid());
    }

    #[test]
    fn shared_vertex_fan_is_valid() {
        let c = tri(
            &[(0., 0.), (1., 0.), (0., 1.), (-1., 0.), (0., -1.)],
            &[[0, 1, 2], [0, 3, 4]],
        );
        assert!(validate_complex(&c).is_valid());
    }

    #[test]
    fn overlapping_triangles_are_reported() {
        // second triangle cuts through the first one's interior
        let c = tri(
            &[(0., 0.), (2., 0.), (0., 2.), (0.5, 0.5), (3., 0.5), (0.5, 3.)],
            &[[0, 1, 2], [3, 4, 5]],
        );
        let r = validate_complex(&c);
        assert_eq!(
            r.pairs,
            vec![ViolatingPair {
                first: 0,
                second: 1,
                kind: PairViolation::Overlap
            }]
        );
    }

    #[test]
    fn folded_edge_and_cone_overlap_are_reported() {
        // both triangles on the same side of the shared edge
        let c = tri(&[(0., 0.), (2., 0.), (1., 1.), (1., 2.)], &[[0, 1, 2], [0, 1, 3]]);
        assert!(!validate_complex(&c).is_valid());
        // same apex, overlapping wedges
        let c = tri(
            &[(0., 0.), (2., 0.), (0., 2.), (2., 1.), (1., 2.)],
            &[[0, 1, 2], [0, 3, 4]],
        );
        assert!(!validate_complex(&c).is_valid());
        // T-junction: a vertex in the relative interior of another edge
        let c = tri(
            &[(0., 0.), (2., 0.), (1., 2.), (1., 0.), (2., -1.), (0., -1.)],
            &[[0, 1, 2], [3, 5, 4]],
        );
        assert!(!validate_complex(&c).is_valid());
    }

    #[test]
    fn constructor_rejects_degenerate() {
        let r = SimplicialComplex::new(vec![pt(0., 0.), pt(1., 1.), pt(2., 2.)], vec![Triangle([0, 1, 2])]);
        assert!(r.is_err());
    }

    #[test]
    fn distances_on_square() {
        let c = tri(&[(0., 0.), (1., 0.), (1., 1.), (0., 1.)], &[[0, 1, 2], [0, 2, 3]]);
        assert_eq!(combinatorial_distance(&c, 0, 0), Some(0));
        assert_eq!(combinatorial_distance(&c, 1, 3), Some(2));
        assert_eq!(combinatorial_distance(&c, 0, 2), Some(1));
    }

    #[test]
    fn disconnected_is_unreachable() {
        let c = tri(
            &[(0., 0.), (1., 0.), (0., 1.), (3., 0.), (4., 0.), (3., 1.)],
            &[[0, 1, 2], [3, 4, 5]],
        );
        assert_eq!(combinatorial_distance(&c, 0, 4), None);
    }

    #[test]
    fn json_roundtrip() {
        let c = tri(&[(0., 0.), (1., 0.), (1., 1.)], &[[0, 1, 2]]);
        let s = c.to_json();
        assert_eq!(s, r#"{"vertices":[[0.0,0.0],[1.0,0.0],[1.0,1.0]],"triangles":[[0,1,2]]}"#);
        assert_eq!(SimplicialComplex::from_json(&s).unwrap(), c);
    }
}
