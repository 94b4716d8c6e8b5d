use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::geometry::predicates::{barycentric, point_triangle_distance};
use crate::geometry::{orient2d, BBox, Mat2, Point2, SimplicialComplex, Triangle, TriangleGrid};
use crate::maps::{Affine, SampledMap};

/// A map that is affine on every triangle of a complex, given by its vertex
/// images.
#[derive(Clone, Debug)]
pub struct PLMap {
    complex: SimplicialComplex,
    vertex_images: Vec<Point2>,
    affine: Vec<Affine>,
    grid: TriangleGrid,
}

impl PartialEq for PLMap {
    fn eq(&self, o: &Self) -> bool {
        self.complex == o.complex && self.vertex_images == o.vertex_images
    }
}

impl PLMap {
    pub fn new(complex: SimplicialComplex, vertex_images: Vec<Point2>) -> Result<Self> {
        if vertex_images.len() != complex.num_vertices() {
            return Err(Error::InvalidArgument(format!(
                "{} vertex images for {} vertices",
                vertex_images.len(),
                complex.num_vertices()
            )));
        }
        if let Some(i) = vertex_images.iter().position(|p| !p.is_finite()) {
            return Err(Error::NonFinite(format!("vertex image {i}")));
        }
        let affine = (0..complex.num_triangles())
            .map(|t| {
                let [a, b, c] = complex.triangles()[t].0;
                Affine::from_triangles(
                    complex.triangle_points(t),
                    [vertex_images[a], vertex_images[b], vertex_images[c]],
                )
                .expect("complex triangles are nondegenerate")
            })
            .collect();
        let grid = TriangleGrid::build(&complex);
        Ok(PLMap {
            complex,
            vertex_images,
            affine,
            grid,
        })
    }

    /// The PL interpolant of `f` on `complex`.
    pub fn interpolate(f: &dyn SampledMap, complex: SimplicialComplex) -> Result<Self> {
        let images = complex.vertices().iter().map(|&v| f.eval(v)).collect();
        Self::new(complex, images)
    }

    pub fn complex(&self) -> &SimplicialComplex {
        &self.complex
    }

    pub fn vertex_images(&self) -> &[Point2] {
        &self.vertex_images
    }

    pub fn affine(&self, t: usize) -> &Affine {
        &self.affine[t]
    }

    pub fn linear(&self, t: usize) -> Mat2 {
        self.affine[t].linear
    }

    pub fn image_points(&self, t: usize) -> [Point2; 3] {
        let [a, b, c] = self.complex.triangles()[t].0;
        [self.vertex_images[a], self.vertex_images[b], self.vertex_images[c]]
    }

    /// Exact orientation of the image triangle relative to the domain
    /// triangle: `+1` preserved, `-1` reversed, `0` degenerate.
    pub fn image_orientation(&self, t: usize) -> i32 {
        let [p, q, r] = self.image_points(t);
        let [a, b, c] = self.complex.triangle_points(t);
        let image = orient2d(p, q, r);
        if image == 0.0 {
            0
        } else {
            (image.signum() * orient2d(a, b, c).signum()) as i32
        }
    }

    pub fn image_bbox(&self) -> BBox {
        BBox::of(self.vertex_images.iter().copied())
    }

    /// Triangle containing `p` (closed), if any.
    pub fn locate(&self, p: Point2) -> Option<usize> {
        self.grid.locate(&self.complex, p)
    }

    /// Nearest triangle to `p`, for evaluation slightly outside `|K|`.
    pub fn nearest_triangle(&self, p: Point2) -> usize {
        if let Some(t) = self.locate(p) {
            return t;
        }
        let bbox = self.complex.bbox();
        let mut r = 1e-6 * (1.0 + bbox.diagonal());
        let mut cand = Vec::new();
        loop {
            cand.clear();
            self.grid.query(&BBox::of([p]).inflate(r), &mut cand);
            let best = cand
                .iter()
                .map(|&t| {
                    let [a, b, c] = self.complex.triangle_points(t);
                    (point_triangle_distance(p, a, b, c), t)
                })
                .min_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)));
            match best {
                Some((d, t)) if d <= r => return t,
                _ if r > 4.0 * bbox.diagonal() + p.dist(bbox.min) => {
                    return best.map(|b| b.1).unwrap_or(0);
                }
                _ => r *= 2.0,
            }
        }
    }

    /// Value at `p` if `p` lies in `|K|`.
    pub fn try_eval(&self, p: Point2) -> Option<Point2> {
        self.locate(p).map(|t| self.affine[t].apply(p))
    }

    /// Barycentric evaluation on a known triangle (exact interpolation at
    /// the vertices).
    pub fn eval_on(&self, t: usize, p: Point2) -> Point2 {
        let [a, b, c] = self.complex.triangle_points(t);
        let [l0, l1, l2] = barycentric(a, b, c, p);
        let [p0, p1, p2] = self.image_points(t);
        p0 * l0 + p1 * l1 + p2 * l2
    }

    pub fn max_linear_norm(&self) -> f64 {
        self.affine
            .iter()
            .map(|a| a.linear.operator_norm())
            .fold(0.0, f64::max)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("PL map serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

impl SampledMap for PLMap {
    fn eval(&self, p: Point2) -> Point2 {
        let t = self.nearest_triangle(p);
        self.affine[t].apply(p)
    }

    fn jacobian(&self, p: Point2) -> Option<Mat2> {
        Some(self.affine[self.nearest_triangle(p)].linear)
    }

    fn lipschitz(&self) -> Option<f64> {
        Some(self.max_linear_norm())
    }
}

#[derive(Serialize, Deserialize)]
struct PLMapRepr {
    vertices: Vec<Point2>,
    triangles: Vec<Triangle>,
    vertex_images: Vec<Point2>,
}

impl Serialize for PLMap {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        PLMapRepr {
            vertices: self.complex.vertices().to_vec(),
            triangles: self.complex.triangles().to_vec(),
            vertex_images: self.vertex_images.clone(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for PLMap {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let r = PLMapRepr::deserialize(d)?;
        let c = SimplicialComplex::new(r.vertices, r.triangles).map_err(serde::de::Error::custom)?;
        PLMap::new(c, r.vertex_images).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::meshes::unit_square;
    use crate::geometry::pt;
    use crate::maps::ComplexPoly;

    #[test]
    fn affine_parts_interpolate_vertices() {
        let h = PLMap::interpolate(&ComplexPoly::square(), unit_square()).unwrap();
        for t in 0..h.complex().num_triangles() {
            let [a, b, c] = h.complex().triangle_points(t);
            let [p, q, r] = h.image_points(t);
            for (x, y) in [(a, p), (b, q), (c, r)] {
                assert!(h.affine(t).apply(x).dist(y) < 1e-15);
            }
        }
    }

    #[test]
    fn continuous_across_shared_edge() {
        let h = PLMap::interpolate(&ComplexPoly::square(), unit_square()).unwrap();
        // diagonal (0,0)-(1,1) is shared by both triangles
        let m = pt(0.3, 0.3);
        let v0 = h.affine(0).apply(m);
        let v1 = h.affine(1).apply(m);
        assert!(v0.dist(v1) < 1e-15);
    }

    #[test]
    fn json_roundtrip() {
        let h = PLMap::interpolate(&ComplexPoly::square(), unit_square()).unwrap();
        let s = h.to_json();
        assert!(s.contains("\"vertex_images\""));
        assert_eq!(PLMap::from_json(&s).unwrap(), h);
    }

    #[test]
    fn outside_points_use_nearest_triangle() {
        let h = PLMap::interpolate(&crate::maps::Identity, unit_square()).unwrap();
        assert_eq!(h.try_eval(pt(1.5, 0.5)), None);
        assert!(h.eval(pt(1.5, 0.5)).dist(pt(1.5, 0.5)) < 1e-15);
    }

    #[test]
    fn orientation_of_images() {
        let h = PLMap::interpolate(&ComplexPoly::conj(), unit_square()).unwrap();
        assert!((0..2).all(|t| h.image_orientation(t) == -1));
    }
}
