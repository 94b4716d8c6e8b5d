//! Adaptive-precision orientation and the exact incidence tests built on it.
//!
//! Every predicate here returns the sign of an exact determinant, so the
//! combinatorial answers (crossing, containment, collinearity) never depend on
//! rounding. Metric helpers at the bottom are plain floating point.

use std::cmp::Ordering;

use super::point::Point2;

/// Twice the signed area of `abc`, with an exactly correct sign.
#[inline]
pub fn orient2d(a: Point2, b: Point2, c: Point2) -> f64 {
    robust::orient2d(
        robust::Coord { x: a.x, y: a.y },
        robust::Coord { x: b.x, y: b.y },
        robust::Coord { x: c.x, y: c.y },
    )
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Orientation {
    CounterClockwise,
    Clockwise,
    Collinear,
}

impl Orientation {
    pub fn sign(self) -> i32 {
        match self {
            Orientation::CounterClockwise => 1,
            Orientation::Clockwise => -1,
            Orientation::Collinear => 0,
        }
    }
}

#[inline]
pub fn orientation(a: Point2, b: Point2, c: Point2) -> Orientation {
    let d = orient2d(a, b, c);
    if d > 0.0 {
        Orientation::CounterClockwise
    } else if d < 0.0 {
        Orientation::Clockwise
    } else {
        Orientation::Collinear
    }
}

#[inline]
fn sgn(v: f64) -> i32 {
    if v > 0.0 {
        1
    } else if v < 0.0 {
        -1
    } else {
        0
    }
}

/// `p` lies on the closed segment `ab` (exact).
pub fn on_segment(a: Point2, b: Point2, p: Point2) -> bool {
    if orient2d(a, b, p) != 0.0 {
        return false;
    }
    in_box(a, b, p)
}

#[inline]
fn in_box(a: Point2, b: Point2, p: Point2) -> bool {
    p.x >= a.x.min(b.x) && p.x <= a.x.max(b.x) && p.y >= a.y.min(b.y) && p.y <= a.y.max(b.y)
}

/// Closed segments `ab` and `cd` share at least one point (exact).
pub fn segments_intersect(a: Point2, b: Point2, c: Point2, d: Point2) -> bool {
    let d1 = sgn(orient2d(c, d, a));
    let d2 = sgn(orient2d(c, d, b));
    let d3 = sgn(orient2d(a, b, c));
    let d4 = sgn(orient2d(a, b, d));
    if d1 * d2 < 0 && d3 * d4 < 0 {
        return true;
    }
    (d1 == 0 && in_box(c, d, a))
        || (d2 == 0 && in_box(c, d, b))
        || (d3 == 0 && in_box(a, b, c))
        || (d4 == 0 && in_box(a, b, d))
}

/// How two closed segments meet.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SegmentContact {
    Disjoint,
    /// A single common point.
    Point,
    /// Collinear with a common sub-segment of positive length.
    Overlap,
}

pub fn segment_contact(a: Point2, b: Point2, c: Point2, d: Point2) -> SegmentContact {
    if !segments_intersect(a, b, c, d) {
        return SegmentContact::Disjoint;
    }
    if orient2d(a, b, c) == 0.0 && orient2d(a, b, d) == 0.0 {
        // collinear: project on the dominant axis
        let key = |p: Point2| {
            if (b.x - a.x).abs() >= (b.y - a.y).abs() {
                p.x
            } else {
                p.y
            }
        };
        let (lo1, hi1) = minmax(key(a), key(b));
        let (lo2, hi2) = minmax(key(c), key(d));
        let lo = lo1.max(lo2);
        let hi = hi1.min(hi2);
        return match lo.partial_cmp(&hi) {
            Some(Ordering::Less) => SegmentContact::Overlap,
            _ => SegmentContact::Point,
        };
    }
    SegmentContact::Point
}

#[inline]
fn minmax(a: f64, b: f64) -> (f64, f64) {
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}

/// Position of `p` relative to the closed triangle `abc` (any orientation).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TriangleLocation {
    Outside,
    Boundary,
    Inside,
}

pub fn locate_in_triangle(a: Point2, b: Point2, c: Point2, p: Point2) -> TriangleLocation {
    let o = sgn(orient2d(a, b, c));
    if o == 0 {
        return if on_segment(a, b, p) || on_segment(b, c, p) || on_segment(c, a, p) {
            TriangleLocation::Boundary
        } else {
            TriangleLocation::Outside
        };
    }
    let s1 = sgn(orient2d(a, b, p)) * o;
    let s2 = sgn(orient2d(b, c, p)) * o;
    let s3 = sgn(orient2d(c, a, p)) * o;
    if s1 < 0 || s2 < 0 || s3 < 0 {
        TriangleLocation::Outside
    } else if s1 == 0 || s2 == 0 || s3 == 0 {
        TriangleLocation::Boundary
    } else {
        TriangleLocation::Inside
    }
}

/// Direction `v` (from the apex) lies in the closed convex cone spanned by
/// `p` then `q` counterclockwise, with the cone angle strictly below pi.
pub fn in_closed_cone(apex: Point2, p: Point2, q: Point2, v: Point2) -> bool {
    let turn = orient2d(apex, p, q);
    debug_assert!(turn != 0.0);
    let (p, q) = if turn > 0.0 { (p, q) } else { (q, p) };
    orient2d(apex, p, v) >= 0.0 && orient2d(apex, v, q) >= 0.0
}

/// Euclidean distance from `p` to the segment `ab`.
pub fn point_segment_distance(p: Point2, a: Point2, b: Point2) -> f64 {
    let ab = b - a;
    let l2 = ab.norm_sq();
    if l2 == 0.0 {
        return p.dist(a);
    }
    let t = ((p - a).dot(ab) / l2).clamp(0.0, 1.0);
    p.dist(a + ab * t)
}

pub fn segment_segment_distance(a: Point2, b: Point2, c: Point2, d: Point2) -> f64 {
    if segments_intersect(a, b, c, d) {
        return 0.0;
    }
    point_segment_distance(a, c, d)
        .min(point_segment_distance(b, c, d))
        .min(point_segment_distance(c, a, b))
        .min(point_segment_distance(d, a, b))
}

/// Distance from `p` to a polyline given by its vertices.
pub fn point_polyline_distance(p: Point2, line: &[Point2]) -> f64 {
    match line.len() {
        0 => f64::INFINITY,
        1 => p.dist(line[0]),
        _ => line
            .windows(2)
            .map(|w| point_segment_distance(p, w[0], w[1]))
            .fold(f64::INFINITY, f64::min),
    }
}

/// Distance from `p` to the closed triangle `abc` (zero inside).
pub fn point_triangle_distance(p: Point2, a: Point2, b: Point2, c: Point2) -> f64 {
    if locate_in_triangle(a, b, c, p) != TriangleLocation::Outside {
        return 0.0;
    }
    point_segment_distance(p, a, b)
        .min(point_segment_distance(p, b, c))
        .min(point_segment_distance(p, c, a))
}

/// Barycentric coordinates of `p` with respect to `abc` (floating point).
pub fn barycentric(a: Point2, b: Point2, c: Point2, p: Point2) -> [f64; 3] {
    let det = (b - a).cross(c - a);
    let l1 = (b - p).cross(c - p) / det;
    let l2 = (c - p).cross(a - p) / det;
    [l1, l2, 1.0 - l1 - l2]
}

/// Axis-aligned bounding box.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct BBox {
    pub min: Point2,
    pub max: Point2,
}

impl BBox {
    pub fn empty() -> Self {
        BBox {
            min: Point2 {
                x: f64::INFINITY,
                y: f64::INFINITY,
            },
            max: Point2 {
                x: f64::NEG_INFINITY,
                y: f64::NEG_INFINITY,
            },
        }
    }

    pub fn of(points: impl IntoIterator<Item = Point2>) -> Self {
        let mut b = BBox::empty();
        for p in points {
            b.include(p);
        }
        b
    }

    pub fn include(&mut self, p: Point2) {
        self.min.x = self.min.x.min(p.x);
        self.min.y = self.min.y.min(p.y);
        self.max.x = self.max.x.max(p.x);
        self.max.y = self.max.y.max(p.y);
    }

    pub fn inflate(&self, r: f64) -> BBox {
        BBox {
            min: Point2 {
                x: self.min.x - r,
                y: self.min.y - r,
            },
            max: Point2 {
                x: self.max.x + r,
                y: self.max.y + r,
            },
        }
    }

    pub fn overlaps(&self, o: &BBox) -> bool {
        self.min.x <= o.max.x && o.min.x <= self.max.x && self.min.y <= o.max.y && o.min.y <= self.max.y
    }

    pub fn width(&self) -> f64 {
        self.max.x - self.min.x
    }

    pub fn height(&self) -> f64 {
        self.max.y - self.min.y
    }

    pub fn diagonal(&self) -> f64 {
        self.width().hypot(self.height())
    }

    /// Euclidean distance from `p` to the box (zero inside).
    pub fn distance(&self, p: Point2) -> f64 {
        let dx = (self.min.x - p.x).max(p.x - self.max.x).max(0.0);
        let dy = (self.min.y - p.y).max(p.y - self.max.y).max(0.0);
        dx.hypot(dy)
    }

    pub fn contains(&self, p: Point2) -> bool {
        p.x >= self.min.x && p.x <= self.max.x && p.y >= self.min.y && p.y <= self.max.y
    }
}
