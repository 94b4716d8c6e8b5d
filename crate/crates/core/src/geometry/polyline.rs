use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::point::{pt, Point2};
use super::predicates::{segment_contact, BBox, SegmentContact};
use crate::error::{Error, Result};

/// A closed polygonal curve; the last point connects back to the first.
#[derive(Clone, Debug, PartialEq)]
pub struct ClosedPolyline {
    points: Vec<Point2>,
}

impl ClosedPolyline {
    pub fn new(points: Vec<Point2>) -> Result<Self> {
        if points.len() < 3 {
            return Err(Error::InvalidArgument("closed polyline needs at least 3 points".into()));
        }
        for (i, p) in points.iter().enumerate() {
            if !p.is_finite() {
                return Err(Error::NonFinite(format!("polyline point {i}")));
            }
            if *p == points[(i + 1) % points.len()] {
                return Err(Error::InvalidArgument(format!("polyline points {i} and its successor coincide")));
            }
        }
        Ok(ClosedPolyline { points })
    }

    /// Regular `n`-gon inscribed in the circle, counterclockwise from angle 0.
    pub fn circle(center: Point2, radius: f64, n: usize) -> Result<Self> {
        let pts = (0..n)
            .map(|k| {
                let a = std::f64::consts::TAU * k as f64 / n as f64;
                center + pt(a.cos(), a.sin()) * radius
            })
            .collect();
        Self::new(pts)
    }

    pub fn points(&self) -> &[Point2] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn segments(&self) -> impl Iterator<Item = (Point2, Point2)> + '_ {
        let n = self.points.len();
        (0..n).map(move |i| (self.points[i], self.points[(i + 1) % n]))
    }

    pub fn reversed(&self) -> ClosedPolyline {
        let mut p = self.points.clone();
        p.reverse();
        ClosedPolyline { points: p }
    }

    /// Shoelace area: positive for counterclockwise curves.
    pub fn signed_area(&self) -> f64 {
        0.5 * self.segments().map(|(a, b)| a.cross(b)).sum::<f64>()
    }

    /// `+1` for counterclockwise, `-1` for clockwise, `0` for zero area.
    pub fn orientation_sign(&self) -> i32 {
        let a = self.signed_area();
        if a > 0.0 {
            1
        } else if a < 0.0 {
            -1
        } else {
            0
        }
    }

    pub fn perimeter(&self) -> f64 {
        self.segments().map(|(a, b)| a.dist(b)).sum()
    }

    pub fn bbox(&self) -> BBox {
        BBox::of(self.points.iter().copied())
    }

    /// Exact simplicity test: non-adjacent segments are disjoint and adjacent
    /// segments meet only at their shared vertex.
    pub fn is_simple(&self) -> bool {
        self.first_self_intersection().is_none()
    }

    /// First pair of segment indices that violates simplicity.
    pub fn first_self_intersection(&self) -> Option<(usize, usize)> {
        let n = self.points.len();
        let seg = |i: usize| (self.points[i], self.points[(i + 1) % n]);
        let boxes: Vec<BBox> = (0..n).map(|i| {
            let (a, b) = seg(i);
            BBox::of([a, b])
        }).collect();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&i, &j| boxes[i].min.x.total_cmp(&boxes[j].min.x));
        for (oi, &i) in order.iter().enumerate() {
            for &j in &order[oi + 1..] {
                if boxes[j].min.x > boxes[i].max.x {
                    break;
                }
                if !boxes[i].overlaps(&boxes[j]) {
                    continue;
                }
                let (lo, hi) = if i < j { (i, j) } else { (j, i) };
                let (a, b) = seg(lo);
                let (c, d) = seg(hi);
                let adjacent = hi == lo + 1 || (lo == 0 && hi == n - 1);
                let contact = segment_contact(a, b, c, d);
                let bad = if adjacent {
                    // only the shared vertex; a triangle (n == 3) has all pairs adjacent
                    contact == SegmentContact::Overlap
                        || (n == 3 && contact == SegmentContact::Disjoint)
                } else {
                    contact != SegmentContact::Disjoint
                };
                if bad {
                    return Some((lo, hi));
                }
            }
        }
        None
    }

    /// `n` points spaced uniformly by arc length, starting at the first vertex.
    pub fn sample_uniform(&self, n: usize) -> Vec<Point2> {
        let total = self.perimeter();
        let lens: Vec<f64> = self.segments().map(|(a, b)| a.dist(b)).collect();
        let mut out = Vec::with_capacity(n);
        let mut seg = 0usize;
        let mut seg_start = 0.0;
        for k in 0..n {
            let s = total * k as f64 / n as f64;
            while seg + 1 < lens.len() && seg_start + lens[seg] <= s {
                seg_start += lens[seg];
                seg += 1;
            }
            let (a, b) = (self.points[seg], self.points[(seg + 1) % self.points.len()]);
            let t = if lens[seg] > 0.0 { ((s - seg_start) / lens[seg]).clamp(0.0, 1.0) } else { 0.0 };
            out.push(a.lerp(b, t));
        }
        out
    }
}

impl Serialize for ClosedPolyline {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.points.serialize(s)
    }
}

impl<'de> Deserialize<'de> for ClosedPolyline {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let pts = Vec::<Point2>::deserialize(d)?;
        ClosedPolyline::new(pts).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_short_and_repeated() {
        assert!(ClosedPolyline::new(vec![pt(0., 0.), pt(1., 0.)]).is_err());
        assert!(ClosedPolyline::new(vec![pt(0., 0.), pt(1., 0.), pt(1., 0.)]).is_err());
    }

    #[test]
    fn circle_is_simple_and_ccw() {
        let c = ClosedPolyline::circle(Point2::ORIGIN, 1.0, 64).unwrap();
        assert!(c.is_simple());
        assert_eq!(c.orientation_sign(), 1);
        assert_eq!(c.reversed().orientation_sign(), -1);
    }

    #[test]
    fn bowtie_is_not_simple() {
        let c = ClosedPolyline::new(vec![pt(0., 0.), pt(1., 1.), pt(1., 0.), pt(0., 1.)]).unwrap();
        assert!(!c.is_simple());
    }

    #[test]
    fn backtracking_is_not_simple() {
        let c = ClosedPolyline::new(vec![pt(0., 0.), pt(2., 0.), pt(1., 0.), pt(1., 1.)]).unwrap();
        assert!(!c.is_simple());
    }

    #[test]
    fn uniform_samples_lie_on_curve() {
        let sq = ClosedPolyline::new(vec![pt(0., 0.), pt(1., 0.), pt(1., 1.), pt(0., 1.)]).unwrap();
        let s = sq.sample_uniform(8);
        assert_eq!(s[0], pt(0., 0.));
        assert_eq!(s[1], pt(0.5, 0.));
        assert_eq!(s[2], pt(1., 0.));
        assert_eq!(s[5], pt(0.5, 1.));
    }
}
