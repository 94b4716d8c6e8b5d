//! Plain SVG sketches of artifacts. Presentational only.

use std::fmt::Write;

use degree_forge::degree::{DegreeReport, Region};
use degree_forge::geometry::{BBox, Point2};
use degree_forge::maps::SampledMap;
use degree_forge::obstruction::BranchTrack;
use degree_forge::pl_approx::{InjectivityCertificate, InjectivityVerdict, PLMap};

const SIZE: f64 = 600.0;

/// Accumulates shapes in data coordinates and maps them into a square
/// canvas with `y` pointing up.
pub struct Svg {
    bbox: BBox,
    body: String,
}

impl Svg {
    pub fn new(bbox: BBox) -> Self {
        let pad = 0.05 * bbox.diagonal().max(1e-9);
        Svg {
            bbox: bbox.inflate(pad),
            body: String::new(),
        }
    }

    fn scale(&self) -> f64 {
        SIZE / self.bbox.width().max(self.bbox.height())
    }

    fn map(&self, p: Point2) -> (f64, f64) {
        let s = self.scale();
        ((p.x - self.bbox.min.x) * s, SIZE - (p.y - self.bbox.min.y) * s)
    }

    fn coords(&self, pts: &[Point2]) -> String {
        pts.iter()
            .map(|&p| {
                let (x, y) = self.map(p);
                format!("{x:.3},{y:.3}")
            })
            .collect::<Vec<_>>()
            .join(" ")
    }

    pub fn polyline(&mut self, pts: &[Point2], stroke: &str, width: f64, closed: bool) {
        let tag = if closed { "polygon" } else { "polyline" };
        let _ = writeln!(
            self.body,
            r#"<{tag} points="{}" fill="none" stroke="{stroke}" stroke-width="{width}"/>"#,
            self.coords(pts)
        );
    }

    pub fn polygon(&mut self, pts: &[Point2], fill: &str, stroke: &str) {
        let _ = writeln!(
            self.body,
            r#"<polygon points="{}" fill="{fill}" stroke="{stroke}" stroke-width="0.5"/>"#,
            self.coords(pts)
        );
    }

    pub fn marker(&mut self, p: Point2, color: &str) {
        let (x, y) = self.map(p);
        let _ = writeln!(self.body, r#"<circle cx="{x:.3}" cy="{y:.3}" r="4" fill="{color}"/>"#);
    }

    pub fn label(&mut self, text: &str) {
        let _ = writeln!(self.body, r#"<text x="8" y="18" font-family="monospace" font-size="13">{text}</text>"#);
    }

    pub fn finish(self) -> String {
        format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{SIZE}\" height=\"{SIZE}\" viewBox=\"0 0 {SIZE} {SIZE}\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n{}</svg>\n",
            self.body
        )
    }
}

/// Image of the region boundary with the target marked.
pub fn degree_svg(f: &dyn SampledMap, region: &Region, report: &DegreeReport) -> String {
    let samples = region.boundary().sample_uniform(report.boundary_samples.clamp(64, 8192));
    let image: Vec<Point2> = samples.iter().map(|&x| f.eval(x)).collect();
    let mut svg = Svg::new(BBox::of(image.iter().copied().chain([report.target])));
    svg.polyline(&image, "#1f5fa8", 1.2, true);
    svg.marker(report.target, "#c0392b");
    svg.label(&format!("degree {}", report.degree));
    svg.finish()
}

/// The two branch tracks, with their starting points marked.
pub fn branch_svg(track: &BranchTrack) -> String {
    let mut svg = Svg::new(BBox::of(track.y1.iter().chain(&track.y2).copied()));
    svg.polyline(&track.y1, "#1f5fa8", 1.5, false);
    svg.polyline(&track.y2, "#d35400", 1.5, false);
    svg.marker(track.y1[0], "#1f5fa8");
    svg.marker(track.y2[0], "#d35400");
    svg.label(&format!("eps_loop {} steps {}", track.eps_loop, track.steps));
    svg.finish()
}

/// Image triangles of a PL map; with a failing certificate the witness
/// pair is filled red.
pub fn plmap_svg(h: &PLMap, certificate: Option<&InjectivityCertificate>) -> String {
    let mut svg = Svg::new(h.image_bbox());
    let highlighted: Vec<usize> = match certificate.map(|c| &c.verdict) {
        Some(InjectivityVerdict::Fail { witness }) => vec![witness.first, witness.second],
        Some(InjectivityVerdict::Degenerate { triangles }) => triangles.clone(),
        _ => Vec::new(),
    };
    for t in 0..h.complex().num_triangles() {
        if !highlighted.contains(&t) {
            svg.polygon(&h.image_points(t), "#e8eef7", "#5a6f8f");
        }
    }
    for &t in &highlighted {
        svg.polygon(&h.image_points(t), "#e74c3c", "#7b241c");
    }
    if let Some(c) = certificate {
        svg.label(&format!("{} triangles, {} pairs checked", c.triangles, c.checked_pairs));
    }
    svg.finish()
}
