use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::plmap::PLMap;
use crate::geometry::{classify_pair, ViolatingPair};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum InjectivityVerdict {
    Pass,
    Fail { witness: ViolatingPair },
    /// Some image triangle has zero area; pairs were not classified.
    Degenerate { triangles: Vec<usize> },
}

/// Safety margins of the approximation that produced the map.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThetaBudget {
    pub eps: f64,
    pub inj_radius: f64,
    pub refinement_level: usize,
    pub d: usize,
    /// `min_sigma theta_sigma`.
    pub delta1: f64,
    pub theta_min: f64,
    pub theta_max: f64,
    /// Triangle attaining `theta_min`.
    pub theta_argmin: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InjectivityCertificate {
    #[serde(flatten)]
    pub verdict: InjectivityVerdict,
    /// Number of triangle pairs sharing a vertex or an edge that were
    /// classified (each pair once).
    pub checked_pairs: usize,
    pub triangles: usize,
    /// Triangles whose image orientation is preserved / reversed.
    pub preserving: usize,
    pub reversing: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theta: Option<ThetaBudget>,
}

impl InjectivityCertificate {
    pub fn passed(&self) -> bool {
        self.verdict == InjectivityVerdict::Pass
    }
}

/// Exact check that the images of any two triangles sharing a face meet
/// exactly in the image of that face.
pub fn verify_local_injectivity(h: &PLMap) -> InjectivityCertificate {
    let c = h.complex();
    let nt = c.num_triangles();
    let orient: Vec<i32> = (0..nt).map(|t| h.image_orientation(t)).collect();
    let preserving = orient.iter().filter(|&&o| o > 0).count();
    let reversing = orient.iter().filter(|&&o| o < 0).count();
    let degenerate: Vec<usize> = (0..nt).filter(|&t| orient[t] == 0).collect();
    if !degenerate.is_empty() {
        return InjectivityCertificate {
            verdict: InjectivityVerdict::Degenerate { triangles: degenerate },
            checked_pairs: 0,
            triangles: nt,
            preserving,
            reversing,
            theta: None,
        };
    }
    let stars = c.vertex_stars();
    let per: Vec<(usize, Option<ViolatingPair>)> = (0..nt)
        .into_par_iter()
        .map(|t| {
            let ip = c.triangles()[t].0;
            let p = h.image_points(t);
            let mut count = 0;
            for s in c.adjacent_triangles(&stars, t) {
                if s <= t {
                    continue;
                }
                count += 1;
                if let Some(kind) = classify_pair(p, ip, h.image_points(s), c.triangles()[s].0) {
                    return (
                        count,
                        Some(ViolatingPair {
                            first: t,
                            second: s,
                            kind,
                        }),
                    );
                }
            }
            (count, None)
        })
        .collect();
    let checked_pairs = per.iter().map(|x| x.0).sum();
    let verdict = match per.into_iter().find_map(|x| x.1) {
        Some(witness) => InjectivityVerdict::Fail { witness },
        None => InjectivityVerdict::Pass,
    };
    InjectivityCertificate {
        verdict,
        checked_pairs,
        triangles: nt,
        preserving,
        reversing,
        theta: None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::meshes::unit_square;
    use crate::geometry::{pt, PairViolation};
    use crate::maps::Identity;

    #[test]
    fn identity_passes() {
        let h = PLMap::interpolate(&Identity, unit_square()).unwrap();
        let c = verify_local_injectivity(&h);
        assert!(c.passed());
        assert_eq!(c.checked_pairs, 1);
    }

    #[test]
    fn reflected_vertex_folds() {
        // square diagonal (0,0)-(1,1); reflect vertex 3 = (0,1) across it
        let c = unit_square();
        let images = vec![pt(0., 0.), pt(1., 0.), pt(1., 1.), pt(1., 0.2)];
        let h = PLMap::new(c, images).unwrap();
        let cert = verify_local_injectivity(&h);
        assert_eq!(
            cert.verdict,
            InjectivityVerdict::Fail {
                witness: ViolatingPair {
                    first: 0,
                    second: 1,
                    kind: PairViolation::Overlap
                }
            }
        );
    }

    #[test]
    fn degenerate_image_reported() {
        let images = vec![pt(0., 0.), pt(1., 0.), pt(2., 0.), pt(0., 1.)];
        let h = PLMap::new(unit_square(), images).unwrap();
        assert!(matches!(
            verify_local_injectivity(&h).verdict,
            InjectivityVerdict::Degenerate { .. }
        ));
    }
}
