use thiserror::Error;

use crate::geometry::Point2;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("non-finite coordinate in {0}")]
    NonFinite(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("invalid complex: {0}")]
    InvalidComplex(String),
    #[error("refinement cap {cap} exceeded before reaching {what}")]
    RefinementCap { cap: usize, what: String },
    #[error("target {point} lies on curve segment {segment}")]
    PointOnCurve { point: Point2, segment: usize },
    #[error("boundary is not simple: segments {0} and {1} meet")]
    NonSimpleBoundary(usize, usize),
    #[error("target too close to the boundary image: clearance {clearance:e} at {samples} samples")]
    ClearanceTooSmall { clearance: f64, samples: usize },
    #[error("preimage {point} has |J| = {jacobian:e} below the regularity floor")]
    NotRegular { point: Point2, jacobian: f64 },
    #[error("preimage {0} lies on the region boundary")]
    PreimageOnBoundary(Point2),
    #[error("map does not provide a Jacobian")]
    MissingJacobian,
    #[error("no admissible neighborhood radius at vertex {vertex}: {detail}")]
    NeighborhoodCondition { vertex: usize, detail: String },
    #[error("broken-line routing failed: {0}")]
    TubeRouting(String),
    #[error("theta vanishes on triangle {triangle}: map not injective at this scale")]
    InjectivityScale { triangle: usize },
    #[error("polygon is not simple: segments {0} and {1} meet")]
    NonSimplePolygon(usize, usize),
    #[error("triangulation failed: {0}")]
    Triangulation(String),
    #[error("kernel ball around {0} leaves the extended domain")]
    KernelOutsideDomain(Point2),
    #[error("no feasible delta above the floor: {0}")]
    NoFeasibleDelta(String),
    #[error("degree cap {degree} reached: value error {value_error:e}, derivative error {deriv_error:e}")]
    FitCap { degree: usize, value_error: f64, deriv_error: f64 },
    #[error("branches collide at step {step} (separation {separation:e})")]
    BranchCollision { step: usize, separation: f64 },
    #[error("branch {branch} escapes the unit disk at step {step}")]
    BranchEscape { branch: usize, step: usize },
    #[error("continuation stalled at step {step}")]
    ContinuationStall { step: usize },
    #[error("expected two preimages of the loop start, found {0}")]
    PreimageCount(usize),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
