//! Planar primitives, simplicial complexes and subdivisions.

mod complex;
pub mod meshes;
mod point;
mod polyline;
pub mod predicates;
mod subdivision;

pub use complex::{
    classify_pair, combinatorial_distance, edge_key, validate_complex, Edge, PairViolation,
    SimplicialComplex, Triangle, TriangleGrid, ValidationReport, ViolatingPair,
};
pub use point::{pt, Mat2, Point2};
pub use polyline::ClosedPolyline;
pub use predicates::{orient2d, orientation, BBox, Orientation};
pub use subdivision::{
    barycentric_lattice, edgewise_subdivide, image_diameter, point_set_diameter, refine_until,
    Refinement, Subdivision, IMAGE_LATTICE,
};
