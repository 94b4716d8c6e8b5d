//! Mollification of PL maps and the smooth and polynomial stages built on it.
//!
//! A [`MollifiedMap`] convolves a PL map with the bump kernel of radius
//! `delta2` from [`choose_deltas`]. Away from the vertex balls the kernel
//! meets at most two triangles, so its Jacobian is a convex combination of
//! two linear parts agreeing on the shared edge, which [`det_convex_check`]
//! shows to have positive determinant. [`certify_jacobian`] samples that
//! claim; [`poly_fit_simultaneous`] then replaces the smooth map by a
//! polynomial close in value and first derivatives.

mod certify;
mod deltas;
mod kernel;
mod mollify;
mod polyfit;

pub use certify::{
    certify_jacobian, classify_sample, det_convex_check, grid_points, ConvexVerdict, ExcludedZones, JacobianCertificate,
    JacobianVerdict, SampleZone, SHARED_VECTOR_TOL,
};
pub use deltas::{choose_deltas, min_triangle_angle, vertex_edge_distance, Deltas, DELTA_FLOOR};
pub use kernel::{bump, bump_constant, cartesian_bump_mass, gauss_legendre, kernel_normalize, BumpKernel, PolarRule};
pub use mollify::{
    extend_domain, majority_orientation, mollify, mollify_jacobian, mollify_jacobian_with, mollify_with, Estimate,
    MollifiedMap, QuadratureSpec,
};
pub use polyfit::{
    derivative_tolerance, fit_errors, poly_fit_simultaneous, poly_fit_up_to, FitSamples, JacobianAgreement, PolyFit,
    PolynomialMap2, MAX_FIT_DEGREE,
};
