//! Degree, piecewise-linear approximation and smoothing of planar maps.
//!
//! The modules follow the data flow of the toolkit: [`geometry`] holds
//! triangulations and exact predicates, [`degree`] computes Brouwer degrees,
//! [`pl_approx`] builds locally injective PL approximations,
//! [`smoothing`] mollifies PL maps and fits polynomials, and [`obstruction`]
//! tests the one-quarter distance bound on branched covers.

pub mod degree;
pub mod error;
pub mod geometry;
pub mod maps;
pub mod pl_approx;
pub mod obstruction;
pub mod smoothing;

pub use error::{Error, Result};
