//! Secure target localization from two-way time-of-arrival ranges when some
//! anchors are subject to distance-enlargement spoofing.
//!
//! The crate is organised bottom-up:
//!
//! - [`geometry`]: circle intersections and cluster compactness.
//! - [`measurement`]: range generation under noise and attack, sample reduction.
//! - [`detection`]: honest-point clustering, weighted central mass and
//!   relative-error thresholding.
//! - [`gtrs`]: the weighted squared-range problem solved exactly by bisection.
//! - [`pipeline`]: the full detect-then-localize procedure.
//! - [`theory`]: closed-form bounds on the probability of detection.
//! - [`baseline`]: weighted least squares with a GLRT attack detector.

pub mod baseline;
pub mod detection;
pub mod geometry;
pub mod gtrs;
pub mod linalg;
pub mod measurement;
pub mod pipeline;
pub mod theory;

mod error;

pub use error::{Error, Result};
pub use geometry::{Circle, CircleRelation, Point};

/// Spatial dimension of the network. Everything here is planar.
pub const DIM: usize = 2;

/// Minimum number of anchors needed to fix a position in the plane.
pub const MIN_ANCHORS: usize = DIM + 1;
