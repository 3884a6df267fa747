//! Numerical toolkit for finite fusion frames.
//!
//! A fusion frame is a weighted family of subspaces of R^d or C^d. This crate
//! computes the fusion frame potential `tr(S^2)` of such a family, minimizes
//! it over configurations with fixed subspace dimensions and weights, and
//! verifies the spectral structure that globally minimal configurations must
//! carry: a partition of the members by eigenvalue of the frame operator, an
//! orthogonal prefix determined by the irregularity of the weight sequence,
//! and a tight remainder on the orthogonal complement.

pub mod construct;
pub mod curve;
pub mod field;
pub mod frame;
pub mod io;
pub mod irregularity;
pub mod optimizer;
pub mod spectral;

pub use field::{Complex64, FieldTag, FrameScalar};
pub use frame::{
    frame_distance, random_frame, random_unitary, subspace_distance, DimProfile, FrameError,
    FusionFrame, Subspace,
};
