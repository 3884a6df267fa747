//! Scalar fields: the library works over the reals or the complex numbers,
//! both in double precision.

use nalgebra::ComplexField;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

/// Double-precision complex scalar.
pub type Complex64 = nalgebra::Complex<f64>;

/// Tag identifying the scalar field of a frame file or a computation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FieldTag {
    Real,
    Complex,
}

impl std::fmt::Display for FieldTag {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            FieldTag::Real => write!(f, "real"),
            FieldTag::Complex => write!(f, "complex"),
        }
    }
}

/// Scalar type a fusion frame can be built over.
///
/// Implemented for `f64` and [`Complex64`]. All norms, traces and weights are
/// reported as `f64` regardless of the field.
pub trait FrameScalar: ComplexField<RealField = f64> + Copy + 'static {
    const FIELD: FieldTag;

    /// Draws one standard-normal sample. For the complex field the real and
    /// imaginary parts are independent standard normals, which keeps the
    /// induced column-space distribution rotation invariant.
    fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> Self;
}

impl FrameScalar for f64 {
    const FIELD: FieldTag = FieldTag::Real;

    fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> Self {
        rng.sample(StandardNormal)
    }
}

impl FrameScalar for Complex64 {
    const FIELD: FieldTag = FieldTag::Complex;

    fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> Self {
        Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
    }
}
