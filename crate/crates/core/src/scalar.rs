//! Scalar abstraction shared by the linear-algebra and control layers.

use nalgebra::RealField;
use num_traits::{FromPrimitive, ToPrimitive};

/// Real floating-point scalar usable as the base field of complex matrices.
///
/// Implemented for `f32` and `f64`. The default tolerance is what the
/// structural predicates (`is_hermitian`, `is_unitary`, ...) use when no
/// explicit tolerance is passed.
pub trait Real: RealField + Copy + FromPrimitive + ToPrimitive {
    fn default_tol() -> Self;

    /// Lossy conversion from an `f64` literal.
    #[inline]
    fn lit(x: f64) -> Self {
        <Self as FromPrimitive>::from_f64(x).expect("f64 literal representable")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Real for f64 {
    fn default_tol() -> Self {
        1e-10
    }
}

impl Real for f32 {
    fn default_tol() -> Self {
        1e-4
    }
}
