//! Floating-point abstraction shared by the deterministic engines.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// Real scalar type the analytic engine is generic over: `f32` or `f64`.
pub trait Scalar:
    Float + FloatConst + FromPrimitive + ToPrimitive + Sum + Debug + Display + Send + Sync + 'static
{
    /// Relative tolerance requested by default from the adaptive integrators.
    fn default_rel_tol() -> Self;
    /// Absolute tolerance requested by default from the adaptive integrators.
    fn default_abs_tol() -> Self;
    /// Term-size threshold at which hypergeometric series are truncated.
    fn series_eps() -> Self;
}

impl Scalar for f64 {
    fn default_rel_tol() -> Self {
        1e-8
    }
    fn default_abs_tol() -> Self {
        1e-12
    }
    fn series_eps() -> Self {
        1e-12
    }
}

impl Scalar for f32 {
    fn default_rel_tol() -> Self {
        1e-5
    }
    fn default_abs_tol() -> Self {
        1e-7
    }
    fn series_eps() -> Self {
        1e-7
    }
}

/// Converts an `f64` literal into `T`.
#[inline]
pub fn lit<T: Scalar>(x: f64) -> T {
    T::from_f64(x).expect("f64 literal representable in scalar type")
}

#[inline]
pub(crate) fn to_f64<T: Scalar>(x: T) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}
