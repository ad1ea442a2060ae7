//! Scalar abstractions.
//!
//! Exact evaluation (read-once evaluation, influences, enumeration) only
//! needs ring arithmetic, so it is written against [`Scalar`] and works for
//! `f32`, `f64` and exact rationals alike. Anything that takes roots or
//! logarithms (dissociation frontiers, gradient steps) needs [`Real`].

use std::fmt::{Debug, Display};

use num_traits::{Float, FromPrimitive, Num};

/// A number usable as a probability in exact computations.
pub trait Scalar: Num + Clone + PartialOrd + Debug {}

impl<T: Num + Clone + PartialOrd + Debug> Scalar for T {}

/// Floating point scalar: `f32` or `f64`.
pub trait Real: Scalar + Float + FromPrimitive + Display + Send + Sync + 'static {
    /// Converts an `f64` literal. Every `Real` can represent (a rounding of)
    /// any finite `f64`, so this never fails.
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("finite literal")
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Probability of `x` failing, `1 - x`.
#[inline]
pub(crate) fn complement<T: Scalar>(x: &T) -> T {
    T::one() - x.clone()
}

/// Clamps `x` into `[0, 1]`.
#[inline]
pub(crate) fn clamp_unit<T: Real>(x: T) -> T {
    x.max(T::zero()).min(T::one())
}
