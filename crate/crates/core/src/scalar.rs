//! Floating-point scalar abstraction.
//!
//! Every numeric routine in this crate is written against [`Real`], so the
//! engine runs in `f64` (the default aliases at the crate root) or in `f32`
//! for memory-bound experiments. The subset-sum transform only needs ring
//! operations and is additionally usable with exact rationals.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating point types the engine is instantiated with (`f32`, `f64`).
pub trait Real:
    Float + FromPrimitive + ToPrimitive + Sum + Debug + Display + Default + Send + Sync + 'static
{
    /// Converts an `f64` literal into the scalar type.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable in scalar type")
    }

    /// Converts a count into the scalar type.
    #[inline]
    fn from_count(n: usize) -> Self {
        Self::from_usize(n).expect("count representable in scalar type")
    }

    /// Absolute slack used when comparing utilities for ties.
    #[inline]
    fn tie_tolerance() -> Self {
        Self::epsilon() * Self::lit(64.0)
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// `x * log2(x)` with the `0 log 0 = 0` convention.
#[inline]
pub(crate) fn xlog2x<T: Real>(x: T) -> T {
    if x <= T::zero() {
        T::zero()
    } else {
        x * x.log2()
    }
}
