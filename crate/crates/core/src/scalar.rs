//! Scalar abstractions.
//!
//! [`Scalar`] is the ordered-field interface the rounding logic needs; it is
//! implemented by `f32`, `f64` and exact rationals such as
//! [`num_rational::BigRational`]. [`Real`] adds the transcendental functions
//! required for state sampling and linear algebra.

use std::fmt::Debug;

use num_traits::{Float, FromPrimitive, Num, Signed, ToPrimitive};

/// An ordered field element. Exact types are welcome here.
pub trait Scalar: Num + Signed + FromPrimitive + Clone + PartialOrd + Debug + Send + Sync {}

impl<T> Scalar for T where T: Num + Signed + FromPrimitive + Clone + PartialOrd + Debug + Send + Sync
{}

/// A floating point scalar (`f32` or `f64`).
pub trait Real: Scalar + Float + ToPrimitive + Copy + Default + 'static {}

impl Real for f32 {}
impl Real for f64 {}

/// Converts a primitive count into any scalar. Panics only if `T` cannot
/// represent small integers, which no supported scalar does.
pub(crate) fn from_usize<T: Scalar>(n: usize) -> T {
    T::from_usize(n).expect("scalar must represent small integers")
}

pub(crate) fn from_u64<T: Scalar>(n: u64) -> T {
    T::from_u64(n).expect("scalar must represent integers")
}

pub(crate) fn from_f64<T: Real>(x: f64) -> T {
    <T as num_traits::NumCast>::from(x).expect("finite f64 converts to any float")
}

pub(crate) fn to_f64<T: Real>(x: T) -> f64 {
    ToPrimitive::to_f64(&x).unwrap_or(f64::NAN)
}
