//! Scalar abstraction for the numeric core.

use std::fmt;
use std::iter::Sum;

use num_traits::{Float, FromPrimitive};

/// Floating-point scalar the core math is generic over (`f32` or `f64`).
///
/// Blanket-implemented for every type satisfying the bounds.
pub trait Scalar:
    Float + FromPrimitive + Sum<Self> + fmt::Debug + fmt::Display + Default + Send + Sync + 'static
{
}

impl<T> Scalar for T where
    T: Float + FromPrimitive + Sum<T> + fmt::Debug + fmt::Display + Default + Send + Sync + 'static
{
}

/// Converts an `f64` constant into `T`, panicking only for constants that do
/// not fit (none of the crate's constants are outside `f32` range).
pub(crate) fn cast<T: Scalar>(value: f64) -> T {
    T::from_f64(value).expect("numeric constant representable in scalar type")
}

/// Euclidean norm of a slice.
pub(crate) fn norm2<T: Scalar>(v: &[T]) -> T {
    v.iter().map(|&x| x * x).sum::<T>().sqrt()
}

/// Largest absolute entry of a slice (zero for an empty slice).
#[cfg(test)]
pub(crate) fn max_abs<T: Scalar>(v: &[T]) -> T {
    v.iter().fold(T::zero(), |acc, &x| acc.max(x.abs()))
}
