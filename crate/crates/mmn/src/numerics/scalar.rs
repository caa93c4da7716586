//! Element type abstraction: f32 for training, f64 for gradient checking.

use std::fmt::{Debug, Display};

use num_traits::Float;

/// Floating-point element of a [`super::Tensor`].
///
/// Training runs in `f32`; finite-difference gradient checks need `f64`
/// precision, so everything numeric is generic over this trait.
pub trait Scalar:
    Float + num_traits::NumAssignOps + Debug + Display + Default + Send + Sync + 'static
{
    fn from_f64(x: f64) -> Self;
    fn as_f64(self) -> f64;
}

impl Scalar for f32 {
    #[inline]
    fn from_f64(x: f64) -> Self {
        x as f32
    }
    #[inline]
    fn as_f64(self) -> f64 {
        self as f64
    }
}

impl Scalar for f64 {
    #[inline]
    fn from_f64(x: f64) -> Self {
        x
    }
    #[inline]
    fn as_f64(self) -> f64 {
        self
    }
}
