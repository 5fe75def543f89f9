//! Scalar abstraction shared by every numeric routine in the crate.

use std::fmt::{Debug, Display, LowerExp};
use std::iter::Sum;

use ndarray::LinalgScalar;
use num_traits::{Float, FloatConst, NumAssign, ToPrimitive};
use rustfft::FftNum;

/// Floating-point scalar usable in kernels, solvers and FFTs.
///
/// Implemented by `f32` and `f64` through the blanket impl.
pub trait Real:
    Float
    + FloatConst
    + NumAssign
    + Sum
    + ToPrimitive
    + LinalgScalar
    + FftNum
    + Display
    + LowerExp
    + Debug
{
}

impl<T> Real for T where
    T: Float
        + FloatConst
        + NumAssign
        + Sum
        + ToPrimitive
        + LinalgScalar
        + FftNum
        + Display
        + LowerExp
        + Debug
{
}

/// Shorthand for converting an `f64` literal into the working scalar.
#[inline]
pub fn cast<T: Real>(x: f64) -> T {
    T::from_f64(x).expect("f64 literal representable in scalar type")
}
