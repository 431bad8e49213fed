use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::ops::{AddAssign, DivAssign, MulAssign, SubAssign};

use ndarray::{LinalgScalar, ScalarOperand};
use num_traits::Float;

/// Floating-point type the network and adapter can be computed in. Training
/// uses `f32`; gradient checks use `f64`.
pub trait Real:
    Float
    + LinalgScalar
    + ScalarOperand
    + Sum
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
    + Debug
    + Display
    + Default
    + Send
    + Sync
    + 'static
{
    fn of(x: f64) -> Self;
    fn of_f32(x: f32) -> Self;
    fn to_f32_lossy(self) -> f32;
    fn to_f64_lossless(self) -> f64;
}

impl Real for f32 {
    fn of(x: f64) -> Self {
        x as f32
    }
    fn of_f32(x: f32) -> Self {
        x
    }
    fn to_f32_lossy(self) -> f32 {
        self
    }
    fn to_f64_lossless(self) -> f64 {
        self as f64
    }
}

impl Real for f64 {
    fn of(x: f64) -> Self {
        x
    }
    fn of_f32(x: f32) -> Self {
        x as f64
    }
    fn to_f32_lossy(self) -> f32 {
        self as f32
    }
    fn to_f64_lossless(self) -> f64 {
        self
    }
}
