//! Scalar abstraction over the floating-point element type.

use nalgebra::RealField;
use num_traits::FromPrimitive;

/// Floating-point scalar usable throughout the crate.
///
/// Implemented for `f32` and `f64`. The stated accuracy targets of the
/// numerical kernels assume `f64`; `f32` instantiations are supported but
/// limited by the working precision.
pub trait Scalar: RealField + FromPrimitive + Copy {
    /// Lossy conversion from `f64`.
    fn cst(v: f64) -> Self;
    /// Lossy conversion to `f64`.
    fn to_f64(self) -> f64;
    /// Conversion from a count.
    fn from_count(n: usize) -> Self {
        Self::cst(n as f64)
    }
    fn floor_s(self) -> Self;
    fn is_finite_s(self) -> bool;
}

impl Scalar for f64 {
    #[inline]
    fn cst(v: f64) -> Self {
        v
    }
    #[inline]
    fn to_f64(self) -> f64 {
        self
    }
    #[inline]
    fn floor_s(self) -> Self {
        self.floor()
    }
    #[inline]
    fn is_finite_s(self) -> bool {
        self.is_finite()
    }
}

impl Scalar for f32 {
    #[inline]
    fn cst(v: f64) -> Self {
        v as f32
    }
    #[inline]
    fn to_f64(self) -> f64 {
        self as f64
    }
    #[inline]
    fn floor_s(self) -> Self {
        self.floor()
    }
    #[inline]
    fn is_finite_s(self) -> bool {
        self.is_finite()
    }
}
