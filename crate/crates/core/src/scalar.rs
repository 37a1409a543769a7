use std::fmt::{Debug, Display};

use num_traits::{Float, FloatConst, FromPrimitive, NumCast};

/// Floating point scalar the scale-function machinery is generic over: f32 or f64.
pub trait Scalar:
    Float + FloatConst + FromPrimitive + NumCast + Debug + Display + Default + Send + Sync + 'static
{
    /// Converts an `f64` literal. Every value used this way is representable in f32 and f64.
    #[inline]
    fn lit(v: f64) -> Self {
        <Self as NumCast>::from(v).expect("literal representable in scalar type")
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        <f64 as NumCast>::from(self).unwrap_or(f64::NAN)
    }

    /// Number of binary digits in the mantissa.
    fn mantissa_bits() -> u32;
}

impl Scalar for f32 {
    fn mantissa_bits() -> u32 {
        f32::MANTISSA_DIGITS
    }
}

impl Scalar for f64 {
    fn mantissa_bits() -> u32 {
        f64::MANTISSA_DIGITS
    }
}

#[inline]
pub(crate) fn half<T: Scalar>() -> T {
    T::lit(0.5)
}
