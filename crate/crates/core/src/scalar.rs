//! Scalar abstraction: every metric quantity in the crate is generic over
//! [`Scalar`], implemented for `f32` and `f64`.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumCast};

/// Floating-point scalar: `f32` or `f64`.
pub trait Scalar:
    Float + FromPrimitive + NumCast + Sum + Debug + Display + Send + Sync + 'static
{
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Converts an `f64` constant into `T`.
///
/// Panics if the value is not representable, which cannot happen for the
/// in-range constants this crate uses.
pub fn cast<T: Scalar>(value: f64) -> T {
    T::from_f64(value).expect("constant representable in scalar type")
}

/// Converts a scalar to `f64` for diagnostics and error payloads.
pub fn to_f64<T: Scalar>(value: T) -> f64 {
    value.to_f64().expect("scalar convertible to f64")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn casts_between_widths() {
        let x: f32 = cast(1.5);
        assert_eq!(x, 1.5f32);
        let y: f64 = cast(1.5);
        assert_eq!(y, 1.5f64);
        assert_eq!(to_f64(2.0f32), 2.0f64);
    }
}
