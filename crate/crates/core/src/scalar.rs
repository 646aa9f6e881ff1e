//! Scalar abstraction shared by the geometry modules.

use std::fmt::{Debug, Display};

use num_traits::{Float, FloatConst, FromPrimitive, NumCast};

/// Floating point scalar used by the camera algebra: `f32` or `f64`.
///
/// The tolerances quoted throughout the crate assume `f64`; `f32` is supported
/// for embedding export and other places where single precision is enough.
pub trait Real:
    Float + FloatConst + FromPrimitive + NumCast + Default + Debug + Display + Send + Sync + 'static
{
    /// Converts an `f64` literal. Never fails for finite inputs.
    #[inline]
    fn lit(x: f64) -> Self {
        <Self as NumCast>::from(x).expect("finite literal")
    }

    #[inline]
    fn to_f64_lossless(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Relative difference `|a - b| / max(|a|, |b|, tiny)`.
pub fn rel_diff<T: Real>(a: T, b: T) -> T {
    let scale = a.abs().max(b.abs()).max(T::min_positive_value());
    (a - b).abs() / scale
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rel_diff_basics() {
        assert_eq!(rel_diff(2.0_f64, 2.0), 0.0);
        assert!((rel_diff(1.0_f64, 1.1) - 0.1 / 1.1).abs() < 1e-15);
        assert_eq!(rel_diff(0.0_f32, 0.0), 0.0);
    }
}
