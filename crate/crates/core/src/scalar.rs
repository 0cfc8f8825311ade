//! Scalar abstraction shared by the channel, aperture, quadrature and metric code.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// Floating point scalar used by the scalar-only models: `f32` or `f64`.
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + Sum
    + Debug
    + Display
    + Default
    + Send
    + Sync
    + 'static
{
    /// Unit roundoff of the type.
    const EPS: Self;

    /// Complementary error function.
    fn erfc(self) -> Self;

    /// Lossless-enough conversion from an `f64` literal.
    #[inline]
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("f64 literal representable")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().expect("finite scalar converts to f64")
    }
}

impl Real for f64 {
    const EPS: Self = f64::EPSILON;

    fn erfc(self) -> Self {
        libm::erfc(self)
    }
}

impl Real for f32 {
    const EPS: Self = f32::EPSILON;

    fn erfc(self) -> Self {
        libm::erfcf(self)
    }
}

/// Standard normal CDF.
pub fn std_normal_cdf<T: Real>(x: T) -> T {
    T::lit(0.5) * (-x / T::SQRT_2()).erfc()
}

/// Standard Gaussian tail probability `Q(x) = P(Z > x)`.
pub fn q_function<T: Real>(x: T) -> T {
    T::lit(0.5) * (x / T::SQRT_2()).erfc()
}

/// Standard normal density.
pub fn std_normal_pdf<T: Real>(x: T) -> T {
    (-(x * x) / T::lit(2.0)).exp() / (T::lit(2.0) * T::PI()).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normal_cdf_reference_points() {
        assert!((std_normal_cdf(0.0f64) - 0.5).abs() < 1e-16);
        // Phi(1.959963984540054) = 0.975
        assert!((std_normal_cdf(1.959963984540054f64) - 0.975).abs() < 1e-14);
        assert!((q_function(1.959963984540054f64) - 0.025).abs() < 1e-14);
        assert!((std_normal_cdf(0.5f32) - 0.691_462_5).abs() < 1e-6);
    }

    #[test]
    fn q_tail_keeps_relative_accuracy() {
        // Q(7) = 1.279812543885835e-12
        let q = q_function(7.0f64);
        assert!((q / 1.279812543885835e-12 - 1.0).abs() < 1e-12);
    }
}
