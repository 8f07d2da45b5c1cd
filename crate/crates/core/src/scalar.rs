//! Scalar abstraction shared by every numerical module.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};
use rustfft::FftNum;
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Real floating-point scalar: `f32` or `f64`.
///
/// Everything in this crate is written against this bound. Double precision is
/// the reference; the single-precision instantiation is usable for waveform
/// work but will not meet the tighter closure and round-trip tolerances.
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + FftNum
    + Sum
    + Default
    + Debug
    + Display
    + Serialize
    + DeserializeOwned
    + Send
    + Sync
    + 'static
{
    /// Lossy conversion from an `f64` literal.
    #[inline]
    fn lit(x: f64) -> Self {
        <Self as FromPrimitive>::from_f64(x).expect("f64 literal representable")
    }

    #[inline]
    fn from_usize_lossy(n: usize) -> Self {
        <Self as FromPrimitive>::from_usize(n).expect("usize representable")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        ToPrimitive::to_f64(&self).unwrap_or(f64::NAN)
    }

    /// Round half to even.
    fn round_half_even(self) -> Self {
        let r = self.round();
        let half = Self::lit(0.5);
        if (self - self.trunc()).abs() == half {
            let two = Self::lit(2.0);
            let down = r - self.signum();
            if (r / two).fract() == Self::zero() {
                r
            } else {
                down
            }
        } else {
            r
        }
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// `2π` in the working precision.
#[inline]
pub(crate) fn two_pi<T: Real>() -> T {
    T::lit(2.0) * T::PI()
}

/// Fractional part of `f·t` computed in double precision, returned as a phase
/// in `[0, 2π)`. Long records at GHz sample rates accumulate phases of order
/// 10^4 rad; reducing before the cast keeps `f32` usable.
#[inline]
pub(crate) fn cycle_phase<T: Real>(freq_hz: f64, time_s: f64) -> T {
    let cycles = freq_hz * time_s;
    T::lit(2.0 * std::f64::consts::PI * (cycles - cycles.floor()))
}
