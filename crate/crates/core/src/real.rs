//! Scalar abstraction for the numerical kernels.
//!
//! Everything in this crate is generic over [`Real`], so the same formulas
//! run in `f32` or `f64`. The crate-root type aliases fix `f64`, which is
//! what the CLI and the verification suites use.

use std::fmt;
use std::ops::{AddAssign, DivAssign, MulAssign, SubAssign};

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating-point scalar: `f32` or `f64`.
pub trait Real:
    Float
    + FromPrimitive
    + ToPrimitive
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
    + fmt::Debug
    + fmt::Display
    + Default
    + Send
    + Sync
    + 'static
{
    /// Lift an `f64` literal into `Self`. Panics only for non-finite input
    /// that the target type cannot represent, which never happens for the
    /// compile-time constants this is used with.
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("literal not representable")
    }

    /// Lift a nonnegative index (photon/phonon number) into `Self`.
    fn from_index(n: usize) -> Self {
        Self::from_usize(n).expect("index not representable")
    }

    /// Largest exponent `x` such that `exp(x)` is still finite, with a small
    /// safety margin. Used by the series-overflow guards.
    fn exp_overflow_threshold() -> Self {
        Self::max_value().ln() - Self::lit(1.0)
    }

    fn pi() -> Self {
        Self::lit(std::f64::consts::PI)
    }
}

impl Real for f32 {}
impl Real for f64 {}
