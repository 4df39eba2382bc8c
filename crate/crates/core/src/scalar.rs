//! Floating-point abstraction for the numerical kernels.
//!
//! All core math is generic over [`Scalar`] so the same code runs at `f32`
//! or `f64`; the crate root exports `f64` aliases, which is what the
//! benchmark and CLI use.

use std::fmt::{Debug, Display, LowerExp};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, NumAssign};

/// Floating point scalar: `f32` or `f64`.
pub trait Scalar:
    Float
    + FloatConst
    + FromPrimitive
    + NumAssign
    + Sum
    + Debug
    + Display
    + LowerExp
    + Send
    + Sync
    + 'static
{
    /// Tolerance for structural identities: hermiticity defects, POVM
    /// completeness, unit traces.
    const STRUCTURAL_TOL: Self;
    /// Tolerance for normalization checks on probability vectors.
    const DISTRIBUTION_TOL: Self;
    /// Slack allowed below zero for eigenvalues of nominally PSD operators.
    const PSD_TOL: Self;

    /// Convert an `f64` constant to this scalar type.
    #[inline]
    fn real(v: f64) -> Self {
        Self::from_f64(v).expect("finite f64 constant")
    }
}

impl Scalar for f32 {
    const STRUCTURAL_TOL: Self = 1e-5;
    const DISTRIBUTION_TOL: Self = 1e-4;
    const PSD_TOL: Self = 1e-4;
}

impl Scalar for f64 {
    const STRUCTURAL_TOL: Self = 1e-12;
    const DISTRIBUTION_TOL: Self = 1e-9;
    const PSD_TOL: Self = 1e-10;
}
