//! Scalar abstractions.
//!
//! [`Scalar`] is the minimal field interface: enough for Taylor rows and
//! exact Gauss-Jordan inversion, so stencil weights can be produced in exact
//! rational arithmetic. [`Real`] adds the floating point operations needed by
//! the SVD, geometry and time stepping.

use std::fmt::{Debug, Display, LowerExp};
use std::iter::Sum;
use std::ops::Neg;

use num_traits::{Float, FromPrimitive, Num, Signed};

/// Field element usable for exact or floating point stencil construction.
pub trait Scalar:
    Clone + PartialEq + PartialOrd + Debug + Num + Signed + Neg<Output = Self> + FromPrimitive + Send + Sync + 'static
{
    fn from_int(value: i64) -> Self {
        Self::from_i64(value).expect("integer conversion")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}
impl Scalar for num_rational::Ratio<i64> {}
impl Scalar for num_rational::Ratio<i128> {}

/// Floating point scalar used for the numerical pipeline.
pub trait Real: Scalar + Float + Copy + Sum + Display + LowerExp + Default {
    /// Converts an `f64` literal.
    #[inline]
    fn lit(value: f64) -> Self {
        Self::from_f64(value).expect("f64 conversion")
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// Converts a count or index.
    #[inline]
    fn from_usize_lossy(value: usize) -> Self {
        Self::from_usize(value).expect("usize conversion")
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Exact rational scalar used to check classic stencil weights.
pub type Rational = num_rational::Ratio<i64>;
