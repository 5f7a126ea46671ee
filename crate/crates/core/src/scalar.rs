//! Scalar abstraction shared by every numerical routine in the crate.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Floating point type the library is generic over: `f32` or `f64`.
///
/// Tolerances throughout the crate are written for double precision. They are
/// widened through [`Scalar::tol`] so that single precision does not trip
/// checks that are below its resolution.
pub trait Scalar:
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
    + Serialize
    + DeserializeOwned
    + 'static
{
    /// Converts an `f64` literal. Panics only if the target type cannot hold
    /// finite `f64` values, which never happens for `f32`/`f64`.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("finite literal")
    }

    #[inline]
    fn of_usize(n: usize) -> Self {
        Self::from_usize(n).expect("usize fits in a float")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().expect("float converts to f64")
    }

    /// `max(base, 1024 * epsilon)`: a double-precision tolerance floored at the
    /// resolution of `Self`.
    #[inline]
    fn tol(base: f64) -> Self {
        let floor = Self::epsilon() * Self::lit(1024.0);
        Self::lit(base).max(floor)
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Neumaier compensated sum.
pub fn compensated_sum<T: Scalar>(values: impl IntoIterator<Item = T>) -> T {
    let mut sum = T::zero();
    let mut comp = T::zero();
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp = comp + ((sum - t) + v);
        } else {
            comp = comp + ((v - t) + sum);
        }
        sum = t;
    }
    sum + comp
}
