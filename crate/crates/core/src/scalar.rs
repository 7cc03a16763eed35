//! Scalar abstraction shared by every numeric routine in the crate.

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::str::FromStr;

use num_traits::{Float, FromPrimitive};

/// Floating point scalar: `f32` or `f64`.
///
/// Measures, time samples, and temperatures are all generic over this trait.
/// The entropy of the reference models uses `ln`, which is why the bound is
/// [`Float`] rather than a plain field.
pub trait Scalar:
    Float + FromPrimitive + FromStr + Debug + Display + Default + Sum + Send + Sync + 'static
{
    /// Converts an `f64` literal. Panics only for values the type cannot represent at all.
    fn lit(value: f64) -> Self {
        Self::from_f64(value).expect("literal representable in scalar type")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// Approximate equality with an absolute floor of one.
    fn close_to(self, other: Self, tol: Self) -> bool {
        let scale = Self::one().max(self.abs()).max(other.abs());
        (self - other).abs() <= tol * scale
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}
