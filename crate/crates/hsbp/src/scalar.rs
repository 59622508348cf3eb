//! Scalar abstraction for the one-dimensional operator tables.
//!
//! The coefficient tables are stored as exact rationals and converted on
//! construction, so the same builder yields `f32`, `f64` or exact
//! [`BigRational`] operators.

use std::fmt::Debug;

use num_rational::BigRational;
use num_traits::{Num, Signed, ToPrimitive};

pub use num_rational::BigRational as Exact;

pub trait Scalar:
    Num + Signed + Clone + PartialOrd + Debug + Send + Sync + nalgebra::Scalar
{
    fn from_rational(r: &BigRational) -> Self;
    fn as_f64(&self) -> f64;

    fn from_i64(v: i64) -> Self {
        Self::from_rational(&BigRational::from_integer(v.into()))
    }
}

impl Scalar for f64 {
    fn from_rational(r: &BigRational) -> Self {
        ToPrimitive::to_f64(r).expect("rational out of f64 range")
    }
    fn as_f64(&self) -> f64 {
        *self
    }
}

impl Scalar for f32 {
    fn from_rational(r: &BigRational) -> Self {
        r.to_f32().expect("rational out of f32 range")
    }
    fn as_f64(&self) -> f64 {
        f64::from(*self)
    }
}

impl Scalar for BigRational {
    fn from_rational(r: &BigRational) -> Self {
        r.clone()
    }
    fn as_f64(&self) -> f64 {
        ToPrimitive::to_f64(self).unwrap_or(f64::NAN)
    }
}

/// Parses `"a/b"` or `"a"` into an exact rational. Panics on malformed
/// input; only used for compiled-in tables.
pub(crate) fn rat(s: &str) -> BigRational {
    s.parse::<BigRational>()
        .unwrap_or_else(|_| panic!("bad rational literal {s}"))
}
