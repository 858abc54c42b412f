//! Floating-point abstraction shared by the copula, quadrature and vine code.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// Real scalar the numerical core is generic over (`f32` or `f64`).
pub trait Scalar:
    Float + FloatConst + FromPrimitive + ToPrimitive + Sum + Debug + Display + Send + Sync + 'static
{
    /// Lossy conversion from an `f64` literal.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable")
    }

    /// Distance from 0 and 1 that copula arguments are clamped to before any
    /// transcendental evaluation. `1e-10` for `f64`; coarser types get a few
    /// ulps so that `1 - eps != 1`.
    #[inline]
    fn clamp_eps() -> Self {
        let floor = Self::lit(1e-10);
        let ulps = Self::epsilon() * Self::lit(4.0);
        if ulps > floor {
            ulps
        } else {
            floor
        }
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Clamp `x` into `[eps, 1 - eps]`.
#[inline]
pub fn clamp_unit<T: Scalar>(x: T) -> T {
    let eps = T::clamp_eps();
    let hi = T::one() - eps;
    if x < eps {
        eps
    } else if x > hi {
        hi
    } else {
        x
    }
}

/// `ln(exp(a) + exp(b))` without overflow.
#[inline]
pub fn log_add_exp<T: Scalar>(a: T, b: T) -> T {
    let (hi, lo) = if a > b { (a, b) } else { (b, a) };
    if hi == T::neg_infinity() {
        return hi;
    }
    hi + (lo - hi).exp().ln_1p()
}
