//! Double-double scalar for reference computations.
//!
//! [`Wide`] wraps [`twofloat::TwoFloat`] (about 106 bits of significand) and
//! implements [`Scalar`], so every generic routine in the crate can be run at
//! roughly twice `f64` precision. Transcendental functions are accurate to
//! about `1e-22` relative.
//!
//! Division is done here by long division on the `hi` words, because
//! `TwoFloat / TwoFloat` in the wrapped crate returns only an `f64`-accurate
//! quotient.

use std::fmt;
use std::iter::Sum;
use std::num::FpCategory;
use std::ops::{
    Add, AddAssign, Div, DivAssign, Mul, MulAssign, Neg, Rem, RemAssign, Sub, SubAssign,
};

use num_traits::{Float, FloatConst, FromPrimitive, Num, NumCast, One, ToPrimitive, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use twofloat::TwoFloat;

use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, Default, PartialEq, PartialOrd)]
pub struct Wide(pub TwoFloat);

impl Wide {
    pub fn new(x: f64) -> Self {
        Wide(TwoFloat::from_f64(x))
    }

    pub fn hi(self) -> f64 {
        self.0.hi()
    }

    pub fn lo(self) -> f64 {
        self.0.lo()
    }
}

macro_rules! binary_ops {
    ($($tr:ident $f:ident $atr:ident $af:ident),*) => {$(
        impl $tr for Wide {
            type Output = Wide;
            fn $f(self, rhs: Wide) -> Wide {
                Wide(self.0.$f(rhs.0))
            }
        }
        impl $atr for Wide {
            fn $af(&mut self, rhs: Wide) {
                self.0.$af(rhs.0)
            }
        }
    )*};
}

binary_ops!(
    Add add AddAssign add_assign,
    Sub sub SubAssign sub_assign,
    Mul mul MulAssign mul_assign,
    Rem rem RemAssign rem_assign
);

/// Two correction rounds after the leading `f64` quotient.
fn divide(a: TwoFloat, b: TwoFloat) -> TwoFloat {
    let q1 = a.hi() / b.hi();
    let r = a - b * q1;
    let q2 = r.hi() / b.hi();
    let r = r - b * q2;
    let q3 = r.hi() / b.hi();
    TwoFloat::new_add(q1, q2) + q3
}

impl Div for Wide {
    type Output = Wide;
    fn div(self, rhs: Wide) -> Wide {
        Wide(divide(self.0, rhs.0))
    }
}

impl DivAssign for Wide {
    fn div_assign(&mut self, rhs: Wide) {
        *self = *self / rhs;
    }
}

impl Neg for Wide {
    type Output = Wide;
    fn neg(self) -> Wide {
        Wide(-self.0)
    }
}

impl Sum for Wide {
    fn sum<I: Iterator<Item = Wide>>(iter: I) -> Wide {
        iter.fold(Wide::zero(), |a, b| a + b)
    }
}

impl Zero for Wide {
    fn zero() -> Self {
        Wide(TwoFloat::zero())
    }
    fn is_zero(&self) -> bool {
        self.0.is_zero()
    }
}

impl One for Wide {
    fn one() -> Self {
        Wide(TwoFloat::one())
    }
}

impl Num for Wide {
    type FromStrRadixErr = <f64 as Num>::FromStrRadixErr;
    fn from_str_radix(s: &str, radix: u32) -> Result<Self, Self::FromStrRadixErr> {
        f64::from_str_radix(s, radix).map(Wide::new)
    }
}

impl ToPrimitive for Wide {
    fn to_i64(&self) -> Option<i64> {
        self.0.to_i64()
    }
    fn to_u64(&self) -> Option<u64> {
        self.0.to_u64()
    }
    fn to_f64(&self) -> Option<f64> {
        self.0.to_f64()
    }
}

impl FromPrimitive for Wide {
    fn from_i64(n: i64) -> Option<Self> {
        TwoFloat::from_i64(n).map(Wide)
    }
    fn from_u64(n: u64) -> Option<Self> {
        TwoFloat::from_u64(n).map(Wide)
    }
    fn from_f64(n: f64) -> Option<Self> {
        Some(Wide::new(n))
    }
}

impl NumCast for Wide {
    fn from<N: ToPrimitive>(n: N) -> Option<Self> {
        <TwoFloat as NumCast>::from(n).map(Wide)
    }
}

macro_rules! consts {
    ($($f:ident),*) => {$(
        fn $f() -> Self {
            Wide(TwoFloat::$f())
        }
    )*};
}

impl FloatConst for Wide {
    consts!(
        E,
        FRAC_1_PI,
        FRAC_1_SQRT_2,
        FRAC_2_PI,
        FRAC_2_SQRT_PI,
        FRAC_PI_2,
        FRAC_PI_3,
        FRAC_PI_4,
        FRAC_PI_6,
        FRAC_PI_8,
        LN_10,
        LN_2,
        LOG10_E,
        LOG2_E,
        PI,
        SQRT_2
    );
}

macro_rules! unary {
    ($($f:ident),*) => {$(
        fn $f(self) -> Self {
            Wide(Float::$f(self.0))
        }
    )*};
}

macro_rules! predicate {
    ($($f:ident),*) => {$(
        fn $f(self) -> bool {
            Float::$f(self.0)
        }
    )*};
}

impl Float for Wide {
    consts!(
        nan,
        infinity,
        neg_infinity,
        neg_zero,
        min_value,
        min_positive_value,
        max_value
    );
    unary!(
        floor, ceil, round, trunc, fract, abs, signum, sqrt, exp, exp2, ln, log2, log10, cbrt, sin,
        cos, tan, asin, acos, atan, exp_m1, ln_1p, sinh, cosh, tanh, asinh, acosh, atanh
    );
    predicate!(
        is_nan,
        is_infinite,
        is_finite,
        is_normal,
        is_sign_positive,
        is_sign_negative
    );

    fn epsilon() -> Self {
        Wide::new(2f64.powi(-104))
    }
    fn recip(self) -> Self {
        Wide::one() / self
    }
    fn classify(self) -> FpCategory {
        Float::classify(self.0)
    }
    fn mul_add(self, a: Self, b: Self) -> Self {
        self * a + b
    }
    fn powi(self, n: i32) -> Self {
        Wide(Float::powi(self.0, n))
    }
    fn powf(self, n: Self) -> Self {
        Wide(Float::powf(self.0, n.0))
    }
    fn log(self, base: Self) -> Self {
        Wide(Float::log(self.0, base.0))
    }
    fn max(self, other: Self) -> Self {
        Wide(Float::max(self.0, other.0))
    }
    fn min(self, other: Self) -> Self {
        Wide(Float::min(self.0, other.0))
    }
    fn abs_sub(self, other: Self) -> Self {
        if self > other {
            self - other
        } else {
            Wide::zero()
        }
    }
    fn hypot(self, other: Self) -> Self {
        Wide(Float::hypot(self.0, other.0))
    }
    fn atan2(self, other: Self) -> Self {
        Wide(Float::atan2(self.0, other.0))
    }
    fn sin_cos(self) -> (Self, Self) {
        (self.sin(), self.cos())
    }
    fn integer_decode(self) -> (u64, i16, i8) {
        Float::integer_decode(self.0)
    }
}

impl fmt::Display for Wide {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(&self.0.hi(), f)
    }
}

impl fmt::LowerExp for Wide {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::LowerExp::fmt(&self.0.hi(), f)
    }
}

/// Serialized as the `[hi, lo]` pair.
impl Serialize for Wide {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        [self.0.hi(), self.0.lo()].serialize(s)
    }
}

impl<'de> Deserialize<'de> for Wide {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let [hi, lo] = <[f64; 2]>::deserialize(d)?;
        Ok(Wide(TwoFloat::new_add(hi, lo)))
    }
}

impl Scalar for Wide {}
