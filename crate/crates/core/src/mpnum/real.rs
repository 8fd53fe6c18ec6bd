use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, AddAssign, Div, DivAssign, Mul, MulAssign, Neg, Sub, SubAssign};

use rug::float::Constant;
use rug::ops::Pow;
use rug::Float;

use crate::error::{Error, Result};

/// Smallest precision any value is allowed to carry.
pub const MIN_PREC: u32 = 53;
/// Working precision when nothing else is requested.
pub const DEFAULT_PREC: u32 = 128;

pub(crate) fn clamp_prec(prec: u32) -> u32 {
    prec.max(MIN_PREC)
}

/// Precision needed to resolve a quantity of size `exp(-rate/eps)` among
/// O(1) contributions, with 64 guard bits, never below `floor`.
pub fn cancellation_prec(rate: f64, eps: f64, floor: u32) -> u32 {
    let need = (rate / (eps * std::f64::consts::LN_2)).ceil();
    let need = if need.is_finite() && need > 0.0 { need as u32 } else { 0 };
    clamp_prec(floor.max(need.saturating_add(64)))
}

/// Arbitrary-precision real number; binary operations round to the larger of
/// the operand precisions.
#[derive(Clone, PartialEq)]
pub struct Real(pub(crate) Float);

impl Real {
    pub fn from_f64(x: f64, prec: u32) -> Real {
        Real(Float::with_val(clamp_prec(prec), x))
    }

    pub fn from_i64(n: i64, prec: u32) -> Real {
        Real(Float::with_val(clamp_prec(prec), n))
    }

    pub fn zero(prec: u32) -> Real {
        Real(Float::new(clamp_prec(prec)))
    }

    pub fn one(prec: u32) -> Real {
        Real::from_i64(1, prec)
    }

    pub fn pi(prec: u32) -> Real {
        Real(Float::with_val(clamp_prec(prec), Constant::Pi))
    }

    pub fn ln2(prec: u32) -> Real {
        Real(Float::with_val(clamp_prec(prec), Constant::Log2))
    }

    /// 2^e exactly.
    pub fn exp2i(e: i32, prec: u32) -> Real {
        let mut f = Float::with_val(clamp_prec(prec), 1);
        f <<= e;
        Real(f)
    }

    /// Parses a decimal string such as `0.3`, `-1.25e-7`.
    pub fn parse(s: &str, prec: u32) -> Result<Real> {
        let p = Float::parse(s.trim()).map_err(|e| Error::Parse(format!("`{s}`: {e}")))?;
        Ok(Real(Float::with_val(clamp_prec(prec), p)))
    }

    pub fn prec(&self) -> u32 {
        self.0.prec()
    }

    /// Same value rounded (or exactly widened) to `prec` bits.
    pub fn with_prec(&self, prec: u32) -> Real {
        Real(Float::with_val(clamp_prec(prec), &self.0))
    }

    pub fn set_prec(&mut self, prec: u32) {
        self.0.set_prec(clamp_prec(prec));
    }

    pub fn to_f64(&self) -> f64 {
        self.0.to_f64()
    }

    /// Decimal rendering carrying every significant digit of the precision.
    pub fn to_decimal(&self) -> String {
        let digits = ((self.prec() as f64) * std::f64::consts::LOG10_2).ceil() as usize + 1;
        self.to_decimal_digits(digits)
    }

    pub fn to_decimal_digits(&self, digits: usize) -> String {
        if self.0.is_zero() {
            return "0".into();
        }
        self.0.to_string_radix(10, Some(digits.max(2)))
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }

    pub fn is_finite(&self) -> bool {
        self.0.is_finite()
    }

    pub fn is_sign_negative(&self) -> bool {
        self.0.is_sign_negative()
    }

    pub fn abs(&self) -> Real {
        Real(self.0.clone().abs())
    }

    pub fn sqrt(&self) -> Real {
        Real(self.0.clone().sqrt())
    }

    pub fn square(&self) -> Real {
        Real(self.0.clone().square())
    }

    pub fn recip(&self) -> Real {
        Real(self.0.clone().recip())
    }

    pub fn exp(&self) -> Real {
        Real(self.0.clone().exp())
    }

    pub fn ln(&self) -> Real {
        Real(self.0.clone().ln())
    }

    pub fn sin(&self) -> Real {
        Real(self.0.clone().sin())
    }

    pub fn cos(&self) -> Real {
        Real(self.0.clone().cos())
    }

    pub fn sin_cos(&self) -> (Real, Real) {
        let (s, c) = self.0.clone().sin_cos(Float::new(self.prec()));
        (Real(s), Real(c))
    }

    pub fn tan(&self) -> Real {
        Real(self.0.clone().tan())
    }

    pub fn atan(&self) -> Real {
        Real(self.0.clone().atan())
    }

    pub fn atan2(&self, x: &Real) -> Real {
        let p = self.prec().max(x.prec());
        Real(Float::with_val(p, self.0.atan2_ref(&x.0)))
    }

    pub fn sinh(&self) -> Real {
        Real(self.0.clone().sinh())
    }

    pub fn cosh(&self) -> Real {
        Real(self.0.clone().cosh())
    }

    pub fn sinh_cosh(&self) -> (Real, Real) {
        let (s, c) = self.0.clone().sinh_cosh(Float::new(self.prec()));
        (Real(s), Real(c))
    }

    pub fn tanh(&self) -> Real {
        Real(self.0.clone().tanh())
    }

    pub fn asinh(&self) -> Real {
        Real(self.0.clone().asinh())
    }

    pub fn powi(&self, n: i32) -> Real {
        Real(self.0.clone().pow(n))
    }

    pub fn powf(&self, e: &Real) -> Real {
        let p = self.prec().max(e.prec());
        Real(Float::with_val(p, (&self.0).pow(&e.0)))
    }

    pub fn pow_f64(&self, e: f64) -> Real {
        Real(Float::with_val(self.prec(), (&self.0).pow(e)))
    }

    pub fn floor(&self) -> Real {
        Real(self.0.clone().floor())
    }

    /// Reduces into `[0, m)`.
    pub fn rem_euclid(&self, m: &Real) -> Real {
        let p = self.prec().max(m.prec());
        let q = Float::with_val(p, &self.0 / &m.0).floor();
        let r = Real(Float::with_val(p, &self.0 - &q * m.0.clone()));
        if r.0 < 0 {
            r + m
        } else if r.0 >= m.0 {
            r - m
        } else {
            r
        }
    }

    pub fn max(&self, other: &Real) -> Real {
        if self.0 >= other.0 {
            self.clone()
        } else {
            other.clone()
        }
    }

    pub fn min(&self, other: &Real) -> Real {
        if self.0 <= other.0 {
            self.clone()
        } else {
            other.clone()
        }
    }

    /// `self += a * b` without a temporary.
    pub fn add_mul(&mut self, a: &Real, b: &Real) {
        self.0 += &a.0 * &b.0;
    }

    /// `self -= a * b` without a temporary.
    pub fn sub_mul(&mut self, a: &Real, b: &Real) {
        self.0 -= &a.0 * &b.0;
    }

    /// Copies `other` rounded to this value's precision.
    pub fn assign(&mut self, other: &Real) {
        use rug::Assign;
        self.0.assign(&other.0);
    }

    pub fn assign_f64(&mut self, x: f64) {
        use rug::Assign;
        self.0.assign(x);
    }

    pub fn raw(&self) -> &Float {
        &self.0
    }
}

impl fmt::Debug for Real {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_decimal_digits(20))
    }
}

impl fmt::Display for Real {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match f.precision() {
            Some(d) => write!(f, "{}", self.to_decimal_digits(d)),
            None => write!(f, "{}", self.to_decimal()),
        }
    }
}

impl PartialOrd for Real {
    fn partial_cmp(&self, other: &Real) -> Option<Ordering> {
        self.0.partial_cmp(&other.0)
    }
}

impl PartialEq<f64> for Real {
    fn eq(&self, other: &f64) -> bool {
        self.0 == *other
    }
}

impl PartialOrd<f64> for Real {
    fn partial_cmp(&self, other: &f64) -> Option<Ordering> {
        self.0.partial_cmp(other)
    }
}

macro_rules! real_binop {
    ($tr:ident, $m:ident, $atr:ident, $am:ident) => {
        impl $tr<&Real> for &Real {
            type Output = Real;
            fn $m(self, rhs: &Real) -> Real {
                let p = self.prec().max(rhs.prec());
                Real(Float::with_val(p, (&self.0).$m(&rhs.0)))
            }
        }
        impl $tr<Real> for &Real {
            type Output = Real;
            fn $m(self, rhs: Real) -> Real {
                self.$m(&rhs)
            }
        }
        impl $tr<&Real> for Real {
            type Output = Real;
            fn $m(mut self, rhs: &Real) -> Real {
                self.$am(rhs);
                self
            }
        }
        impl $tr<Real> for Real {
            type Output = Real;
            fn $m(mut self, rhs: Real) -> Real {
                self.$am(&rhs);
                self
            }
        }
        impl $atr<&Real> for Real {
            fn $am(&mut self, rhs: &Real) {
                if rhs.prec() > self.prec() {
                    self.0.set_prec(rhs.prec());
                }
                self.0.$am(&rhs.0);
            }
        }
        impl $atr<Real> for Real {
            fn $am(&mut self, rhs: Real) {
                self.$am(&rhs);
            }
        }
        impl $tr<f64> for &Real {
            type Output = Real;
            fn $m(self, rhs: f64) -> Real {
                Real(Float::with_val(self.prec(), (&self.0).$m(rhs)))
            }
        }
        impl $tr<f64> for Real {
            type Output = Real;
            fn $m(mut self, rhs: f64) -> Real {
                self.0.$am(rhs);
                self
            }
        }
        impl $atr<f64> for Real {
            fn $am(&mut self, rhs: f64) {
                self.0.$am(rhs);
            }
        }
    };
}

real_binop!(Add, add, AddAssign, add_assign);
real_binop!(Sub, sub, SubAssign, sub_assign);
real_binop!(Mul, mul, MulAssign, mul_assign);
real_binop!(Div, div, DivAssign, div_assign);

impl Add<&Real> for f64 {
    type Output = Real;
    fn add(self, rhs: &Real) -> Real {
        rhs + self
    }
}

impl Sub<&Real> for f64 {
    type Output = Real;
    fn sub(self, rhs: &Real) -> Real {
        Real(Float::with_val(rhs.prec(), self - &rhs.0))
    }
}

impl Mul<&Real> for f64 {
    type Output = Real;
    fn mul(self, rhs: &Real) -> Real {
        rhs * self
    }
}

impl Div<&Real> for f64 {
    type Output = Real;
    fn div(self, rhs: &Real) -> Real {
        Real(Float::with_val(rhs.prec(), self / &rhs.0))
    }
}

impl Add<Real> for f64 {
    type Output = Real;
    fn add(self, rhs: Real) -> Real {
        rhs + self
    }
}

impl Sub<Real> for f64 {
    type Output = Real;
    fn sub(self, rhs: Real) -> Real {
        self - &rhs
    }
}

impl Mul<Real> for f64 {
    type Output = Real;
    fn mul(self, rhs: Real) -> Real {
        rhs * self
    }
}

impl Div<Real> for f64 {
    type Output = Real;
    fn div(self, rhs: Real) -> Real {
        self / &rhs
    }
}

impl Neg for Real {
    type Output = Real;
    fn neg(self) -> Real {
        Real(-self.0)
    }
}

impl Neg for &Real {
    type Output = Real;
    fn neg(self) -> Real {
        Real(-self.0.clone())
    }
}

impl std::iter::Sum for Real {
    fn sum<I: Iterator<Item = Real>>(mut iter: I) -> Real {
        let first = match iter.next() {
            Some(x) => x,
            None => return Real::zero(MIN_PREC),
        };
        iter.fold(first, |acc, x| acc + x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn precision_is_max_of_operands() {
        let a = Real::from_f64(1.5, 64);
        let b = Real::from_f64(2.0, 200);
        assert_eq!((&a + &b).prec(), 200);
        assert_eq!((a.clone() * &b).prec(), 200);
        assert_eq!(Real::from_f64(1.0, 10).prec(), MIN_PREC);
    }

    #[test]
    fn decimal_round_trip() {
        let x = Real::pi(256) / 7.0;
        let s = x.to_decimal();
        let y = Real::parse(&s, 256).unwrap();
        let rel = ((&x - &y) / &x).abs();
        assert!(rel < 1e-75, "{s}");
    }

    #[test]
    fn rem_euclid_wraps_negative() {
        let two_pi = Real::pi(128) * 2.0;
        let r = Real::from_f64(-1.0, 128).rem_euclid(&two_pi);
        assert!((r.to_f64() - (2.0 * std::f64::consts::PI - 1.0)).abs() < 1e-15);
    }

    #[test]
    fn cancellation_rule() {
        assert_eq!(cancellation_prec(1.0, 0.1, 128), 128);
        let p = cancellation_prec(1.0, 0.005, 128);
        assert_eq!(p, (1.0f64 / (0.005 * std::f64::consts::LN_2)).ceil() as u32 + 64);
    }
}
