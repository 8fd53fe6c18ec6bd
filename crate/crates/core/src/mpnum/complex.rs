use std::fmt;
use std::ops::{Add, AddAssign, Div, Mul, MulAssign, Neg, Sub, SubAssign};

use super::real::Real;

/// Arbitrary-precision complex number as a pair of [`Real`]s.
#[derive(Clone, PartialEq)]
pub struct Complex {
    pub re: Real,
    pub im: Real,
}

impl Complex {
    pub fn new(re: Real, im: Real) -> Complex {
        Complex { re, im }
    }

    pub fn from_real(re: Real) -> Complex {
        let p = re.prec();
        Complex { re, im: Real::zero(p) }
    }

    pub fn from_f64(re: f64, im: f64, prec: u32) -> Complex {
        Complex { re: Real::from_f64(re, prec), im: Real::from_f64(im, prec) }
    }

    pub fn zero(prec: u32) -> Complex {
        Complex::from_f64(0.0, 0.0, prec)
    }

    pub fn one(prec: u32) -> Complex {
        Complex::from_f64(1.0, 0.0, prec)
    }

    pub fn i(prec: u32) -> Complex {
        Complex::from_f64(0.0, 1.0, prec)
    }

    pub fn prec(&self) -> u32 {
        self.re.prec().max(self.im.prec())
    }

    pub fn with_prec(&self, prec: u32) -> Complex {
        Complex { re: self.re.with_prec(prec), im: self.im.with_prec(prec) }
    }

    pub fn to_f64(&self) -> (f64, f64) {
        (self.re.to_f64(), self.im.to_f64())
    }

    pub fn is_finite(&self) -> bool {
        self.re.is_finite() && self.im.is_finite()
    }

    pub fn conj(&self) -> Complex {
        Complex { re: self.re.clone(), im: -&self.im }
    }

    pub fn mul_i(&self) -> Complex {
        Complex { re: -&self.im, im: self.re.clone() }
    }

    pub fn scale(&self, s: &Real) -> Complex {
        Complex { re: &self.re * s, im: &self.im * s }
    }

    pub fn norm_sqr(&self) -> Real {
        self.re.square() + self.im.square()
    }

    pub fn abs(&self) -> Real {
        let p = self.prec();
        Real(rug::Float::with_val(p, self.re.0.hypot_ref(&self.im.0)))
    }

    /// Argument in `(-pi, pi]`.
    pub fn arg(&self) -> Real {
        self.im.atan2(&self.re)
    }

    pub fn from_polar(r: &Real, theta: &Real) -> Complex {
        let (s, c) = theta.sin_cos();
        Complex { re: r * &c, im: r * &s }
    }

    /// `exp(i theta)`.
    pub fn cis(theta: &Real) -> Complex {
        let (s, c) = theta.sin_cos();
        Complex { re: c, im: s }
    }

    pub fn recip(&self) -> Complex {
        let n = self.norm_sqr();
        Complex { re: &self.re / &n, im: -(&self.im / &n) }
    }

    pub fn square(&self) -> Complex {
        self * self
    }

    pub fn powi(&self, n: i32) -> Complex {
        if n < 0 {
            return self.powi(-n).recip();
        }
        let mut base = self.clone();
        let mut acc = Complex::one(self.prec());
        let mut k = n as u32;
        while k > 0 {
            if k & 1 == 1 {
                acc = &acc * &base;
            }
            base = base.square();
            k >>= 1;
        }
        acc
    }

    pub fn exp(&self) -> Complex {
        let r = self.re.exp();
        let (s, c) = self.im.sin_cos();
        Complex { re: &r * &c, im: r * &s }
    }

    /// Principal logarithm, imaginary part in `(-pi, pi]`.
    pub fn ln(&self) -> Complex {
        Complex { re: self.abs().ln(), im: self.arg() }
    }

    /// Principal square root: non-negative real part, cut along the negative
    /// real axis with the sign of a zero imaginary part selecting the side.
    pub fn sqrt(&self) -> Complex {
        let p = self.prec();
        if self.re.is_zero() && self.im.is_zero() {
            return Complex::zero(p);
        }
        let r = self.abs();
        if !self.re.is_sign_negative() {
            let t = ((&r + &self.re) / 2.0).sqrt();
            let im = &self.im / (&t * 2.0);
            Complex { re: t, im }
        } else {
            let t = ((&r - &self.re) / 2.0).sqrt();
            let re = self.im.abs() / (&t * 2.0);
            let im = if self.im.is_sign_negative() { -t } else { t };
            Complex { re, im }
        }
    }

    pub fn sinh(&self) -> Complex {
        let (sh, ch) = self.re.sinh_cosh();
        let (s, c) = self.im.sin_cos();
        Complex { re: sh * &c, im: ch * &s }
    }

    pub fn cosh(&self) -> Complex {
        let (sh, ch) = self.re.sinh_cosh();
        let (s, c) = self.im.sin_cos();
        Complex { re: ch * &c, im: sh * &s }
    }

    pub fn sinh_cosh(&self) -> (Complex, Complex) {
        let (sh, ch) = self.re.sinh_cosh();
        let (s, c) = self.im.sin_cos();
        (
            Complex { re: &sh * &c, im: &ch * &s },
            Complex { re: ch * &c, im: sh * &s },
        )
    }

    pub fn sin(&self) -> Complex {
        let (sh, ch) = self.im.sinh_cosh();
        let (s, c) = self.re.sin_cos();
        Complex { re: s * &ch, im: c * &sh }
    }

    pub fn cos(&self) -> Complex {
        let (sh, ch) = self.im.sinh_cosh();
        let (s, c) = self.re.sin_cos();
        Complex { re: c * &ch, im: -(s * &sh) }
    }
}

impl fmt::Debug for Complex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({:?} {} {:?}i)", self.re, if self.im.is_sign_negative() { "-" } else { "+" }, self.im.abs())
    }
}

impl fmt::Display for Complex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sign = if self.im.is_sign_negative() { "-" } else { "+" };
        match f.precision() {
            Some(d) => write!(f, "{:.*} {sign} {:.*}i", d, self.re, d, self.im.abs()),
            None => write!(f, "{} {sign} {}i", self.re, self.im.abs()),
        }
    }
}

impl Add<&Complex> for &Complex {
    type Output = Complex;
    fn add(self, rhs: &Complex) -> Complex {
        Complex { re: &self.re + &rhs.re, im: &self.im + &rhs.im }
    }
}

impl Sub<&Complex> for &Complex {
    type Output = Complex;
    fn sub(self, rhs: &Complex) -> Complex {
        Complex { re: &self.re - &rhs.re, im: &self.im - &rhs.im }
    }
}

impl Mul<&Complex> for &Complex {
    type Output = Complex;
    fn mul(self, rhs: &Complex) -> Complex {
        let mut re = &self.re * &rhs.re;
        re.sub_mul(&self.im, &rhs.im);
        let mut im = &self.re * &rhs.im;
        im.add_mul(&self.im, &rhs.re);
        Complex { re, im }
    }
}

impl Div<&Complex> for &Complex {
    type Output = Complex;
    fn div(self, rhs: &Complex) -> Complex {
        let n = rhs.norm_sqr();
        let mut re = &self.re * &rhs.re;
        re.add_mul(&self.im, &rhs.im);
        let mut im = &self.im * &rhs.re;
        im.sub_mul(&self.re, &rhs.im);
        Complex { re: re / &n, im: im / &n }
    }
}

macro_rules! forward_owned {
    ($tr:ident, $m:ident) => {
        impl $tr<Complex> for Complex {
            type Output = Complex;
            fn $m(self, rhs: Complex) -> Complex {
                (&self).$m(&rhs)
            }
        }
        impl $tr<&Complex> for Complex {
            type Output = Complex;
            fn $m(self, rhs: &Complex) -> Complex {
                (&self).$m(rhs)
            }
        }
        impl $tr<Complex> for &Complex {
            type Output = Complex;
            fn $m(self, rhs: Complex) -> Complex {
                self.$m(&rhs)
            }
        }
    };
}

forward_owned!(Add, add);
forward_owned!(Sub, sub);
forward_owned!(Mul, mul);
forward_owned!(Div, div);

impl AddAssign<&Complex> for Complex {
    fn add_assign(&mut self, rhs: &Complex) {
        self.re += &rhs.re;
        self.im += &rhs.im;
    }
}

impl AddAssign<Complex> for Complex {
    fn add_assign(&mut self, rhs: Complex) {
        *self += &rhs;
    }
}

impl SubAssign<&Complex> for Complex {
    fn sub_assign(&mut self, rhs: &Complex) {
        self.re -= &rhs.re;
        self.im -= &rhs.im;
    }
}

impl MulAssign<&Complex> for Complex {
    fn mul_assign(&mut self, rhs: &Complex) {
        *self = &*self * rhs;
    }
}

impl Mul<&Real> for &Complex {
    type Output = Complex;
    fn mul(self, rhs: &Real) -> Complex {
        self.scale(rhs)
    }
}

impl Mul<&Real> for Complex {
    type Output = Complex;
    fn mul(self, rhs: &Real) -> Complex {
        Complex { re: self.re * rhs, im: self.im * rhs }
    }
}

impl Div<&Real> for &Complex {
    type Output = Complex;
    fn div(self, rhs: &Real) -> Complex {
        Complex { re: &self.re / rhs, im: &self.im / rhs }
    }
}

impl Div<&Real> for Complex {
    type Output = Complex;
    fn div(self, rhs: &Real) -> Complex {
        Complex { re: self.re / rhs, im: self.im / rhs }
    }
}

impl Add<&Real> for &Complex {
    type Output = Complex;
    fn add(self, rhs: &Real) -> Complex {
        Complex { re: &self.re + rhs, im: self.im.clone() }
    }
}

impl Sub<&Real> for &Complex {
    type Output = Complex;
    fn sub(self, rhs: &Real) -> Complex {
        Complex { re: &self.re - rhs, im: self.im.clone() }
    }
}

impl Mul<f64> for &Complex {
    type Output = Complex;
    fn mul(self, rhs: f64) -> Complex {
        Complex { re: &self.re * rhs, im: &self.im * rhs }
    }
}

impl Mul<f64> for Complex {
    type Output = Complex;
    fn mul(self, rhs: f64) -> Complex {
        Complex { re: self.re * rhs, im: self.im * rhs }
    }
}

impl Div<f64> for &Complex {
    type Output = Complex;
    fn div(self, rhs: f64) -> Complex {
        Complex { re: &self.re / rhs, im: &self.im / rhs }
    }
}

impl Add<f64> for &Complex {
    type Output = Complex;
    fn add(self, rhs: f64) -> Complex {
        Complex { re: &self.re + rhs, im: self.im.clone() }
    }
}

impl Sub<f64> for &Complex {
    type Output = Complex;
    fn sub(self, rhs: f64) -> Complex {
        Complex { re: &self.re - rhs, im: self.im.clone() }
    }
}

impl Neg for Complex {
    type Output = Complex;
    fn neg(self) -> Complex {
        Complex { re: -self.re, im: -self.im }
    }
}

impl Neg for &Complex {
    type Output = Complex;
    fn neg(self) -> Complex {
        Complex { re: -&self.re, im: -&self.im }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: &Complex, b: (f64, f64), tol: f64) -> bool {
        let (x, y) = a.to_f64();
        (x - b.0).abs() <= tol && (y - b.1).abs() <= tol
    }

    #[test]
    fn elementary_values() {
        let z = Complex::from_f64(0.3, -1.2, 128);
        let (x, y) = (0.3f64, -1.2f64);
        assert!(close(&z.exp(), (x.exp() * y.cos(), x.exp() * y.sin()), 1e-15));
        assert!(close(&z.sinh(), (x.sinh() * y.cos(), x.cosh() * y.sin()), 1e-15));
        assert!(close(&z.cosh(), (x.cosh() * y.cos(), x.sinh() * y.sin()), 1e-15));
        let w = z.ln().exp();
        assert!(close(&w, (x, y), 1e-15));
    }

    #[test]
    fn sqrt_branches() {
        let p = 128;
        let s = Complex::from_f64(-4.0, 0.0, p).sqrt();
        assert!(close(&s, (0.0, 2.0), 1e-30));
        let s = Complex::new(Real::from_f64(-4.0, p), -Real::zero(p)).sqrt();
        assert!(close(&s, (0.0, -2.0), 1e-30));
        let z = Complex::from_f64(-3.0, 4.0, p);
        let r = z.sqrt();
        assert!(close(&r, (1.0, 2.0), 1e-30));
        let back = r.square();
        assert!(close(&back, (-3.0, 4.0), 1e-30));
    }

    #[test]
    fn powi_and_division() {
        let z = Complex::from_f64(1.0, 1.0, 128);
        assert!(close(&z.powi(4), (-4.0, 0.0), 1e-30));
        assert!(close(&(&z.powi(-2) * &z.square()), (1.0, 0.0), 1e-30));
        assert!(close(&(&z / &z.conj()), (0.0, 1.0), 1e-30));
    }
}
