use super::complex::Complex;
use super::real::Real;
use crate::error::{Error, Result};

const MAX_ITER: usize = 200;

/// Newton iteration with a central-difference derivative. Converges
/// quadratically near simple roots; `tol` bounds `|f|` at acceptance.
pub fn find_root<F: Fn(&Complex) -> Complex>(f: F, guess: &Complex, tol: &Real) -> Result<Complex> {
    let p = guess.prec().max(tol.prec());
    let inner = p + p / 2 + 16;
    let h = Real::exp2i(-((p / 3) as i32), inner);
    let stall = Real::exp2i(-(p as i32) + 6, p);
    let mut z = guess.with_prec(inner);
    let mut last = f64::INFINITY;
    for _ in 0..MAX_ITER {
        let fz = f(&z);
        let r = fz.abs();
        last = r.to_f64();
        if r <= *tol {
            return Ok(z.with_prec(p));
        }
        let fp = &f(&(&z + &h)) - &f(&(&z - &h));
        let deriv = fp / &(&h * 2.0);
        if deriv.abs().is_zero() {
            break;
        }
        let step = &fz / &deriv;
        z -= &step;
        if step.abs() <= &stall * &z.abs().max(&Real::one(p)) {
            let fz = f(&z);
            last = fz.abs().to_f64();
            if fz.abs() <= tol * 16.0 {
                return Ok(z.with_prec(p));
            }
        }
    }
    Err(Error::NonConvergence { what: "complex Newton", iterations: MAX_ITER, residual: last })
}

/// Safeguarded Newton on a real bracket `[lo, hi]` with a sign change;
/// falls back to bisection whenever the Newton step leaves the bracket.
pub fn find_root_bracketed<F: Fn(&Real) -> Real>(f: F, lo: &Real, hi: &Real, tol: &Real) -> Result<Real> {
    let p = lo.prec().max(hi.prec()).max(tol.prec());
    let mut a = lo.with_prec(p);
    let mut b = hi.with_prec(p);
    let mut fa = f(&a);
    let fb = f(&b);
    if fa.is_zero() {
        return Ok(a);
    }
    if fb.is_zero() {
        return Ok(b);
    }
    if fa.is_sign_negative() == fb.is_sign_negative() {
        return Err(Error::InvalidParameter("bracket does not change sign".into()));
    }
    let h = Real::exp2i(-((p / 3) as i32), p);
    let mut x = (&a + &b) / 2.0;
    let mut last = f64::INFINITY;
    for _ in 0..MAX_ITER {
        let fx = f(&x);
        last = fx.abs().to_f64();
        if fx.abs() <= *tol || (&b - &a).abs() <= tol.clone() {
            return Ok(x);
        }
        if fx.is_sign_negative() == fa.is_sign_negative() {
            a = x.clone();
            fa = fx.clone();
        } else {
            b = x.clone();
        }
        let deriv = (f(&(&x + &h)) - f(&(&x - &h))) / (&h * 2.0);
        let newton = if deriv.is_zero() { None } else { Some(&x - &(&fx / &deriv)) };
        let (lo_b, hi_b) = if a < b { (&a, &b) } else { (&b, &a) };
        x = match newton {
            Some(n) if n > *lo_b && n < *hi_b => n,
            _ => (&a + &b) / 2.0,
        };
    }
    Err(Error::NonConvergence { what: "bracketed Newton", iterations: MAX_ITER, residual: last })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sqrt_two() {
        let p = 200;
        let tol = Real::exp2i(-190, p);
        let r = find_root(|z: &Complex| &z.square() - 2.0, &Complex::from_f64(1.5, 0.0, p), &tol).unwrap();
        let exact = Real::from_f64(2.0, p).sqrt();
        assert!((&r.re - &exact).abs() < 1e-55);
    }

    #[test]
    fn bracketed_cosine() {
        let p = 128;
        let tol = Real::exp2i(-120, p);
        let r = find_root_bracketed(|x: &Real| x.cos(), &Real::from_f64(1.0, p), &Real::from_f64(2.0, p), &tol).unwrap();
        assert!((&r - &(Real::pi(p) / 2.0)).abs() < 1e-34);
        let r = find_root_bracketed(|x: &Real| x.sinh() - 1.0, &Real::zero(p), &Real::from_f64(2.0, p), &tol).unwrap();
        assert!((&r - &Real::one(p).asinh()).abs() < 1e-34);
    }
}
