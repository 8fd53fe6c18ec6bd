//! Residues of `N(w) / D(w)^2 * exp(i k w)` at simple zeros of `D`.

use super::complex::Complex;
use super::real::Real;
use crate::error::{Error, Result};

/// Number of samples on the circle used for the local Taylor coefficients.
const SAMPLES: usize = 8;
/// Highest coefficient reported in [`LocalSeries`].
pub const SERIES_DEGREE: usize = 4;

/// Taylor coefficients `c_0..=c_4` of a function about a point.
#[derive(Clone, Debug)]
pub struct LocalSeries {
    pub coeffs: Vec<Complex>,
}

impl LocalSeries {
    pub fn value(&self) -> &Complex {
        &self.coeffs[0]
    }

    /// `j`-th derivative, `j! c_j`.
    pub fn derivative(&self, j: usize) -> Complex {
        let fact: f64 = (1..=j).map(|k| k as f64).product();
        &self.coeffs[j] * fact
    }
}

/// Taylor coefficients of `f` about `z` at precision `prec`, from `f` sampled on
/// a circle of radius `2^(-prec/3)`. Samples are taken with enough guard bits
/// that the coefficients through degree 2 carry the full precision.
pub fn local_series<F: Fn(&Complex) -> Complex>(f: &F, z: &Complex, prec: u32) -> LocalSeries {
    let inner = prec + (2 * prec).div_ceil(3) + 32;
    let z = z.with_prec(inner);
    let h_exp = -((prec / 3) as i32);
    let h = Real::exp2i(h_exp, inner);
    let two_pi = Real::pi(inner) * 2.0;
    let values: Vec<Complex> = (0..SAMPLES)
        .map(|l| {
            let root = Complex::cis(&(&two_pi * (l as f64 / SAMPLES as f64)));
            f(&(&z + &root.scale(&h)))
        })
        .collect();
    let mut coeffs = Vec::with_capacity(SERIES_DEGREE + 1);
    for j in 0..=SERIES_DEGREE {
        let mut acc = Complex::zero(inner);
        for (l, v) in values.iter().enumerate() {
            let phase = &two_pi * (-((j * l) as f64) / SAMPLES as f64);
            acc += &(v * &Complex::cis(&phase));
        }
        let scale = Real::exp2i(-h_exp * j as i32, inner) / SAMPLES as f64;
        coeffs.push(acc.scale(&scale).with_prec(prec));
    }
    LocalSeries { coeffs }
}

/// Local data of a double pole of `N / D^2`: the residue of
/// `N / D^2 * exp(i k w)` is `exp(i k rho) (i k lead + sub)`.
#[derive(Clone, Debug)]
pub struct DoublePole {
    pub location: Complex,
    pub lead: Complex,
    pub sub: Complex,
}

impl DoublePole {
    pub fn residue(&self, k: &Real) -> Complex {
        let p = self.location.prec().max(k.prec());
        let phase = self.location.with_prec(p).mul_i().scale(k).exp();
        let mut bracket = self.lead.mul_i().scale(k);
        bracket += &self.sub;
        &phase * &bracket
    }
}

pub fn double_pole<N, D>(num: &N, den: &D, rho: &Complex, prec: u32) -> Result<DoublePole>
where
    N: Fn(&Complex) -> Complex,
    D: Fn(&Complex) -> Complex,
{
    let ns = local_series(num, rho, prec);
    let ds = local_series(den, rho, prec);
    let n0 = ns.value().clone();
    let n1 = ns.derivative(1);
    let d1 = ds.derivative(1);
    let d2 = ds.derivative(2);
    let scale = ds.coeffs.iter().map(|c| c.abs().to_f64()).fold(0.0, f64::max).max(1.0);
    let d1_abs = d1.abs().to_f64();
    if !(d1_abs > scale * 2f64.powi(-((prec / 3) as i32))) {
        return Err(Error::DegeneratePole { location: format!("{rho:.12}"), derivative: d1_abs });
    }
    let d1_sq = d1.square();
    let lead = &n0 / &d1_sq;
    let sub = &(&n1 / &d1_sq) - &(&(&n0 * &d2) / &(&d1_sq * &d1));
    Ok(DoublePole { location: rho.with_prec(prec), lead, sub })
}

/// Residue of `N(w)/D(w)^2 * exp(i k w)` at a simple zero `rho` of `D`.
pub fn residue_double_pole<N, D>(num: &N, den: &D, rho: &Complex, k: &Real, prec: u32) -> Result<Complex>
where
    N: Fn(&Complex) -> Complex,
    D: Fn(&Complex) -> Complex,
{
    Ok(double_pole(num, den, rho, prec)?.residue(k))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn series_of_exp() {
        let p = 192;
        let z = Complex::from_f64(0.2, 0.4, p);
        let s = local_series(&|w: &Complex| w.exp(), &z, p);
        let e = z.exp();
        let mut fact = 1.0;
        for j in 0..=SERIES_DEGREE {
            if j > 0 {
                fact *= j as f64;
            }
            let expect = &e / fact;
            let tol = if j <= 2 { 1e-55 } else { 1e-25 };
            assert!((&s.coeffs[j] - &expect).abs() < tol, "degree {j}");
        }
    }

    #[test]
    fn residue_of_inverse_square_sinh() {
        // 1/sinh(w)^2 e^{ikw} at w = i pi has residue i k e^{-k pi}.
        let p = 160;
        let rho = Complex::new(Real::zero(p), Real::pi(p));
        let k = Real::from_f64(2.5, p);
        let r = residue_double_pole(&|_: &Complex| Complex::one(p), &|w: &Complex| w.sinh(), &rho, &k, p).unwrap();
        let expect = Complex::new(Real::zero(p), &k * &(-(&k * &Real::pi(p))).exp());
        assert!((&r - &expect).abs() < 1e-45);
    }

    #[test]
    fn rejects_double_zero() {
        let p = 128;
        let rho = Complex::zero(p);
        let e = double_pole(&|_: &Complex| Complex::one(p), &|w: &Complex| w.square(), &rho, p);
        assert!(matches!(e, Err(Error::DegeneratePole { .. })));
    }
}
