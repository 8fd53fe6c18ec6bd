use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mpnum::{Complex, Real};

/// Finite Fourier spectrum `F^[k]` on the 2-torus.
#[derive(Clone, Debug)]
pub struct FourierSpectrum {
    coeffs: BTreeMap<(i64, i64), Complex>,
    kmax: usize,
    r1: f64,
    r2: f64,
    /// Measured `sup |F^[k]| exp(r1|k1| + r2|k2|)` over the stored harmonics.
    decay_constant: f64,
    prec: u32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectrumRecord {
    pub k1: i64,
    pub k2: i64,
    pub re: String,
    pub im: String,
}

impl FourierSpectrum {
    pub fn new(coeffs: BTreeMap<(i64, i64), Complex>, r1: f64, r2: f64, prec: u32) -> FourierSpectrum {
        let kmax = coeffs.keys().map(|&(a, b)| a.unsigned_abs().max(b.unsigned_abs()) as usize).max().unwrap_or(0);
        let decay_constant = coeffs
            .iter()
            .map(|(&(k1, k2), c)| c.abs().to_f64() * (r1 * k1.abs() as f64 + r2 * k2.abs() as f64).exp())
            .fold(0.0, f64::max);
        FourierSpectrum { coeffs, kmax, r1, r2, decay_constant, prec }
    }

    pub fn kmax(&self) -> usize {
        self.kmax
    }

    pub fn prec(&self) -> u32 {
        self.prec
    }

    pub fn rates(&self) -> (f64, f64) {
        (self.r1, self.r2)
    }

    pub fn decay_constant(&self) -> f64 {
        self.decay_constant
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn get(&self, k: (i64, i64)) -> Complex {
        self.coeffs.get(&k).cloned().unwrap_or_else(|| Complex::zero(self.prec))
    }

    pub fn iter(&self) -> impl Iterator<Item = (&(i64, i64), &Complex)> {
        self.coeffs.iter()
    }

    /// Largest `|F^[-k] - conj F^[k]|` over the stored harmonics.
    pub fn reality_defect(&self) -> f64 {
        self.coeffs
            .iter()
            .map(|(&(a, b), c)| (&self.get((-a, -b)) - &c.conj()).abs().to_f64())
            .fold(0.0, f64::max)
    }

    /// `sum_k F^[k] exp(i k.theta)`, real part.
    pub fn eval(&self, th1: &Real, th2: &Real) -> Real {
        let p = self.prec.max(th1.prec());
        let mut acc = Real::zero(p);
        for (&(k1, k2), c) in &self.coeffs {
            let arg = th1 * (k1 as f64) + &(th2 * (k2 as f64));
            let (s, co) = arg.sin_cos();
            acc.add_mul(&c.re, &co);
            acc.sub_mul(&c.im, &s);
        }
        acc
    }

    /// Bound on the sup-norm of the discarded harmonics from the decay certificate.
    pub fn tail_bound(&self) -> f64 {
        let k = self.kmax as i32;
        let full = |r: f64| 1.0 / (r / 2.0).tanh();
        let outer = |r: f64| {
            let q = (-r).exp();
            2.0 * q.powi(k + 1) / (1.0 - q)
        };
        let (o1, o2) = (outer(self.r1), outer(self.r2));
        self.decay_constant * (o1 * full(self.r2) + (full(self.r1) - o1) * o2)
    }

    /// Measures `(a, k0)` such that `Re F^[k] > a exp(-r1|k1| - r2|k2|)` on the
    /// golden convergent pairs with `|k2| > k0`.
    pub fn measure_convergent_bound(&self, r1: f64, r2: f64) -> (f64, i64) {
        let mut pairs = Vec::new();
        let (mut p, mut q) = (1i64, 1i64);
        while (q as usize) <= self.kmax && (p as usize) <= self.kmax {
            for (s1, s2) in [(1, 1), (1, -1), (-1, 1), (-1, -1)] {
                pairs.push((s1 * p, s2 * q));
            }
            let np = p + q;
            q = p;
            p = np;
        }
        let mut k0 = 0i64;
        for &(k1, k2) in &pairs {
            if !(self.get((k1, k2)).re > 0.0) {
                k0 = k0.max(k2.abs());
            }
        }
        let a = pairs
            .iter()
            .filter(|k| k.1.abs() > k0)
            .map(|&(k1, k2)| self.get((k1, k2)).re.to_f64() * (r1 * k1.abs() as f64 + r2 * k2.abs() as f64).exp())
            .fold(f64::INFINITY, f64::min);
        let a = if a.is_finite() { a * (1.0 - 1e-9) } else { 0.0 };
        (a, k0)
    }

    pub fn to_records(&self) -> Vec<SpectrumRecord> {
        self.coeffs
            .iter()
            .map(|(&(k1, k2), c)| SpectrumRecord { k1, k2, re: c.re.to_decimal(), im: c.im.to_decimal() })
            .collect()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.to_records())?)
    }

    pub fn from_records(records: &[SpectrumRecord], r1: f64, r2: f64, prec: u32) -> Result<FourierSpectrum> {
        let mut coeffs = BTreeMap::new();
        for r in records {
            let c = Complex::new(Real::parse(&r.re, prec)?, Real::parse(&r.im, prec)?);
            if coeffs.insert((r.k1, r.k2), c).is_some() {
                return Err(Error::Parse(format!("duplicate harmonic ({}, {})", r.k1, r.k2)));
            }
        }
        Ok(FourierSpectrum::new(coeffs, r1, r2, prec))
    }

    pub fn from_json(json: &str, r1: f64, r2: f64, prec: u32) -> Result<FourierSpectrum> {
        let records: Vec<SpectrumRecord> = serde_json::from_str(json)?;
        FourierSpectrum::from_records(&records, r1, r2, prec)
    }
}

/// One-dimensional factor `cos t / (cosh r - cos t)`.
fn factor_value(r: f64, t: &Real) -> Real {
    let c = t.cos();
    let ch = Real::from_f64(r, t.prec()).cosh();
    &c / &(ch - &c)
}

/// `cos th1 cos th2 / ((cosh r1 - cos th1)(cosh r2 - cos th2))`.
pub fn example_forcing_value(r1: f64, r2: f64, th1: &Real, th2: &Real) -> Real {
    factor_value(r1, th1) * &factor_value(r2, th2)
}

/// Fourier coefficient `n` of `cos t/(cosh r - cos t)`:
/// `exp(-r)/sinh r` for `n = 0`, `coth r exp(-|n| r)` otherwise.
fn factor_coefficient(r: &Real, n: i64) -> Real {
    if n == 0 {
        (-r).exp() / r.sinh()
    } else {
        (-(r * (n.abs() as f64))).exp() / r.tanh()
    }
}

/// Spectrum of the product example; `kmax` defaults to `ceil(40 / min(r1, r2))`.
pub fn example_forcing_spectrum(r1: f64, r2: f64, kmax: Option<usize>, prec: u32) -> Result<FourierSpectrum> {
    if !(r1 > 0.0 && r2 > 0.0) {
        return Err(Error::InvalidParameter(format!("decay rates must be positive, got ({r1}, {r2})")));
    }
    let kmax = kmax.unwrap_or_else(|| (40.0 / r1.min(r2)).ceil() as usize);
    if kmax < 8 {
        return Err(Error::InvalidParameter(format!("kmax = {kmax} too small to certify the decay constant (need >= 8)")));
    }
    let rr1 = Real::from_f64(r1, prec);
    let rr2 = Real::from_f64(r2, prec);
    let k = kmax as i64;
    let f1: Vec<Real> = (-k..=k).map(|n| factor_coefficient(&rr1, n)).collect();
    let f2: Vec<Real> = (-k..=k).map(|n| factor_coefficient(&rr2, n)).collect();
    let mut coeffs = BTreeMap::new();
    for k1 in -k..=k {
        for k2 in -k..=k {
            let v = &f1[(k1 + k) as usize] * &f2[(k2 + k) as usize];
            coeffs.insert((k1, k2), Complex::from_real(v));
        }
    }
    Ok(FourierSpectrum::new(coeffs, r1, r2, prec))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn example_is_real_and_certified() {
        let s = example_forcing_spectrum(1.0, 1.0, Some(32), 128).unwrap();
        assert_eq!(s.reality_defect(), 0.0);
        let coth = 1.0 / 1.0f64.tanh();
        assert!((s.decay_constant() - coth * coth).abs() < 1e-12);
        assert!(example_forcing_spectrum(1.0, 1.0, Some(4), 128).is_err());
        let (a, k0) = s.measure_convergent_bound(1.0, 1.0);
        assert_eq!(k0, 0);
        assert!(a > 0.99 * coth * coth && a < coth * coth);
    }

    #[test]
    fn reconstruction_matches_closed_form() {
        let p = 128;
        let s = example_forcing_spectrum(1.0, 1.5, Some(40), p).unwrap();
        let two_pi = Real::pi(p) * 2.0;
        let mut worst = 0.0f64;
        for i in 0..16 {
            for j in 0..16 {
                let a = &two_pi * (i as f64 / 16.0);
                let b = &two_pi * (j as f64 / 16.0);
                let diff = (s.eval(&a, &b) - example_forcing_value(1.0, 1.5, &a, &b)).abs().to_f64();
                worst = worst.max(diff);
            }
        }
        assert!(worst <= s.tail_bound() + 1e-30, "{worst} > {}", s.tail_bound());
    }

    #[test]
    fn json_round_trip() {
        let s = example_forcing_spectrum(1.0, 1.0, Some(8), 128).unwrap();
        let json = s.to_json().unwrap();
        let t = FourierSpectrum::from_json(&json, 1.0, 1.0, 128).unwrap();
        assert_eq!(t.len(), s.len());
        for (k, c) in s.iter() {
            assert!((&t.get(*k) - c).abs() < 1e-37);
        }
        assert!(json.contains("\"k1\""));
    }
}
