//! Pendulum models, separatrix, Melnikov integrand and forcing descriptions.

mod spectrum;

pub use spectrum::{example_forcing_spectrum, example_forcing_value, FourierSpectrum, SpectrumRecord};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mpnum::{quad_finite_real, Complex, QuadOptions, Real};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    /// Coupling `sin x / (1 + alpha sin x)^2`.
    Standard,
    /// Coupling `sin x / (1 - alpha cos x)^2`.
    #[serde(alias = "alt")]
    Alternative,
}

impl std::str::FromStr for Variant {
    type Err = Error;
    fn from_str(s: &str) -> Result<Variant> {
        match s.to_ascii_lowercase().as_str() {
            "standard" | "std" => Ok(Variant::Standard),
            "alt" | "alternative" => Ok(Variant::Alternative),
            other => Err(Error::Parse(format!("unknown variant `{other}`"))),
        }
    }
}

/// Golden mean `(1 + sqrt 5)/2`.
pub fn golden_mean(prec: u32) -> Real {
    (Real::from_f64(5.0, prec).sqrt() + 1.0) / 2.0
}

/// Quasiperiodic forcing `F(theta1 + t/eps, theta2 + gamma t/eps)`.
#[derive(Clone, Debug)]
pub struct QpForcing {
    pub spectrum: FourierSpectrum,
    pub r1: f64,
    pub r2: f64,
    /// Measured constant `a` of the lower bound on convergent harmonics.
    pub a: f64,
    /// Measured threshold index `k0` of the same bound.
    pub k0: i64,
    /// Closed-form product example with these rates, used for fast evaluation.
    pub product_form: bool,
    /// Subtract the mean `F^[0,0]` so the forcing has zero average.
    pub remove_mean: bool,
}

impl QpForcing {
    /// The product example with its mean removed.
    pub fn example(r1: f64, r2: f64, kmax: Option<usize>, prec: u32) -> Result<QpForcing> {
        let spectrum = example_forcing_spectrum(r1, r2, kmax, prec)?;
        let (a, k0) = spectrum.measure_convergent_bound(r1, r2);
        Ok(QpForcing { spectrum, r1, r2, a, k0, product_form: true, remove_mean: true })
    }

    pub fn explicit(spectrum: FourierSpectrum, r1: f64, r2: f64) -> QpForcing {
        let (a, k0) = spectrum.measure_convergent_bound(r1, r2);
        QpForcing { spectrum, r1, r2, a, k0, product_form: false, remove_mean: true }
    }

    /// Coefficient entering the Melnikov sum (zero for `k = 0` when the mean is removed).
    pub fn coefficient(&self, k: (i64, i64)) -> Complex {
        if k == (0, 0) && self.remove_mean {
            return Complex::zero(self.spectrum.prec());
        }
        self.spectrum.get(k)
    }

    pub fn value(&self, th1: &Real, th2: &Real) -> Real {
        let full = if self.product_form {
            example_forcing_value(self.r1, self.r2, th1, th2)
        } else {
            self.spectrum.eval(th1, th2)
        };
        if self.remove_mean {
            full - &self.spectrum.get((0, 0)).re
        } else {
            full
        }
    }
}

#[derive(Clone, Debug)]
pub enum ForcingSpec {
    /// `f(tau) = sin tau`.
    PeriodicSin,
    Quasiperiodic(Box<QpForcing>),
}

/// Forcing phase(s) at a given instant.
#[derive(Clone, Debug)]
pub enum Phase {
    Periodic(Real),
    Torus(Real, Real),
}

impl ForcingSpec {
    pub fn value(&self, phase: &Phase) -> Result<Real> {
        match (self, phase) {
            (ForcingSpec::PeriodicSin, Phase::Periodic(t)) => Ok(t.sin()),
            (ForcingSpec::Quasiperiodic(q), Phase::Torus(a, b)) => Ok(q.value(a, b)),
            _ => Err(Error::InvalidParameter("phase kind does not match forcing".into())),
        }
    }

    pub fn qp(&self) -> Option<&QpForcing> {
        match self {
            ForcingSpec::Quasiperiodic(q) => Some(q),
            ForcingSpec::PeriodicSin => None,
        }
    }
}

/// Default ceiling for `eps^eta / (1 - alpha)^(3/2)`.
pub const DEFAULT_GUARD_CEILING: f64 = 0.5;

#[derive(Clone, Debug)]
pub struct ModelSpec {
    pub epsilon: Real,
    pub mu: Real,
    pub eta: f64,
    pub alpha: Real,
    pub variant: Variant,
    pub forcing: ForcingSpec,
    pub prec: u32,
}

impl ModelSpec {
    /// Periodic forcing, `mu = 0`, `eta = 0`.
    pub fn periodic(epsilon: f64, alpha: f64, prec: u32) -> Result<ModelSpec> {
        ModelSpec::new(Real::from_f64(epsilon, prec), Real::from_f64(alpha, prec), Variant::Standard, ForcingSpec::PeriodicSin, prec)
    }

    pub fn new(epsilon: Real, alpha: Real, variant: Variant, forcing: ForcingSpec, prec: u32) -> Result<ModelSpec> {
        if !(epsilon > 0.0) {
            return Err(Error::InvalidParameter(format!("epsilon = {epsilon:?} must be positive")));
        }
        if alpha < 0.0 || !(alpha < 1.0) {
            return Err(Error::InvalidParameter(format!("alpha = {alpha:?} must lie in [0, 1)")));
        }
        let epsilon = epsilon.with_prec(prec);
        let alpha = alpha.with_prec(prec);
        Ok(ModelSpec { epsilon, mu: Real::zero(prec), eta: 0.0, alpha, variant, forcing, prec })
    }

    pub fn with_perturbation(mut self, mu: f64, eta: f64) -> ModelSpec {
        self.mu = Real::from_f64(mu, self.prec);
        self.eta = eta;
        self
    }

    pub fn with_mu(mut self, mu: Real) -> ModelSpec {
        self.mu = mu.with_prec(self.prec);
        self
    }

    pub fn with_variant(mut self, variant: Variant) -> ModelSpec {
        self.variant = variant;
        self
    }

    pub fn with_forcing(mut self, forcing: ForcingSpec) -> ModelSpec {
        self.forcing = forcing;
        self
    }

    /// Same model at a different working precision.
    pub fn at_prec(&self, prec: u32) -> ModelSpec {
        let mut m = self.clone();
        m.epsilon = self.epsilon.with_prec(prec);
        m.mu = self.mu.with_prec(prec);
        m.alpha = self.alpha.with_prec(prec);
        m.prec = prec;
        m
    }

    /// `mu eps^eta`.
    pub fn strength(&self) -> Real {
        &self.mu * &self.epsilon.pow_f64(self.eta)
    }

    /// `eps^eta / (1 - alpha)^(3/2)`.
    pub fn perturbation_size(&self) -> f64 {
        let e = self.epsilon.to_f64();
        let one_minus = (1.0 - &self.alpha).to_f64();
        e.powf(self.eta) / one_minus.powf(1.5)
    }

    pub fn check_guard(&self, ceiling: f64) -> Result<()> {
        let size = self.perturbation_size();
        if size <= ceiling {
            Ok(())
        } else {
            Err(Error::GuardViolated { size, ceiling })
        }
    }

    pub fn coupling(&self, x: &Real) -> Real {
        coupling(x, &self.alpha, self.variant)
    }
}

/// `sin x / (1 + alpha sin x)^2` or `sin x / (1 - alpha cos x)^2`.
pub fn coupling(x: &Real, alpha: &Real, variant: Variant) -> Real {
    let (s, c) = x.sin_cos();
    let q = match variant {
        Variant::Standard => 1.0 + &(alpha * &s),
        Variant::Alternative => 1.0 - &(alpha * &c),
    };
    s / q.square()
}

#[derive(Clone, Debug)]
pub struct SeparatrixPoint {
    pub u: Real,
    pub x0: Real,
    pub y0: Real,
}

impl SeparatrixPoint {
    /// Unperturbed energy `y^2/2 + cos x - 1`.
    pub fn energy(&self) -> Real {
        energy(&self.x0, &self.y0)
    }
}

pub fn energy(x: &Real, y: &Real) -> Real {
    y.square() / 2.0 + x.cos() - 1.0
}

pub fn separatrix(u: &Real) -> SeparatrixPoint {
    let x0 = u.exp().atan() * 4.0;
    let y0 = 2.0 / u.cosh();
    SeparatrixPoint { u: u.clone(), x0, y0 }
}

/// Separatrix at complex time; rejected within `2^(-prec/2)` of `i pi/2 + i k pi`.
pub fn separatrix_complex(u: &Complex) -> Result<(Complex, Complex)> {
    let p = u.prec();
    let ch = u.cosh();
    let thresh = Real::exp2i(-((p / 2) as i32), p);
    if ch.abs() < thresh {
        return Err(Error::PoleProximity { point: format!("{u:.12}"), distance: ch.abs().to_f64() });
    }
    let e = u.exp();
    let i = Complex::i(p);
    let iz = &i * &e;
    // arctan z = (1/2i) ln((1 + iz)/(1 - iz))
    let ratio = &(&iz + 1.0) / &(&(-&iz) + 1.0);
    let atan = &ratio.ln() / &(&i * 2.0);
    let x0 = atan * 4.0;
    let y0 = &Complex::from_f64(2.0, 0.0, p) / &ch;
    Ok((x0, y0))
}

/// Numerator of the Melnikov integrand, `sinh u cosh u` for both variants.
pub fn beta_numerator(u: &Complex) -> Complex {
    let (s, c) = u.sinh_cosh();
    &s * &c
}

/// Square root of the integrand's denominator.
pub fn beta_denominator(u: &Complex, alpha: &Real, variant: Variant) -> Complex {
    let (s, c) = u.sinh_cosh();
    match variant {
        Variant::Standard => &c.square() - &s.scale(&(alpha * 2.0)),
        Variant::Alternative => &c.square().scale(&(1.0 - alpha)) + &(alpha * 2.0),
    }
}

/// Melnikov integrand `beta(u)`.
pub fn beta(u: &Complex, alpha: &Real, variant: Variant) -> Result<Complex> {
    let p = u.prec().max(alpha.prec());
    let d = beta_denominator(u, alpha, variant);
    let n = beta_numerator(u);
    let scale = n.abs().max(&Real::one(p));
    if d.abs() < Real::exp2i(-((p / 2) as i32), p) * &scale.sqrt() {
        return Err(Error::PoleProximity { point: format!("{u:.12}"), distance: d.abs().to_f64() });
    }
    Ok(&n / &d.square())
}

/// Real-argument integrand, no pole checks (the real line is pole free).
pub fn beta_real(u: &Real, alpha: &Real, variant: Variant) -> Real {
    let (s, c) = u.sinh_cosh();
    let d = match variant {
        Variant::Standard => c.square() - &(alpha * &s * 2.0),
        Variant::Alternative => c.square() * &(1.0 - alpha) + &(alpha * 2.0),
    };
    s * &c / d.square()
}

/// Generating function of the unperturbed separatrix, `4 e^u / cosh u`.
pub fn t0_generating(u: &Real) -> Real {
    u.exp() * 4.0 / u.cosh()
}

/// `d/du T0` from the quotient rule, `4 e^u (cosh u - sinh u) / cosh^2 u`.
pub fn t0_derivative(u: &Real) -> Real {
    let (s, c) = u.sinh_cosh();
    u.exp() * 4.0 * &(&c - &s) / c.square()
}

/// Checks `d/du T0 = y0^2 = 4 / cosh^2 u` to working precision.
pub fn check_t0_identity(u: &Real) -> bool {
    let p = u.prec();
    let lhs = t0_derivative(u);
    let y0 = separatrix(u).y0;
    let rhs = y0.square();
    let tol = Real::exp2i(-(p as i32) + 8, p) * &rhs.abs().max(&Real::one(p));
    (&lhs - &rhs).abs() <= tol
}

/// `psi(x) = int_0^x psi'`, with `psi' = -sin x/(1 + alpha sin x)^2` (Standard)
/// or `-sin x/(1 - alpha cos x)^2` (Alternative).
pub fn psi_potential(x: &Real, alpha: &Real, variant: Variant) -> Result<Real> {
    let p = x.prec().max(alpha.prec());
    if x.is_zero() {
        return Ok(Real::zero(p));
    }
    let opts = QuadOptions::new(p).max_panel(0.5);
    let (v, _) = quad_finite_real(|s| -coupling(s, alpha, variant), &Real::zero(p), x, &opts)?;
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn separatrix_points() {
        let p = 128;
        let s = separatrix(&Real::zero(p));
        assert!((&s.x0 - &Real::pi(p)).abs() < 1e-35);
        assert!((s.y0.to_f64() - 2.0).abs() < 1e-35);
        let u = (Real::from_f64(2.0, p).sqrt() + 1.0).ln();
        let s = separatrix(&u);
        assert!((&s.x0 - &(Real::pi(p) * 1.5)).abs() < 1e-35);
        assert!((&s.y0 - &Real::from_f64(2.0, p).sqrt()).abs() < 1e-35);
        for k in -2..=2 {
            assert!(separatrix(&Real::from_i64(k, p)).energy().abs() < 1e-35);
        }
    }

    #[test]
    fn complex_separatrix_matches_real_and_rejects_pole() {
        let p = 128;
        let u = Complex::from_f64(0.7, 0.0, p);
        let (x0, y0) = separatrix_complex(&u).unwrap();
        let s = separatrix(&u.re);
        assert!((&x0.re - &s.x0).abs() < 1e-33 && x0.im.abs() < 1e-33);
        assert!((&y0.re - &s.y0).abs() < 1e-33);
        let near = Complex::new(Real::zero(p), Real::pi(p) / 2.0);
        assert!(separatrix_complex(&near).is_err());
    }

    #[test]
    fn beta_reality_and_zero() {
        let p = 128;
        let a = Real::from_f64(0.3, p);
        assert!(beta(&Complex::zero(p), &a, Variant::Standard).unwrap().abs().is_zero());
        let u = Complex::from_f64(0.5, 0.2, p);
        for v in [Variant::Standard, Variant::Alternative] {
            let b1 = beta(&u.conj(), &a, v).unwrap();
            let b2 = beta(&u, &a, v).unwrap().conj();
            assert!((&b1 - &b2).abs() < 1e-35);
            let shifted = &u + &Complex::new(Real::zero(p), Real::pi(p) * 2.0);
            let b3 = beta(&shifted, &a, v).unwrap();
            assert!((&b3 - &beta(&u, &a, v).unwrap()).abs() < 1e-33);
            let br = beta_real(&u.re, &a, v);
            let bc = beta(&Complex::from_real(u.re.clone()), &a, v).unwrap();
            assert!((&br - &bc.re).abs() < 1e-35);
        }
    }

    #[test]
    fn t0_identity() {
        let p = 128;
        assert!((t0_derivative(&Real::zero(p)).to_f64() - 4.0).abs() < 1e-30);
        assert!((t0_generating(&Real::zero(p)).to_f64() - 4.0).abs() < 1e-30);
        for u in [-1.0, 0.3, 2.0] {
            assert!(check_t0_identity(&Real::from_f64(u, p)));
        }
    }

    #[test]
    fn psi_values() {
        let p = 128;
        let zero = Real::zero(p);
        let pi = Real::pi(p);
        assert!(psi_potential(&zero, &Real::from_f64(0.5, p), Variant::Standard).unwrap().is_zero());
        let v = psi_potential(&pi, &zero, Variant::Standard).unwrap();
        assert!((v.to_f64() + 2.0).abs() < 1e-30);
        // Refinement oracle: composite trapezoid with Richardson on a periodic smooth integrand.
        let a = 0.5f64;
        let f = |x: f64| -x.sin() / (1.0 + a * x.sin()).powi(2);
        let n = 4096;
        let h = 2.0 * std::f64::consts::PI / n as f64;
        let trap: f64 = (0..n).map(|i| f(i as f64 * h)).sum::<f64>() * h;
        let v = psi_potential(&(pi * 2.0), &Real::from_f64(a, p), Variant::Standard).unwrap();
        assert!((v.to_f64() - trap).abs() < 1e-12, "{} vs {}", v.to_f64(), trap);
    }

    #[test]
    fn guard() {
        let m = ModelSpec::periodic(0.25, 0.4, 128).unwrap().with_perturbation(1e-3, 2.0);
        assert!(m.check_guard(DEFAULT_GUARD_CEILING).is_ok());
        let m = ModelSpec::periodic(0.25, 0.99, 128).unwrap().with_perturbation(1e-3, 0.0);
        assert!(matches!(m.check_guard(DEFAULT_GUARD_CEILING), Err(Error::GuardViolated { .. })));
        assert!(ModelSpec::periodic(0.1, 1.0, 128).is_err());
        assert!(ModelSpec::periodic(-0.1, 0.2, 128).is_err());
    }
}
