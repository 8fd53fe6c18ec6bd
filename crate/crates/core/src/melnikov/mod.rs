//! Melnikov functions: periodic (three independent evaluation routes) and
//! quasiperiodic (harmonic residues, envelope, torus evaluation).

mod periodic;
pub mod qp;
mod regime;

pub use periodic::{
    half_melnikov, melnikov_asymptotic, melnikov_potential, melnikov_quadrature, melnikov_residue, Side,
};
pub use regime::{classify_regime, ForcingCase, Regime, RegimeClass, TRANSITION_BAND};

use serde::Serialize;

use crate::mpnum::{Complex, Real};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Method {
    Residue,
    Quadrature,
    Asymptotic,
}

/// Which double poles of the integrand enter a residue sum.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PoleSet {
    /// Poles nearest the real axis (`rho_minus`; both `i pi/2 -+ a` for the Alternative model).
    Leading,
    /// `rho_minus` and `rho_plus`.
    Pair,
    /// All four poles of a `2 pi i` period strip, summed exactly.
    Complete,
}

/// First-harmonic decomposition `M(u, tau) = Im[I exp(i(tau - u/eps))]`
/// `= amplitude sin(tau - u/eps + phase)`.
#[derive(Clone, Debug)]
pub struct MelnikovResult {
    pub coefficient: Complex,
    pub amplitude: Real,
    /// `arg I` reduced into `[0, 2 pi)`.
    pub phase: Real,
    /// Coefficient `a` of `exp(-a/eps)`; zero for non-exponential regimes.
    pub rate: Real,
    pub method: Method,
    pub error_estimate: Real,
    pub warning: Option<String>,
}

impl MelnikovResult {
    pub fn from_coefficient(coefficient: Complex, rate: Real, method: Method, error_estimate: Real) -> MelnikovResult {
        let p = coefficient.prec();
        let amplitude = coefficient.abs();
        let phase = coefficient.arg().rem_euclid(&(Real::pi(p) * 2.0));
        MelnikovResult { coefficient, amplitude, phase, rate, method, error_estimate, warning: None }
    }

    pub fn value(&self, u: &Real, tau: &Real, eps: &Real) -> Real {
        let arg = tau - &(u / eps);
        let (s, c) = arg.sin_cos();
        let mut v = &self.coefficient.re * &s;
        v.add_mul(&self.coefficient.im, &c);
        v
    }

    /// The phase `phi` in the form `amplitude sin(tau - phi - u/eps)`.
    pub fn phi(&self) -> Real {
        let p = self.phase.prec();
        (-&self.phase).rem_euclid(&(Real::pi(p) * 2.0))
    }
}
