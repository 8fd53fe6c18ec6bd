use serde::Serialize;

use crate::error::Result;
use crate::melnikov::qp::QpSeries;
use crate::melnikov::{melnikov_residue, PoleSet};
use crate::model::{separatrix, ForcingSpec, ModelSpec};
use crate::mpnum::Real;
use crate::oracle::Section;

/// First-order prediction `d0 = mu eps^eta M(u_s, .) / y0(u_s)` on a phase grid.
#[derive(Clone, Debug, Serialize)]
pub struct D0Profile {
    pub section: Section,
    /// Samples `(phase, d0)`; torus grids are row-major in `(theta1, theta2)`.
    #[serde(skip)]
    pub samples: Vec<(Vec<Real>, Real)>,
    /// First-harmonic amplitude (periodic) or sup over the grid (torus).
    #[serde(skip)]
    pub amplitude: Real,
    /// Phase `phi` in `d0 = A sin(tau + phi)`; zero for the torus.
    #[serde(skip)]
    pub phase: Real,
    pub method: &'static str,
}

/// `mu eps^eta / y0(u_s)`; the factor is `1/2` at `x = pi` and `1/sqrt 2` at `x = 3 pi/2`.
pub fn section_factor(spec: &ModelSpec, section: Section) -> Real {
    let y0 = separatrix(&section.u(spec.prec)).y0;
    spec.strength() / &y0
}

pub fn assemble_d0(spec: &ModelSpec, section: Section, n: usize) -> Result<D0Profile> {
    let p = spec.prec;
    let two_pi = Real::pi(p) * 2.0;
    let factor = section_factor(spec, section);
    let u = section.u(p);
    match &spec.forcing {
        ForcingSpec::PeriodicSin => {
            let m = melnikov_residue(spec, PoleSet::Complete)?;
            let samples = (0..n)
                .map(|j| {
                    let tau = &two_pi * (j as f64 / n as f64);
                    let v = m.value(&u, &tau, &spec.epsilon) * &factor;
                    (vec![tau], v)
                })
                .collect();
            // M(u, tau) = A sin(tau - u/eps + theta)
            let phase = (&m.phase - &(&u / &spec.epsilon)).rem_euclid(&two_pi);
            Ok(D0Profile { section, samples, amplitude: &m.amplitude * &factor.abs(), phase, method: "residue" })
        }
        ForcingSpec::Quasiperiodic(_) => {
            let series = QpSeries::new(spec, None)?;
            let mut samples = Vec::with_capacity(n * n);
            let mut sup = Real::zero(p);
            for i in 0..n {
                for j in 0..n {
                    let a = &two_pi * (i as f64 / n as f64);
                    let b = &two_pi * (j as f64 / n as f64);
                    let v = series.eval(&u, &a, &b) * &factor;
                    sup = sup.max(&v.abs());
                    samples.push((vec![a, b], v));
                }
            }
            Ok(D0Profile { section, samples, amplitude: sup, phase: Real::zero(p), method: "qp-series" })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::singular::delta_constants;

    #[test]
    fn zero_mu_is_zero() {
        let spec = ModelSpec::periodic(0.2, 0.4, 128).unwrap();
        let d = assemble_d0(&spec, Section::Pi, 8).unwrap();
        assert!(d.samples.iter().all(|(_, v)| v.is_zero()));
    }

    #[test]
    fn wide_strip_display() {
        // alpha = 0: d0 = pi mu eps^(eta - 2) cos tau / sinh(pi/(2 eps))
        let (eps, mu, eta) = (0.2, 1e-3, 2.0);
        let spec = ModelSpec::periodic(eps, 0.0, 128).unwrap().with_perturbation(mu, eta);
        let d = assemble_d0(&spec, Section::Pi, 16).unwrap();
        let pref = std::f64::consts::PI * mu * eps.powf(eta - 2.0) / (std::f64::consts::PI / (2.0 * eps)).sinh();
        for (t, v) in &d.samples {
            let expect = pref * t[0].cos().to_f64();
            assert!((v.to_f64() - expect).abs() < 1e-12 * pref, "{} vs {}", v.to_f64(), expect);
        }
    }

    #[test]
    fn intermediate_display() {
        let (eps, alpha, mu, eta) = (0.05, 0.4, 1e-3, 2.0);
        let spec = ModelSpec::periodic(eps, alpha, 128).unwrap().with_perturbation(mu, eta);
        let d = assemble_d0(&spec, Section::Pi, 16).unwrap();
        let (_, d2) = delta_constants(&spec.alpha).unwrap();
        let rate = crate::singular::solve_singularities(&spec.alpha, spec.variant).unwrap().rate().to_f64();
        let display = d2.abs().to_f64() / 2.0 * mu * eps.powf(eta - 1.0) * (-rate / eps).exp();
        let rel = d.amplitude.to_f64() / display - 1.0;
        assert!(rel.abs() < 3.0 * eps, "{rel}");
    }
}
