use super::regime::{classify_regime, ForcingCase, Regime};
use super::{Method, MelnikovResult, PoleSet};
use crate::error::{Error, Result};
use crate::model::{beta_denominator, beta_numerator, beta_real, ForcingSpec, ModelSpec, Variant};
use crate::mpnum::{cancellation_prec, quad_semi_infinite, Complex, Direction, QuadOptions, Real};
use crate::singular::{solve_singularities, SingularityData};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    Unstable,
    Stable,
}

fn require_periodic(spec: &ModelSpec) -> Result<()> {
    match spec.forcing {
        ForcingSpec::PeriodicSin => Ok(()),
        ForcingSpec::Quasiperiodic(_) => Err(Error::InvalidParameter("periodic Melnikov needs sin forcing".into())),
    }
}

/// Singularity data, or `None` for `alpha = 0`.
fn singularities(spec: &ModelSpec) -> Result<Option<SingularityData>> {
    if spec.alpha.is_zero() {
        Ok(None)
    } else {
        solve_singularities(&spec.alpha, spec.variant).map(Some)
    }
}

fn rate(sing: &Option<SingularityData>, prec: u32) -> Real {
    match sing {
        Some(s) => s.rate(),
        None => Real::pi(prec) / 2.0,
    }
}

/// `alpha = 0`: `I = 2 pi i / (eps^2 sinh(pi/(2 eps)))`.
fn entire_coefficient(eps: &Real) -> Complex {
    let p = eps.prec();
    let pi = Real::pi(p);
    let mag = &pi * 2.0 / (eps.square() * &(&pi / &(eps * 2.0)).sinh());
    Complex::new(Real::zero(p), mag)
}

/// `8 pi i sum Res[beta(w) exp(i w/eps)]` over the selected poles.
pub(crate) fn residue_coefficient(sing: &SingularityData, eps: &Real, poles: PoleSet) -> Result<(Complex, Real)> {
    let p = sing.prec().max(eps.prec());
    let k = eps.recip();
    let all = sing.period_poles();
    let chosen: Vec<Complex> = match (poles, sing.variant) {
        (PoleSet::Leading, Variant::Standard) => vec![sing.rho_minus.clone()],
        (PoleSet::Leading, Variant::Alternative) | (PoleSet::Pair, _) => {
            vec![sing.rho_minus.clone(), sing.rho_plus.clone()]
        }
        (PoleSet::Complete, _) => all.clone(),
    };
    let eight_pi_i = Complex::new(Real::zero(p), Real::pi(p) * 8.0);
    let mut sum = Complex::zero(p);
    for rho in &chosen {
        sum += &sing.pole_data(rho)?.residue(&k);
    }
    let mut coef = &eight_pi_i * &sum;
    let err = match poles {
        PoleSet::Complete => {
            let damp = 1.0 - &(-(Real::pi(p) * 2.0 / eps)).exp();
            coef = coef / &damp;
            coef.abs() * &Real::exp2i(-(p as i32) + 16, p)
        }
        _ => {
            // Size of the first omitted pole.
            let next = all
                .iter()
                .find(|w| !chosen.iter().any(|c| (*w - c).abs() < 1e-20))
                .expect("period strip has four poles");
            (&eight_pi_i * &sing.pole_data(next)?.residue(&k)).abs()
        }
    };
    Ok((coef, err))
}

pub fn melnikov_residue(spec: &ModelSpec, poles: PoleSet) -> Result<MelnikovResult> {
    require_periodic(spec)?;
    let p = spec.prec;
    let sing = singularities(spec)?;
    let eps = &spec.epsilon;
    let Some(sing) = sing else {
        let c = entire_coefficient(eps);
        let err = c.abs() * &Real::exp2i(-(p as i32) + 8, p);
        return Ok(MelnikovResult::from_coefficient(c, Real::pi(p) / 2.0, Method::Residue, err));
    };
    let (coef, err) = residue_coefficient(&sing, eps, poles)?;
    let mut res = MelnikovResult::from_coefficient(coef, sing.rate(), Method::Residue, err);
    if poles == PoleSet::Leading && spec.variant == Variant::Standard {
        let class = classify_regime(eps.to_f64(), spec.alpha.to_f64(), ForcingCase::Periodic);
        if matches!(class.regime, Regime::Transition { .. }) {
            res.warning = Some("transition regime: rho_plus contributes at the same order".into());
        }
    }
    Ok(res)
}

fn beta_point(w: &Complex, alpha: &Real, variant: Variant) -> Complex {
    let d = beta_denominator(w, alpha, variant);
    &beta_numerator(w) / &d.square()
}

/// `4 int beta(u + s + i sgn c) exp(i sgn (s + i sgn c)/eps) ds` over real `s`.
fn shifted_harmonic(u: &Real, spec: &ModelSpec, sgn: f64, c: &Real, prec: u32) -> Result<(Complex, Real)> {
    let eps = spec.epsilon.with_prec(prec);
    let alpha = spec.alpha.with_prec(prec);
    let u = u.with_prec(prec);
    let ic = c.with_prec(prec) * sgn;
    let damp = (-(c.with_prec(prec) / &eps)).exp();
    let variant = spec.variant;
    let inv_eps = eps.recip() * sgn;
    let f = |s: &Real| {
        let w = Complex::new(&u + s, ic.clone());
        let b = beta_point(&w, &alpha, variant);
        &b * &Complex::cis(&(s * &inv_eps))
    };
    let panel = std::f64::consts::PI * eps.to_f64() / 2.0;
    let opts = QuadOptions::new(prec).max_panel(panel);
    let zero = Real::zero(prec);
    let fwd = quad_semi_infinite(f, &zero, Direction::Forward, 2.0, &opts)?;
    let bwd = quad_semi_infinite(f, &zero, Direction::Backward, 2.0, &opts)?;
    let total = (&fwd.value + &bwd.value).scale(&(damp.clone() * 4.0));
    let err = (fwd.error_estimate + &bwd.error_estimate) * &damp * 4.0;
    Ok((total, err))
}

/// Both `k = +-1` harmonic integrals along `Im w = +-contour_shift`; the
/// default shift is `Im rho_minus - 2 eps`. A zero shift integrates on the
/// real line with the precision raised to absorb the cancellation.
pub fn melnikov_quadrature(u: &Real, spec: &ModelSpec, contour_shift: Option<&Real>) -> Result<MelnikovResult> {
    require_periodic(spec)?;
    let sing = singularities(spec)?;
    let p = spec.prec;
    let rate = rate(&sing, p);
    let eps = &spec.epsilon;
    let shift = match contour_shift {
        Some(c) => c.clone(),
        None => (&rate - &(eps * 2.0)).max(&Real::zero(p)),
    };
    if shift.is_sign_negative() && !shift.is_zero() {
        return Err(Error::InvalidParameter("contour shift must be non-negative".into()));
    }
    if shift >= rate {
        return Err(Error::PoleProximity { point: format!("Im w = {shift:?}"), distance: (&rate - &shift).to_f64() });
    }
    let prec = if shift.is_zero() {
        cancellation_prec(rate.to_f64(), eps.to_f64(), p)
    } else {
        cancellation_prec((&rate - &shift).to_f64(), eps.to_f64(), p)
    };
    let (plus, e_plus) = shifted_harmonic(u, spec, 1.0, &shift, prec)?;
    let (minus, e_minus) = shifted_harmonic(u, spec, -1.0, &shift, prec)?;
    let mismatch = (&plus - &minus.conj()).abs();
    let avg = (&plus + &minus.conj()).scale(&Real::from_f64(0.5, prec));
    let u_phase = Complex::cis(&(u.with_prec(prec) / &eps.with_prec(prec)));
    let coef = (&avg * &u_phase).with_prec(p);
    let err = (e_plus + &e_minus + &mismatch).with_prec(p);
    Ok(MelnikovResult::from_coefficient(coef, rate, Method::Quadrature, err))
}

/// Leading-order formula of the regime; phases not given by the formula
/// are taken from the matching residue computation.
pub fn melnikov_asymptotic(spec: &ModelSpec, regime: &Regime) -> Result<MelnikovResult> {
    require_periodic(spec)?;
    if spec.variant != Variant::Standard {
        return Err(Error::RegimeMismatch("asymptotic formulas are stated for the Standard model".into()));
    }
    let p = spec.prec;
    let eps = &spec.epsilon;
    let pi = Real::pi(p);
    let sqrt2 = Real::from_f64(2.0, p).sqrt();
    let zero = Real::zero(p);
    let check_law = |c: f64, r: f64| -> Result<()> {
        let law = c * eps.to_f64().powf(r);
        let actual = (1.0 - &spec.alpha).to_f64();
        if (law - actual).abs() > 1e-6 * actual {
            return Err(Error::RegimeMismatch(format!("1 - alpha = {actual:e} but C eps^r = {law:e}")));
        }
        Ok(())
    };
    let with_amp = |amplitude: Real, phase_from: &MelnikovResult, rate: Real| {
        let coef = Complex::from_polar(&amplitude, &phase_from.phase);
        MelnikovResult::from_coefficient(coef, rate, Method::Asymptotic, Real::zero(p))
    };
    match *regime {
        Regime::WideStrip { .. } => {
            let amp = &pi * 4.0 / eps.square() * &(-(&pi / &(eps * 2.0))).exp();
            let coef = Complex::new(zero, amp);
            Ok(MelnikovResult::from_coefficient(coef, pi / 2.0, Method::Asymptotic, Real::zero(p)))
        }
        Regime::Transition { .. } => {
            let mut r = melnikov_residue(spec, PoleSet::Pair)?;
            r.method = Method::Asymptotic;
            r.rate = pi / 2.0;
            Ok(r)
        }
        Regime::Intermediate { .. } => {
            let sing = solve_singularities(&spec.alpha, Variant::Standard)?;
            let (d1, d2) = sing.deltas.clone().expect("standard deltas");
            let bracket = &d2.scale(&eps.recip()) + &d1;
            let phase = sing.rho_minus.mul_i().scale(&eps.recip()).exp();
            let coef = &phase * &bracket;
            Ok(MelnikovResult::from_coefficient(coef, sing.rate(), Method::Asymptotic, Real::zero(p)))
        }
        Regime::NarrowExp { c, r } => {
            check_law(c, r)?;
            let sing = solve_singularities(&spec.alpha, Variant::Standard)?;
            let lead = melnikov_residue(spec, PoleSet::Leading)?;
            let amp = &pi / (&sqrt2 * c * &eps.pow_f64(1.0 + r)) * &(-(sing.rate() / eps)).exp();
            Ok(with_amp(amp, &lead, sing.rate()))
        }
        Regime::NarrowPoly { c, r } => {
            check_law(c, r)?;
            let full = melnikov_residue(spec, PoleSet::Complete)?;
            let c_r = Real::from_f64(c, p);
            let amp = if (r - 2.0).abs() < 1e-12 {
                &pi * &(-c_r.sqrt()).exp() / (&sqrt2 * &c_r.pow_f64(1.5) * &eps.powi(3))
            } else {
                &pi / (&sqrt2 * &c_r.pow_f64(1.5) * &eps.pow_f64(1.5 * r))
            };
            Ok(with_amp(amp, &full, zero))
        }
    }
}

/// Unstable: `-4 int_{-inf}^0 beta(u+s) sin(tau + s/eps) ds`;
/// stable: `4 int_0^inf` of the same integrand.
pub fn half_melnikov(u: &Real, tau: &Real, spec: &ModelSpec, side: Side) -> Result<Real> {
    require_periodic(spec)?;
    let p = spec.prec;
    let eps = &spec.epsilon;
    let alpha = &spec.alpha;
    let variant = spec.variant;
    let f = |s: &Real| {
        let phase = tau + &(s / eps);
        Complex::from_real(beta_real(&(u + s), alpha, variant) * &phase.sin())
    };
    let opts = QuadOptions::new(p).max_panel(std::f64::consts::PI * eps.to_f64() / 2.0);
    let zero = Real::zero(p);
    let (dir, sign) = match side {
        Side::Unstable => (Direction::Backward, -4.0),
        Side::Stable => (Direction::Forward, 4.0),
    };
    let r = quad_semi_infinite(f, &zero, dir, 2.0, &opts)?;
    Ok(r.value.re * sign)
}

/// `L = eps A cos(tau - u/eps + theta)`, so that `d/du L = M`.
pub fn melnikov_potential(u: &Real, tau: &Real, spec: &ModelSpec) -> Result<Real> {
    let m = melnikov_residue(spec, PoleSet::Complete)?;
    let eps = &spec.epsilon;
    let arg = tau - &(u / eps) + &m.phase;
    Ok(eps * &m.amplitude * &arg.cos())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(eps: f64, alpha: f64, prec: u32) -> ModelSpec {
        ModelSpec::periodic(eps, alpha, prec).unwrap()
    }

    #[test]
    fn residue_matches_real_line_quadrature() {
        let s = spec(0.2, 0.4, 128);
        let r = melnikov_residue(&s, PoleSet::Complete).unwrap();
        let q = melnikov_quadrature(&Real::zero(128), &s, Some(&Real::zero(128))).unwrap();
        let rel = (&(&r.coefficient - &q.coefficient).abs() / &r.amplitude).to_f64();
        assert!(rel < 1e-20, "{rel}");
    }

    #[test]
    fn entire_case_closed_form() {
        let s = spec(0.1, 0.0, 128);
        let r = melnikov_residue(&s, PoleSet::Complete).unwrap();
        let q = melnikov_quadrature(&Real::zero(128), &s, None).unwrap();
        let rel = (&(&r.coefficient - &q.coefficient).abs() / &r.amplitude).to_f64();
        assert!(rel < 1e-20, "{rel}");
        assert!((r.phase.to_f64() - std::f64::consts::FRAC_PI_2).abs() < 1e-30);
    }

    #[test]
    fn halves_add_up() {
        let s = spec(0.2, 0.4, 128);
        let u = Real::zero(128);
        let tau = Real::from_f64(0.7, 128);
        let ms = half_melnikov(&u, &tau, &s, Side::Stable).unwrap();
        let mu = half_melnikov(&u, &tau, &s, Side::Unstable).unwrap();
        let m = melnikov_residue(&s, PoleSet::Complete).unwrap().value(&u, &tau, &s.epsilon);
        assert!(((ms - mu) - &m).abs() < 1e-25 * m.abs().to_f64().max(1e-10));
    }

    #[test]
    fn potential_derivative() {
        let s = spec(0.15, 0.5, 128);
        let tau = Real::from_f64(1.0, 128);
        let u = Real::from_f64(0.4, 128);
        let h = Real::from_f64(1e-6 * 0.15, 128);
        let lp = melnikov_potential(&(&u + &h), &tau, &s).unwrap();
        let lm = melnikov_potential(&(&u - &h), &tau, &s).unwrap();
        let fd = (lp - lm) / (&h * 2.0);
        let m = melnikov_residue(&s, PoleSet::Complete).unwrap().value(&u, &tau, &s.epsilon);
        assert!(((&fd - &m) / &m).abs() < 1e-8);
    }

    #[test]
    fn transition_warning() {
        let s = spec(0.1, 0.01, 128);
        assert!(melnikov_residue(&s, PoleSet::Leading).unwrap().warning.is_some());
        assert!(melnikov_residue(&s, PoleSet::Pair).unwrap().warning.is_none());
    }
}
