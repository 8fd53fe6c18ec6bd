//! Complex singularities of the Melnikov integrand and the residue constants.

use crate::error::{Error, Result};
use crate::model::{beta_denominator, beta_numerator, Variant};
use crate::mpnum::{arcsinh_branch, double_pole, find_root, Branch, Complex, DoublePole, Real};

#[derive(Clone, Debug)]
pub struct SingularityData {
    pub alpha: Real,
    pub variant: Variant,
    /// Standard: root of `sinh w = alpha + i sqrt(1 - alpha^2)` with the
    /// smaller imaginary part. Alternative: `i pi/2 - a`.
    pub rho_minus: Complex,
    /// Standard: `i pi - rho_minus`. Alternative: `i pi/2 + a`.
    pub rho_plus: Complex,
    /// Half-width of the analyticity strip of the coupling in `x`.
    pub strip_width: Real,
    /// Only defined for the Standard variant.
    pub deltas: Option<(Complex, Complex)>,
}

impl SingularityData {
    /// Imaginary part governing the exponential rate.
    pub fn rate(&self) -> Real {
        self.rho_minus.im.clone()
    }

    pub fn prec(&self) -> u32 {
        self.rho_minus.prec()
    }

    /// The four double poles of `beta` in the period strip `0 < Im w < 2 pi`,
    /// ordered by imaginary part.
    pub fn period_poles(&self) -> Vec<Complex> {
        let p = self.prec();
        let two_pi_i = Complex::new(Real::zero(p), Real::pi(p) * 2.0);
        let mut poles = vec![
            self.rho_minus.clone(),
            self.rho_plus.clone(),
            &self.rho_plus.conj() + &two_pi_i,
            &self.rho_minus.conj() + &two_pi_i,
        ];
        poles.sort_by(|a, b| a.im.partial_cmp(&b.im).unwrap().then(a.re.partial_cmp(&b.re).unwrap()));
        poles
    }

    /// Local double-pole data of `beta` at `rho`.
    pub fn pole_data(&self, rho: &Complex) -> Result<DoublePole> {
        let alpha = self.alpha.clone();
        let variant = self.variant;
        double_pole(&beta_numerator, &move |w: &Complex| beta_denominator(w, &alpha, variant), rho, self.prec())
    }
}

/// `ln((1 + sqrt(1 - alpha^2)) / alpha)` for `0 < alpha <= 1`.
pub fn strip_width(alpha: &Real) -> Result<Real> {
    if !(*alpha > 0.0) || *alpha > 1.0 {
        return Err(Error::InvalidParameter(format!("strip width needs 0 < alpha <= 1, got {alpha:?}")));
    }
    let s = (1.0 - alpha.square()).sqrt();
    Ok(((s + 1.0) / alpha).ln())
}

/// Unit-circle point `alpha + i sqrt(1 - alpha^2)`.
fn circle_point(alpha: &Real) -> Complex {
    Complex::new(alpha.clone(), (1.0 - alpha.square()).sqrt())
}

pub fn solve_singularities(alpha: &Real, variant: Variant) -> Result<SingularityData> {
    if !(*alpha > 0.0) || !(*alpha < 1.0) {
        return Err(Error::InvalidParameter(format!("singularities need 0 < alpha < 1, got {alpha:?}")));
    }
    let p = alpha.prec();
    let strip = strip_width(alpha)?;
    match variant {
        Variant::Standard => {
            let target = circle_point(alpha);
            let (guess, _) = arcsinh_branch(&target, Branch::Principal);
            let tol = Real::exp2i(-(p as i32) + 4, p);
            let rho_minus = find_root(|w: &Complex| &w.sinh() - &target, &guess, &tol)?;
            let rho_plus = &Complex::new(Real::zero(p), Real::pi(p)) - &rho_minus;
            let deltas = Some(delta_pair(alpha, &rho_minus));
            Ok(SingularityData { alpha: alpha.clone(), variant, rho_minus, rho_plus, strip_width: strip, deltas })
        }
        Variant::Alternative => {
            let a = (alpha * 2.0 / &(1.0 - alpha)).sqrt().asinh();
            let half_pi = Real::pi(p) / 2.0;
            let rho_minus = Complex::new(-&a, half_pi.clone());
            let rho_plus = Complex::new(a, half_pi);
            Ok(SingularityData { alpha: alpha.clone(), variant, rho_minus, rho_plus, strip_width: strip, deltas: None })
        }
    }
}

fn delta_pair(alpha: &Real, rho_minus: &Complex) -> (Complex, Complex) {
    let p = alpha.prec();
    let one_minus_sq = 1.0 - alpha.square();
    let two_pi = Real::pi(p) * 2.0;
    let (sh, ch) = rho_minus.sinh_cosh();
    let root = one_minus_sq.sqrt();
    let num1 = &sh - &Complex::new(Real::zero(p), root.clone());
    let delta1 = num1.scale(&(&two_pi / &(&one_minus_sq * &root)));
    let delta2 = (&sh / &ch).scale(&(&two_pi / &one_minus_sq));
    (delta1, delta2)
}

/// `(delta1, delta2)` for the Standard variant, with `cosh rho_minus`
/// evaluated at the solved root.
pub fn delta_constants(alpha: &Real) -> Result<(Complex, Complex)> {
    let p = alpha.prec();
    if !(*alpha > 0.0) || !(*alpha < 1.0) {
        return Err(Error::InvalidParameter(format!("delta constants need 0 < alpha < 1, got {alpha:?}")));
    }
    if (1.0 - alpha) < Real::exp2i(-(p as i32) / 2, p) {
        return Err(Error::InvalidParameter("1 - alpha below the precision floor; delta constants diverge".into()));
    }
    let data = solve_singularities(alpha, Variant::Standard)?;
    Ok(data.deltas.expect("standard variant carries deltas"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn root_identities() {
        let p = 192;
        for a in [0.05, 0.3, 0.6, 0.95] {
            let alpha = Real::from_f64(a, p);
            let s = solve_singularities(&alpha, Variant::Standard).unwrap();
            let target = circle_point(&alpha);
            assert!((&s.rho_minus.sinh() - &target).abs() < Real::exp2i(-(p as i32) + 8, p));
            assert!((&s.rho_plus.sinh() - &s.rho_minus.sinh()).abs() < 1e-50);
            let ch = s.rho_minus.cosh();
            let lhs = ch.square();
            let rhs = s.rho_minus.sinh().scale(&(&alpha * 2.0));
            assert!((&lhs - &rhs).abs() < 1e-50);
            let half_pi = std::f64::consts::FRAC_PI_2;
            let (im_m, im_p) = (s.rho_minus.im.to_f64(), s.rho_plus.im.to_f64());
            assert!(0.0 < im_m && im_m < half_pi && half_pi < im_p && im_p < std::f64::consts::PI);
        }
    }

    #[test]
    fn strip_width_values() {
        let p = 128;
        assert!(strip_width(&Real::one(p)).unwrap().abs() < 1e-35);
        let w = strip_width(&Real::parse("0.6", p).unwrap()).unwrap();
        assert!((&w - &Real::from_f64(3.0, p).ln()).abs() < 1e-35);
        let w = strip_width(&Real::from_f64(1e-4, p)).unwrap().to_f64();
        assert!((w - (2.0f64 / 1e-4).ln()).abs() < 1e-8);
        assert!(strip_width(&Real::zero(p)).is_err());
    }

    #[test]
    fn delta1_closed_form() {
        let p = 128;
        let alpha = Real::from_f64(0.5, p);
        let (d1, _) = delta_constants(&alpha).unwrap();
        let expect = Real::pi(p) * 2.0 * &alpha / (1.0 - alpha.square()).pow_f64(1.5);
        assert!((&d1 - &Complex::from_real(expect)).abs() < 1e-33);
        assert!((d1.re.to_f64() - 4.837).abs() < 1e-3);
    }

    #[test]
    fn alternative_poles_share_imaginary_part() {
        let p = 128;
        let s = solve_singularities(&Real::from_f64(0.4, p), Variant::Alternative).unwrap();
        let half_pi = Real::pi(p) / 2.0;
        assert_eq!(s.rho_minus.im, half_pi);
        assert_eq!(s.rho_plus.im, half_pi);
        let d = beta_denominator(&s.rho_plus, &s.alpha, Variant::Alternative);
        assert!(d.abs() < 1e-35);
    }
}
