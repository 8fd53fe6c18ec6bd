use super::complex::Complex;
use super::real::Real;

/// Which determination of `arcsinh` to return.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Branch {
    /// `ln(z + sqrt(1 + z^2))` with principal `ln` and `sqrt`.
    Principal,
    /// `i pi - principal(z)`.
    Shifted,
}

/// Whether the argument sat on a branch cut of the principal determination.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BranchStatus {
    Regular,
    /// `z = i y` with `|y| >= 1`; the value is the limit taken from `Re z > 0`.
    CutLimit,
}

pub fn arcsinh_branch(z: &Complex, branch: Branch) -> (Complex, BranchStatus) {
    let p = z.prec();
    let on_cut = z.re.is_zero() && z.im.abs() >= 1.0;
    let arg = if on_cut {
        Complex::new(Real::zero(p), z.im.clone())
    } else {
        z.clone()
    };
    let one_plus_sq = &arg.square() + 1.0;
    // On the cut 1 + z^2 is a non-positive real: pick the root continuous from Re z > 0.
    let root = if on_cut {
        let s = (-&one_plus_sq.re).sqrt();
        let im = if z.im.is_sign_negative() { -s } else { s };
        Complex::new(Real::zero(p), im)
    } else {
        one_plus_sq.sqrt()
    };
    let principal = (&arg + &root).ln();
    let value = match branch {
        Branch::Principal => principal,
        Branch::Shifted => &Complex::new(Real::zero(p), Real::pi(p)) - &principal,
    };
    let status = if on_cut { BranchStatus::CutLimit } else { BranchStatus::Regular };
    (value, status)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inverts_sinh() {
        for &(x, y) in &[(0.3, 0.2), (-1.2, 0.7), (0.5, (1.0f64 - 0.25).sqrt()), (2.0, -3.0)] {
            let z = Complex::from_f64(x, y, 160);
            let (w, st) = arcsinh_branch(&z, Branch::Principal);
            assert_eq!(st, BranchStatus::Regular);
            let back = w.sinh();
            assert!((&back - &z).abs() < 1e-45);
            let (w2, _) = arcsinh_branch(&z, Branch::Shifted);
            assert!((&w2.sinh() - &z).abs() < 1e-45);
        }
    }

    #[test]
    fn unit_circle_lands_in_first_quadrant_strip() {
        for &a in &[0.01, 0.3, 0.5, 0.9, 0.999] {
            let z = Complex::from_f64(a, (1.0f64 - a * a).sqrt(), 128);
            let (w, _) = arcsinh_branch(&z, Branch::Principal);
            let im = w.im.to_f64();
            assert!(im > 0.0 && im < std::f64::consts::FRAC_PI_2, "{a}: {im}");
        }
    }

    #[test]
    fn cut_limit() {
        let z = Complex::from_f64(0.0, 2.0, 128);
        let (w, st) = arcsinh_branch(&z, Branch::Principal);
        assert_eq!(st, BranchStatus::CutLimit);
        assert!((w.im.to_f64() - std::f64::consts::FRAC_PI_2).abs() < 1e-30);
        assert!((w.re.to_f64() - (2.0f64 + 3.0f64.sqrt()).ln()).abs() < 1e-15);
        let (w, st) = arcsinh_branch(&Complex::from_f64(0.0, 1.0, 128), Branch::Principal);
        assert_eq!(st, BranchStatus::CutLimit);
        assert!(w.re.abs() < 1e-30);
    }
}
