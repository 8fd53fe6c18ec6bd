//! Independent double-precision and FFT cross-checks.

use std::f64::consts::PI;

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

use splitlab::melnikov::qp::QpSeries;
use splitlab::melnikov::{melnikov_residue, PoleSet};
use splitlab::model::{ForcingSpec, ModelSpec, QpForcing, Variant};
use splitlab::mpnum::Real;

/// `|int y0 h(x0) exp(i s/eps) ds|` by the trapezoid rule on the real line.
fn trapezoid_amplitude(eps: f64, alpha: f64, variant: Variant) -> f64 {
    let h = 1e-3;
    let n = 60_000;
    let mut acc = Complex64::new(0.0, 0.0);
    for j in -n..=n {
        let s = j as f64 * h;
        let x0 = 4.0 * s.exp().atan();
        let y0 = 2.0 / s.cosh();
        let c = match variant {
            Variant::Standard => x0.sin() / (1.0 + alpha * x0.sin()).powi(2),
            Variant::Alternative => x0.sin() / (1.0 - alpha * x0.cos()).powi(2),
        };
        acc += Complex64::from_polar(y0 * c, s / eps);
    }
    (acc * h).norm()
}

#[test]
fn residue_amplitude_matches_trapezoid() {
    for variant in [Variant::Standard, Variant::Alternative] {
        for (eps, alpha) in [(0.3, 0.2), (0.3, 0.6), (0.2, 0.4), (0.5, 0.8)] {
            let spec = ModelSpec::periodic(eps, alpha, 128).unwrap().with_variant(variant);
            let r = melnikov_residue(&spec, PoleSet::Complete).unwrap().amplitude.to_f64();
            let q = trapezoid_amplitude(eps, alpha, variant);
            assert!((r / q - 1.0).abs() < 1e-10, "{variant:?} eps={eps} alpha={alpha}: {r} vs {q}");
        }
    }
}

#[test]
fn narrow_strip_r2_prefactor_is_twice_the_closed_form() {
    // alpha = 1 - eps^2: amplitude sqrt2 eps^3 e / pi tends to 2
    let eps = 0.1;
    let q = trapezoid_amplitude(eps, 1.0 - eps * eps, Variant::Standard);
    let spec = ModelSpec::periodic(eps, 1.0 - eps * eps, 128).unwrap();
    let r = melnikov_residue(&spec, PoleSet::Complete).unwrap().amplitude.to_f64();
    assert!((r / q - 1.0).abs() < 1e-9, "{r} vs {q}");
    let ratio = q * 2f64.sqrt() * eps.powi(3) * std::f64::consts::E / PI;
    assert!((ratio - 2.0).abs() < 10.0 * eps * eps, "{ratio}");
}

#[test]
fn wide_strip_limit_is_exact() {
    // alpha = 0: amplitude 2 pi / (eps^2 sinh(pi/(2 eps)))
    for eps in [0.1, 0.2, 0.4] {
        let spec = ModelSpec::periodic(eps, 0.0, 128).unwrap();
        let r = melnikov_residue(&spec, PoleSet::Complete).unwrap().amplitude.to_f64();
        let exact = 2.0 * PI / (eps * eps * (PI / (2.0 * eps)).sinh());
        assert!((r / exact - 1.0).abs() < 1e-13, "eps={eps}");
    }
}

#[test]
fn torus_dft_matches_series_coefficients() {
    let p = 128;
    let f = QpForcing::example(1.0, 1.0, None, p).unwrap();
    let spec = ModelSpec::periodic(0.3, 0.3, p).unwrap().with_forcing(ForcingSpec::Quasiperiodic(Box::new(f)));
    // kmax below n/2 so that the grid does not alias
    let series = QpSeries::new(&spec, Some(12)).unwrap();
    let n = 64usize;
    let two_pi = Real::pi(p) * 2.0;
    let zero = Real::zero(p);
    let mut grid = vec![Complex64::new(0.0, 0.0); n * n];
    for i in 0..n {
        for j in 0..n {
            let a = &two_pi * (i as f64 / n as f64);
            let b = &two_pi * (j as f64 / n as f64);
            grid[i * n + j] = Complex64::new(series.eval(&zero, &a, &b).to_f64(), 0.0);
        }
    }
    // 2-D forward transform: rows, then columns
    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_forward(n);
    for row in grid.chunks_mut(n) {
        fft.process(row);
    }
    let mut col = vec![Complex64::new(0.0, 0.0); n];
    for j in 0..n {
        for i in 0..n {
            col[i] = grid[i * n + j];
        }
        fft.process(&mut col);
        for i in 0..n {
            grid[i * n + j] = col[i];
        }
    }
    let coef = |k: (i64, i64)| {
        series
            .terms()
            .iter()
            .find(|t| t.k == k)
            .map(|t| Complex64::new(t.coefficient.re.to_f64(), t.coefficient.im.to_f64()))
            .unwrap_or_default()
    };
    let scale = series.terms().iter().map(|t| t.coefficient.abs().to_f64()).fold(0.0, f64::max);
    let norm = (n * n) as f64;
    let mut best = ((0, 0), 0.0);
    for k1 in -8i64..=8 {
        for k2 in -8i64..=8 {
            let idx = (k1.rem_euclid(n as i64) as usize) * n + k2.rem_euclid(n as i64) as usize;
            let got = grid[idx] / norm;
            let expect = (coef((k1, k2)) + coef((-k1, -k2)).conj()) * 0.5;
            assert!((got - expect).norm() < 1e-10 * scale, "k=({k1},{k2}): {got} vs {expect}");
            if k2 > 0 && got.norm() > best.1 {
                best = ((k1, k2), got.norm());
            }
        }
    }
    assert_eq!(Some(best.0), series.dominant_harmonic());
}
