use proptest::prelude::*;

use splitlab::lab::config::AlphaLaw;
use splitlab::lab::sweep::{SweepRecord, SweepTable};
use splitlab::lab::{fit_rate_prefactor, FitModel};
use splitlab::melnikov::qp::{c_of_delta, EnvelopeData};
use splitlab::melnikov::{melnikov_residue, PoleSet};
use splitlab::model::{separatrix, ModelSpec};
use splitlab::mpnum::Real;

const P: u32 = 128;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn separatrix_has_zero_energy(u in -30.0f64..30.0) {
        let e = separatrix(&Real::from_f64(u, P)).energy().abs().to_f64();
        prop_assert!(e < 1e-35);
    }

    #[test]
    fn melnikov_translation_covariance(eps in 0.08f64..0.5, alpha in 0.05f64..0.95, u in -2.0f64..2.0, tau in 0.0f64..6.3, s in -3.0f64..3.0) {
        let spec = ModelSpec::periodic(eps, alpha, P).unwrap();
        let m = melnikov_residue(&spec, PoleSet::Complete).unwrap();
        let (u, tau, s) = (Real::from_f64(u, P), Real::from_f64(tau, P), Real::from_f64(s, P));
        let a = m.value(&u, &tau, &spec.epsilon);
        let b = m.value(&(&u + &s), &(&tau + &(&s / &spec.epsilon)), &spec.epsilon);
        prop_assert!(((a - b) / &m.amplitude).abs().to_f64() < 1e-25);
    }

    #[test]
    fn melnikov_amplitude_bounds_values(eps in 0.08f64..0.5, alpha in 0.05f64..0.95, tau in 0.0f64..6.3) {
        let spec = ModelSpec::periodic(eps, alpha, P).unwrap();
        let m = melnikov_residue(&spec, PoleSet::Complete).unwrap();
        let v = m.value(&Real::zero(P), &Real::from_f64(tau, P), &spec.epsilon);
        prop_assert!(v.abs() <= &m.amplitude * (1.0 + 1e-30));
    }

    #[test]
    fn envelope_periodic_and_bounded_below(r1 in 0.2f64..3.0, r2 in 0.2f64..3.0, d in -20.0f64..20.0, n in -4i32..4) {
        let env = EnvelopeData::new(r1, r2, P).unwrap();
        let d = Real::from_f64(d, P);
        let c = c_of_delta(&d, &env);
        let shifted = c_of_delta(&(&d + &(&env.period * n as f64)), &env);
        prop_assert!(((&c - &shifted) / &c).abs().to_f64() < 1e-25);
        prop_assert!(c >= env.c0);
        let g = (1.0 + 5f64.sqrt()) / 2.0;
        prop_assert!(c.to_f64() <= env.c0.to_f64() * (g.ln() / 2.0).cosh() * (1.0 + 1e-12));
    }

    #[test]
    fn fit_recovers_exact_data(a in 0.2f64..3.0, q in -5.0f64..5.0, lnc in -3.0f64..3.0) {
        let pts: Vec<(f64, f64)> = (0..8).map(|i| 0.06 * 1.2f64.powi(i)).map(|e| (e, (lnc + q * e.ln() - a / e).exp())).collect();
        let r = fit_rate_prefactor(&pts, FitModel::ExpPlusPower).unwrap();
        prop_assert!((r.rate.unwrap() - a).abs() < 1e-8);
        prop_assert!((r.power - q).abs() < 1e-8);
        prop_assert!((r.log_prefactor - lnc).abs() < 1e-8);
    }

    #[test]
    fn alpha_law_display_roundtrip(c in 0.01f64..5.0, r in 0.5f64..4.0, v in 0.0f64..0.99, kind in 0u8..3) {
        let law = match kind {
            0 => AlphaLaw::Fixed { value: v },
            1 => AlphaLaw::Power { c, r },
            _ => AlphaLaw::Narrow { c, r },
        };
        prop_assert_eq!(AlphaLaw::parse(&law.to_string()).unwrap(), law);
    }

    #[test]
    fn sweep_csv_roundtrip(eps in prop::collection::vec(0.01f64..0.5, 0..6), status in "[a-z ,\"]{0,12}") {
        let records = eps.iter().enumerate().map(|(i, &e)| SweepRecord {
            index: i,
            eps: e,
            alpha: 0.4,
            mu: if i % 2 == 0 { Some(1e-3) } else { None },
            eta: 2.0,
            regime: "intermediate".into(),
            quantity: "melnikov_amplitude".into(),
            method: "residue".into(),
            value: format!("{:.20e}", e.exp()),
            error: "1.000e-30".into(),
            prec: 128,
            status: if i == 0 { status.clone() } else { "ok".into() },
        }).collect();
        let t = SweepTable { name: "p".into(), records };
        prop_assert_eq!(SweepTable::from_csv("p", &t.to_csv()).unwrap(), t);
    }
}
