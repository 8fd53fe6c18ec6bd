//! Acceptance checks A1 to A11 with their tolerances.

use std::f64::consts::{FRAC_PI_2, PI, SQRT_2};
use std::time::Instant;

use serde::Serialize;

use super::config::geometric;
use super::d0::assemble_d0;
use super::fit::{fit_rate_prefactor, FitModel};
use crate::error::Result;
use crate::melnikov::qp::{c_of_delta, envelope_reference_in, is_convergent, leading_harmonic, EnvelopeData, QpSeries};
use crate::melnikov::{half_melnikov, melnikov_quadrature, melnikov_residue, PoleSet, Regime, Side};
use crate::model::{check_t0_identity, golden_mean, ForcingSpec, ModelSpec, Phase, QpForcing, Variant};
use crate::mpnum::{Complex, Real};
use crate::oracle::{monodromy_floquet_at, splitting_profile_periodic, splitting_profile_qp, Section, SplittingProfile};
use crate::singular::{delta_constants, solve_singularities};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Level {
    /// Skips the oracle-heavy criteria.
    Fast,
    Full,
}

impl std::str::FromStr for Level {
    type Err = crate::Error;
    fn from_str(s: &str) -> Result<Level> {
        match s {
            "fast" => Ok(Level::Fast),
            "full" => Ok(Level::Full),
            other => Err(crate::Error::Parse(format!("unknown level `{other}`"))),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Measurement {
    pub label: String,
    pub value: f64,
    /// Upper limit on `value`; `None` for reported-only numbers.
    pub limit: Option<f64>,
    pub passed: bool,
}

fn at_most(label: impl Into<String>, value: f64, limit: f64) -> Measurement {
    Measurement { label: label.into(), value, limit: Some(limit), passed: value <= limit }
}

fn holds(label: impl Into<String>, ok: bool) -> Measurement {
    Measurement { label: label.into(), value: if ok { 1.0 } else { 0.0 }, limit: None, passed: ok }
}

fn info(label: impl Into<String>, value: f64) -> Measurement {
    Measurement { label: label.into(), value, limit: None, passed: true }
}

#[derive(Clone, Debug, Serialize)]
pub struct CriterionOutcome {
    pub id: &'static str,
    pub title: &'static str,
    pub heavy: bool,
    pub passed: bool,
    pub measurements: Vec<Measurement>,
    pub error: Option<String>,
    pub seconds: f64,
}

impl CriterionOutcome {
    /// One line: id, verdict, title, the first failing (or worst) measurement.
    pub fn line(&self) -> String {
        let verdict = if self.passed { "PASS" } else { "FAIL" };
        let detail = if let Some(e) = &self.error {
            format!("error: {e}")
        } else {
            let pick = self.measurements.iter().find(|m| !m.passed).or_else(|| self.measurements.iter().find(|m| m.limit.is_some()));
            match pick {
                Some(m) => match m.limit {
                    Some(l) => format!("{} = {:.3e} (limit {:.3e})", m.label, m.value, l),
                    None => format!("{} = {}", m.label, m.value),
                },
                None => String::new(),
            }
        };
        format!("{} {} {} | {} [{:.1} s]", self.id, verdict, self.title, detail, self.seconds)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ValidationReport {
    pub level: Level,
    pub mpfr: String,
    pub outcomes: Vec<CriterionOutcome>,
}

impl ValidationReport {
    pub fn all_passed(&self) -> bool {
        self.outcomes.iter().all(|o| o.passed)
    }
}

pub struct Criterion {
    pub id: &'static str,
    pub title: &'static str,
    pub heavy: bool,
    pub check: fn() -> Result<Vec<Measurement>>,
}

pub const CRITERIA: [Criterion; 11] = [
    Criterion { id: "A1", title: "closed-form residues", heavy: false, check: a1 },
    Criterion { id: "A2", title: "residue vs contour quadrature", heavy: false, check: a2 },
    Criterion { id: "A3", title: "wide-strip formula", heavy: false, check: a3 },
    Criterion { id: "A4", title: "delta2 modulus as alpha -> 0", heavy: false, check: a4 },
    Criterion { id: "A5", title: "narrow-strip prefactors", heavy: false, check: a5 },
    Criterion { id: "A6", title: "oracle vs Melnikov, periodic", heavy: true, check: a6 },
    Criterion { id: "A7", title: "exponential rate regression", heavy: true, check: a7 },
    Criterion { id: "A8", title: "non-exponential splitting", heavy: true, check: a8 },
    Criterion { id: "A9", title: "quasiperiodic envelope", heavy: false, check: a9 },
    Criterion { id: "A10", title: "oracle vs Melnikov, quasiperiodic", heavy: true, check: a10 },
    Criterion { id: "A11", title: "structural invariants", heavy: false, check: a11 },
];

pub fn run_criterion(c: &Criterion) -> CriterionOutcome {
    let start = Instant::now();
    let (measurements, error) = match (c.check)() {
        Ok(m) => (m, None),
        Err(e) => (vec![], Some(e.to_string())),
    };
    let passed = error.is_none() && measurements.iter().all(|m| m.passed);
    CriterionOutcome { id: c.id, title: c.title, heavy: c.heavy, passed, measurements, error, seconds: start.elapsed().as_secs_f64() }
}

pub fn find_criterion(id: &str) -> Option<&'static Criterion> {
    CRITERIA.iter().find(|c| c.id.eq_ignore_ascii_case(id))
}

pub fn validate_suite(level: Level) -> ValidationReport {
    let outcomes = CRITERIA.iter().filter(|c| level == Level::Full || !c.heavy).map(run_criterion).collect();
    ValidationReport { level, mpfr: crate::mpnum::mpfr_version(), outcomes }
}

fn rel(a: &Complex, b: &Complex) -> f64 {
    ((a - b).abs() / b.abs()).to_f64()
}

fn periodic(eps: f64, alpha: f64, prec: u32) -> Result<ModelSpec> {
    ModelSpec::periodic(eps, alpha, prec)
}

fn quasiperiodic(eps: f64, alpha: f64, prec: u32) -> Result<ModelSpec> {
    let f = QpForcing::example(1.0, 1.0, None, prec)?;
    Ok(ModelSpec::periodic(eps, alpha, prec)?.with_forcing(ForcingSpec::Quasiperiodic(Box::new(f))))
}

/// Double-pole engine at `rho_minus` against the closed forms, with `delta2`
/// scaled by `1 + corruption`.
pub fn a1_with(corruption: f64) -> Result<Vec<Measurement>> {
    let p = 256;
    let mut out = Vec::new();
    for a in [0.1, 0.3, 0.5, 0.7, 0.9] {
        let alpha = Real::from_f64(a, p);
        let sing = solve_singularities(&alpha, Variant::Standard)?;
        let pole = sing.pole_data(&sing.rho_minus)?;
        let eight_pi = Real::pi(p) * 8.0;
        let d2_engine = pole.lead.scale(&-eight_pi.clone());
        let d1_engine = pole.sub.mul_i().scale(&eight_pi);
        let (d1, d2) = delta_constants(&alpha)?;
        let d2 = d2.scale(&Real::from_f64(1.0 + corruption, p));
        out.push(at_most(format!("alpha={a} delta1 rel"), rel(&d1_engine, &d1), 1e-18));
        out.push(at_most(format!("alpha={a} delta2 rel"), rel(&d2_engine, &d2), 1e-18));
    }
    Ok(out)
}

fn a1() -> Result<Vec<Measurement>> {
    a1_with(0.0)
}

fn a2() -> Result<Vec<Measurement>> {
    let mut out = Vec::new();
    for eps in [0.1, 0.2, 0.3] {
        for a in [0.2, 0.5, 0.8] {
            let spec = periodic(eps, a, 128)?;
            let r = melnikov_residue(&spec, PoleSet::Complete)?;
            let q = melnikov_quadrature(&Real::zero(128), &spec, None)?;
            out.push(at_most(format!("eps={eps} alpha={a}"), rel(&q.coefficient, &r.coefficient), 1e-8));
        }
    }
    Ok(out)
}

fn a3() -> Result<Vec<Measurement>> {
    let mut out = Vec::new();
    for eps in [0.05, 0.08, 0.12, 0.2] {
        let alpha = eps * eps * eps;
        let spec = periodic(eps, alpha, 128)?;
        let amp = melnikov_residue(&spec, PoleSet::Complete)?.amplitude.to_f64();
        let e = (-PI / (2.0 * eps)).exp();
        let dev = (amp / (4.0 * PI / (eps * eps) * e) - 1.0).abs();
        out.push(at_most(format!("eps={eps}"), dev, 3.0 * (alpha / (eps * eps) + e)));
        if eps == 0.05 {
            out.push(at_most("eps=0.05 absolute", dev, 0.1));
        }
    }
    Ok(out)
}

fn a4() -> Result<Vec<Measurement>> {
    let target = PI * SQRT_2;
    let mut out = Vec::new();
    for a in [1e-4, 1e-6] {
        let (_, d2) = delta_constants(&Real::from_f64(a, 256))?;
        let dev = (a.sqrt() * d2.abs().to_f64() - target).abs();
        out.push(at_most(format!("alpha={a:e}"), dev, 5.0 * a.sqrt()));
    }
    Ok(out)
}

fn a5() -> Result<Vec<Measurement>> {
    let mut out = Vec::new();
    let c: f64 = 1.0;
    for eps in [0.05, 0.1] {
        // r = 2: amplitude * sqrt2 * C^(3/2) eps^3 e^(sqrt C) / pi
        let spec = periodic(eps, 1.0 - c * eps * eps, 128)?;
        let amp = melnikov_residue(&spec, PoleSet::Complete)?.amplitude.to_f64();
        let ratio = amp * SQRT_2 * c.powf(1.5) * eps.powi(3) * c.sqrt().exp() / PI;
        out.push(at_most(format!("r=2 eps={eps} |ratio-1|"), (ratio - 1.0).abs(), 10.0 * eps));
        // r = 3: amplitude * sqrt2 * C^(3/2) eps^(9/2) / pi
        let spec = periodic(eps, 1.0 - c * eps.powi(3), 128)?;
        let amp = melnikov_residue(&spec, PoleSet::Complete)?.amplitude.to_f64();
        let ratio = amp * SQRT_2 * c.powf(1.5) * eps.powf(4.5) / PI;
        out.push(at_most(format!("r=3 eps={eps} |ratio-1|"), (ratio - 1.0).abs(), 10.0 * eps));
    }
    Ok(out)
}

fn oracle_vs_d0(spec: &ModelSpec, section: Section) -> Result<(SplittingProfile, f64)> {
    let prof = splitting_profile_periodic(spec, section, 16)?;
    let d0 = assemble_d0(spec, section, 16)?;
    Ok((prof, d0.amplitude.to_f64()))
}

fn a6() -> Result<Vec<Measurement>> {
    let mut out = Vec::new();
    let mut disc = Vec::new();
    for (mu, tol) in [(1e-3, 0.05), (1e-4, 0.01)] {
        let spec = periodic(0.25, 0.4, 128)?.with_perturbation(mu, 2.0);
        let (prof, pred) = oracle_vs_d0(&spec, Section::Pi)?;
        let d = (prof.fitted_amplitude.to_f64() / pred - 1.0).abs();
        out.push(holds(format!("mu={mu:e} resolved"), prof.resolved));
        out.push(at_most(format!("mu={mu:e} |ratio-1|"), d, tol));
        disc.push(d);
    }
    // Proportional shrinking would give 0.1.
    out.push(at_most("discrepancy(1e-4)/discrepancy(1e-3)", disc[1] / disc[0], 0.2));
    Ok(out)
}

fn melnikov_rate(variant: Variant, alpha: f64) -> Result<f64> {
    let pts: Vec<(f64, f64)> = geometric(0.08, 0.3, 10)
        .into_iter()
        .map(|eps| {
            let spec = periodic(eps, alpha, 128)?.with_variant(variant);
            Ok((eps, melnikov_residue(&spec, PoleSet::Complete)?.amplitude.to_f64()))
        })
        .collect::<Result<_>>()?;
    Ok(fit_rate_prefactor(&pts, FitModel::ExpPlusPower)?.rate.unwrap())
}

fn a7() -> Result<Vec<Measurement>> {
    let mut out = Vec::new();
    let target = solve_singularities(&Real::from_f64(0.4, 128), Variant::Standard)?.rate().to_f64();
    let a = melnikov_rate(Variant::Standard, 0.4)?;
    out.push(at_most("standard alpha=0.4 |a/Im rho - 1|", (a / target - 1.0).abs(), 0.02));
    for alpha in [0.1, 0.4] {
        let a = melnikov_rate(Variant::Alternative, alpha)?;
        out.push(at_most(format!("alternative alpha={alpha} |a/(pi/2) - 1|"), (a / FRAC_PI_2 - 1.0).abs(), 0.02));
    }
    let pts: Vec<(f64, f64)> = geometric(0.08, 0.3, 6)
        .into_iter()
        .map(|eps| {
            let spec = periodic(eps, 0.4, 128)?.with_perturbation(1e-4, 2.0);
            let prof = splitting_profile_periodic(&spec, Section::Pi, 16)?;
            Ok((eps, prof.reported_amplitude().to_f64()))
        })
        .collect::<Result<_>>()?;
    let a = fit_rate_prefactor(&pts, FitModel::ExpPlusPower)?.rate.unwrap();
    out.push(at_most("oracle |a/Im rho - 1|", (a / target - 1.0).abs(), 0.05));
    Ok(out)
}

fn a8() -> Result<Vec<Measurement>> {
    let (eps, c, eta, mu): (f64, f64, f64, f64) = (0.1, 1.0, 4.0, 1e-3);
    let spec = periodic(eps, 1.0 - c * eps * eps, 128)?.with_perturbation(mu, eta);
    let prof = splitting_profile_periodic(&spec, Section::ThreePiHalves, 16)?;
    let reference = 2.0 * PI * mu * eps.powf(eta - 3.0) * (-c.sqrt()).exp() / c.powf(1.5);
    let ratio = prof.fitted_amplitude.to_f64() / reference;
    Ok(vec![holds("resolved", prof.resolved), info("ratio", ratio), at_most("|ratio-1|", (ratio - 1.0).abs(), 0.15)])
}

fn a9() -> Result<Vec<Measurement>> {
    let alpha = 0.3;
    let mut out = Vec::new();
    let mut logs = Vec::new();
    for j in 0..7 {
        let eps = 0.3 * 0.5f64.powi(j);
        let spec = quasiperiodic(eps, alpha, 128)?;
        let sing = solve_singularities(&spec.alpha, spec.variant)?;
        let lead = leading_harmonic(&spec, &sing)?;
        out.push(holds(format!("eps={eps} leading {:?} is a convergent", lead.k), is_convergent(lead.k)));
        let sup = QpSeries::new(&spec, None)?.sup(64)?;
        let e = envelope_reference_in(&spec, &Regime::Intermediate { nu: alpha.ln() / eps.ln() })?;
        logs.push((sup.value.ln() - &e.ln()).to_f64());
    }
    let lo = logs.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    out.push(at_most("band width of normalized log", hi - lo, 4f64.ln()));
    Ok(out)
}

/// `max |d - d0| / sup |d0|` over the profile grid.
fn pointwise_discrepancy(prof: &SplittingProfile, series: &QpSeries, factor: f64) -> f64 {
    let z = Real::zero(128);
    let mut worst: f64 = 0.0;
    let mut sup: f64 = 0.0;
    for s in &prof.samples {
        if let Phase::Torus(a, b) = &s.phase {
            let d0 = series.eval(&z, a, b).to_f64() * factor;
            worst = worst.max((s.d.to_f64() - d0).abs());
            sup = sup.max(d0.abs());
        }
    }
    worst / sup
}

fn normalize(k: (i64, i64)) -> (i64, i64) {
    if k.1 < 0 || (k.1 == 0 && k.0 < 0) {
        (-k.0, -k.1)
    } else {
        k
    }
}

fn a10() -> Result<Vec<Measurement>> {
    let mut out = Vec::new();
    let base = quasiperiodic(0.3, 0.3, 128)?;
    let series = QpSeries::new(&base, None)?;
    let sup_m = series.sup(64)?.value.to_f64();
    let sing = solve_singularities(&base.alpha, base.variant)?;
    let lead = normalize(leading_harmonic(&base, &sing)?.k);
    let mut disc = Vec::new();
    for (mu, n) in [(1e-3, 16), (1e-4, 8)] {
        let spec = base.clone().with_perturbation(mu, 2.0);
        let m = spec.strength().to_f64();
        let prof = splitting_profile_qp(&spec, Section::Pi, n)?;
        let ratio = prof.sup_abs.to_f64() / (m * sup_m / 2.0);
        if n == 16 {
            out.push(at_most("mu=1e-3 16x16 |sup ratio - 1|", (ratio - 1.0).abs(), 0.10));
            let dom = prof.dominant_harmonic.map(normalize);
            out.push(holds(format!("grid harmonic {dom:?} = leading {lead:?}"), dom == Some(lead)));
        } else {
            out.push(info(format!("mu={mu:e} {n}x{n} sup ratio"), ratio));
        }
        disc.push(pointwise_discrepancy(&prof, &series, m / 2.0));
        out.push(info(format!("mu={mu:e} pointwise discrepancy"), disc[disc.len() - 1]));
    }
    out.push(at_most("pointwise discrepancy(1e-4)/discrepancy(1e-3)", disc[1] / disc[0], 0.2));
    Ok(out)
}

fn a11() -> Result<Vec<Measurement>> {
    let p = 128;
    let mut out = Vec::new();
    let t0 = [-3.0, -1.0, 0.0, 0.5, 2.0].iter().all(|&u| check_t0_identity(&Real::from_f64(u, p)));
    out.push(holds("dT0/du = 4/cosh^2 u", t0));

    let spec = periodic(0.2, 0.4, p)?;
    let (u, tau) = (Real::from_f64(0.3, p), Real::from_f64(0.7, p));
    let ms = half_melnikov(&u, &tau, &spec, Side::Stable)?;
    let mu_half = half_melnikov(&u, &tau, &spec, Side::Unstable)?;
    let m = melnikov_residue(&spec, PoleSet::Complete)?;
    let full = m.value(&u, &tau, &spec.epsilon);
    out.push(at_most("M^s - M^u vs M", ((&ms - &mu_half - &full) / &m.amplitude).abs().to_f64(), 1e-20));

    let s = Real::from_f64(0.45, p);
    let shifted_u = &u + &s;
    let shifted_tau = &tau + &(&s / &spec.epsilon);
    let a = half_melnikov(&shifted_u, &shifted_tau, &spec, Side::Stable)? - &half_melnikov(&shifted_u, &shifted_tau, &spec, Side::Unstable)?;
    out.push(at_most("periodic translation covariance", ((&a - &(&ms - &mu_half)) / &m.amplitude).abs().to_f64(), 1e-20));

    let qp = quasiperiodic(0.3, 0.3, p)?;
    let series = QpSeries::new(&qp, None)?;
    let g = golden_mean(p);
    let (t1, t2) = (Real::from_f64(0.4, p), Real::from_f64(1.9, p));
    let v0 = series.eval(&Real::zero(p), &t1, &t2);
    let v1 = series.eval(&s, &(&t1 + &(&s / &qp.epsilon)), &(&t2 + &(&(&g * &s) / &qp.epsilon)));
    out.push(at_most("quasiperiodic translation covariance", ((&v1 - &v0) / &v0).abs().to_f64(), 1e-25));

    let env = EnvelopeData::new(1.0, 1.0, p)?;
    let gf = (1.0 + 5f64.sqrt()) / 2.0;
    let c0 = 2.0 * ((gf + 1.0) / (gf + 1.0 / gf)).sqrt();
    out.push(at_most("C0 vs closed form", (env.c0.to_f64() - c0).abs(), 1e-14));
    let per = [-3.1, -0.7, 0.2, 2.5]
        .iter()
        .map(|&d| {
            let d = Real::from_f64(d, p);
            (c_of_delta(&(&d + &env.period), &env) - &c_of_delta(&d, &env)).abs().to_f64()
        })
        .fold(0.0, f64::max);
    out.push(at_most("c(delta + 2 ln gamma) - c(delta)", per, 1e-30));
    let edge = &env.delta0 + &(&env.period / 2.0);
    let tiny = Real::from_f64(1e-30, p);
    let jump = (c_of_delta(&(&edge + &tiny), &env) - &c_of_delta(&(&edge - &tiny), &env)).abs().to_f64();
    out.push(at_most("c continuity at the fold", jump, 1e-25));
    // grid offset so that delta0 is not a node
    let values: Vec<Real> = (0..2000)
        .map(|i| c_of_delta(&(&env.delta0 + &(&env.period * ((i as f64 + 0.37) / 2000.0 - 0.5))), &env))
        .collect();
    let below = values.iter().any(|v| v < &env.c0);
    out.push(holds("c(delta) >= C0 on the grid", !below));
    let grid_min = values.iter().fold(Real::from_f64(f64::INFINITY, p), |a, b| a.min(b));
    out.push(at_most("min c - C0", (grid_min - &env.c0).to_f64(), 1e-6));

    let free = periodic(0.25, 0.4, p)?;
    let prof = splitting_profile_periodic(&free, Section::Pi, 16)?;
    let worst = prof.samples.iter().map(|s| s.d.abs().to_f64()).fold(0.0, f64::max);
    out.push(at_most("mu=0 max |d|", worst, 1e-30));

    let forced = periodic(0.25, 0.4, 256)?.with_perturbation(1e-3, 2.0);
    let mut det_err: f64 = 0.0;
    for t in [0.0, 1.3, 2.6, 3.9, 5.2] {
        let fl = monodromy_floquet_at(&forced, &Real::from_f64(t, 256), 256)?;
        det_err = det_err.max((&fl.determinant - 1.0).abs().to_f64());
    }
    out.push(at_most("monodromy |det - 1|", det_err, 1e-20));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn corrupted_delta2_fails_a1() {
        assert!(a1_with(0.0).unwrap().iter().all(|m| m.passed));
        assert!(a1_with(0.01).unwrap().iter().any(|m| !m.passed));
    }

    #[test]
    fn outcome_line() {
        let o = run_criterion(&CRITERIA[3]);
        assert!(o.line().starts_with("A4 PASS"), "{}", o.line());
    }
}
