use rayon::prelude::*;
use serde::Serialize;

use super::config::{ForcingChoice, MethodTag, SweepConfig};
use super::d0::assemble_d0;
use crate::error::{Error, Result};
use crate::melnikov::qp::{envelope_reference, leading_harmonic, QpSeries};
use crate::melnikov::{classify_regime, melnikov_asymptotic, melnikov_quadrature, melnikov_residue, ForcingCase, PoleSet, Regime};
use crate::model::{ForcingSpec, ModelSpec, QpForcing};
use crate::mpnum::Real;
use crate::oracle::{splitting_profile_periodic, splitting_profile_qp, Section};
use crate::singular::solve_singularities;

/// Decimal digits written for values.
const DIGITS: usize = 30;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepRecord {
    pub index: usize,
    pub eps: f64,
    pub alpha: f64,
    pub mu: Option<f64>,
    pub eta: f64,
    pub regime: String,
    pub quantity: String,
    pub method: String,
    pub value: String,
    pub error: String,
    pub prec: u32,
    pub status: String,
}

impl SweepRecord {
    pub fn value_f64(&self) -> f64 {
        self.value.parse().unwrap_or(f64::NAN)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepTable {
    pub name: String,
    pub records: Vec<SweepRecord>,
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

impl SweepTable {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("index,eps,alpha,mu,eta,regime,quantity,method,value,error,prec,status\n");
        for r in &self.records {
            let mu = r.mu.map(|m| format!("{m:e}")).unwrap_or_default();
            out.push_str(&format!(
                "{},{:e},{:e},{},{},{},{},{},{},{},{},{}\n",
                r.index,
                r.eps,
                r.alpha,
                mu,
                r.eta,
                r.regime,
                r.quantity,
                r.method,
                r.value,
                r.error,
                r.prec,
                csv_field(&r.status)
            ));
        }
        out
    }

    /// Reads the output of [`SweepTable::to_csv`].
    pub fn from_csv(name: &str, text: &str) -> Result<SweepTable> {
        let mut lines = text.lines();
        match lines.next() {
            Some(h) if h.starts_with("index,eps,") => {}
            _ => return Err(Error::Parse("missing sweep CSV header".into())),
        }
        let bad = |n: usize, what: &str| Error::Parse(format!("line {}: bad {what}", n + 2));
        let mut records = Vec::new();
        for (n, line) in lines.enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let f: Vec<&str> = line.splitn(12, ',').collect();
            if f.len() != 12 {
                return Err(bad(n, "field count"));
            }
            let status = f[11].strip_prefix('"').and_then(|s| s.strip_suffix('"')).map(|s| s.replace("\"\"", "\"")).unwrap_or_else(|| f[11].to_string());
            records.push(SweepRecord {
                index: f[0].parse().map_err(|_| bad(n, "index"))?,
                eps: f[1].parse().map_err(|_| bad(n, "eps"))?,
                alpha: f[2].parse().map_err(|_| bad(n, "alpha"))?,
                mu: if f[3].is_empty() { None } else { Some(f[3].parse().map_err(|_| bad(n, "mu"))?) },
                eta: f[4].parse().map_err(|_| bad(n, "eta"))?,
                regime: f[5].into(),
                quantity: f[6].into(),
                method: f[7].into(),
                value: f[8].into(),
                error: f[9].into(),
                prec: f[10].parse().map_err(|_| bad(n, "prec"))?,
                status,
            });
        }
        Ok(SweepTable { name: name.into(), records })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// `(eps, value)` for successful records of one quantity and method.
    pub fn points(&self, quantity: &str, method: &str, mu: Option<f64>) -> Vec<(f64, f64)> {
        self.records
            .iter()
            .filter(|r| r.quantity == quantity && r.method == method && r.status == "ok" && (mu.is_none() || r.mu == mu))
            .map(|r| (r.eps, r.value_f64()))
            .collect()
    }

    /// Two columns `1/eps  ln(value)`.
    pub fn gnuplot(&self, quantity: &str, method: &str, mu: Option<f64>) -> String {
        let mut out = format!("# 1/eps  ln({quantity}) [{method}]\n");
        for (e, v) in self.points(quantity, method, mu) {
            out.push_str(&format!("{:.17e} {:.17e}\n", 1.0 / e, v.abs().ln()));
        }
        out
    }
}

struct Point<'a> {
    index: usize,
    eps: f64,
    alpha: f64,
    regime: String,
    cfg: &'a SweepConfig,
    out: Vec<SweepRecord>,
}

impl Point<'_> {
    fn push(&mut self, mu: Option<f64>, quantity: &str, method: &str, value: &Real, error: f64, status: &str) {
        self.out.push(SweepRecord {
            index: self.index,
            eps: self.eps,
            alpha: self.alpha,
            mu,
            eta: self.cfg.eta,
            regime: self.regime.clone(),
            quantity: quantity.into(),
            method: method.into(),
            value: value.to_decimal_digits(DIGITS),
            error: format!("{error:.3e}"),
            prec: value.prec(),
            status: status.into(),
        });
    }

    fn fail(&mut self, mu: Option<f64>, quantity: &str, method: &str, err: &Error) {
        self.out.push(SweepRecord {
            index: self.index,
            eps: self.eps,
            alpha: self.alpha,
            mu,
            eta: self.cfg.eta,
            regime: self.regime.clone(),
            quantity: quantity.into(),
            method: method.into(),
            value: "nan".into(),
            error: "nan".into(),
            prec: self.cfg.precision_bits,
            status: format!("failed: {err}"),
        });
    }
}

fn point_spec(cfg: &SweepConfig, eps: f64, alpha: f64) -> Result<ModelSpec> {
    let p = cfg.precision_bits;
    let forcing = match cfg.forcing {
        ForcingChoice::Sin => ForcingSpec::PeriodicSin,
        ForcingChoice::Qp { r1, r2, kmax } => ForcingSpec::Quasiperiodic(Box::new(QpForcing::example(r1, r2, kmax, p)?)),
    };
    ModelSpec::new(Real::from_f64(eps, p), Real::from_f64(alpha, p), cfg.variant, forcing, p)
}

fn point_regime(cfg: &SweepConfig, eps: f64, alpha: f64) -> Regime {
    let case = match cfg.forcing {
        ForcingChoice::Sin => ForcingCase::Periodic,
        ForcingChoice::Qp { .. } => ForcingCase::Quasiperiodic,
    };
    cfg.alpha.regime_hint().unwrap_or_else(|| classify_regime(eps, alpha, case).regime)
}

fn run_periodic(pt: &mut Point, spec: &ModelSpec, regime: &Regime) {
    let cfg = pt.cfg;
    if cfg.wants(MethodTag::Residue) {
        match melnikov_residue(spec, PoleSet::Complete) {
            Ok(m) => {
                let rel = (&m.error_estimate / &m.amplitude).to_f64();
                pt.push(None, "melnikov_amplitude", "residue", &m.amplitude, m.error_estimate.to_f64(), "ok");
                pt.push(None, "melnikov_phase", "residue", &m.phase, rel, "ok");
            }
            Err(e) => pt.fail(None, "melnikov_amplitude", "residue", &e),
        }
    }
    if cfg.wants(MethodTag::Quadrature) {
        match melnikov_quadrature(&Real::zero(spec.prec), spec, None) {
            Ok(m) => pt.push(None, "melnikov_amplitude", "quadrature", &m.amplitude, m.error_estimate.to_f64(), "ok"),
            Err(e) => pt.fail(None, "melnikov_amplitude", "quadrature", &e),
        }
    }
    if cfg.wants(MethodTag::Asymptotic) {
        match melnikov_asymptotic(spec, regime) {
            Ok(m) => pt.push(None, "melnikov_amplitude", "asymptotic", &m.amplitude, m.error_estimate.to_f64(), "ok"),
            Err(e) => pt.fail(None, "melnikov_amplitude", "asymptotic", &e),
        }
    }
    let section = cfg.section.unwrap_or_else(|| Section::for_model(spec));
    for &mu in &cfg.mu {
        let s = spec.clone().with_perturbation(mu, cfg.eta);
        match assemble_d0(&s, section, 16) {
            Ok(d) => pt.push(Some(mu), "d0_amplitude", "residue", &d.amplitude, 0.0, "ok"),
            Err(e) => pt.fail(Some(mu), "d0_amplitude", "residue", &e),
        }
        if cfg.wants(MethodTag::Oracle) {
            match splitting_profile_periodic(&s, section, cfg.n_phases) {
                Ok(p) => {
                    let status = if p.resolved { "ok" } else { "unresolved" };
                    pt.push(Some(mu), "distance_amplitude", "oracle", p.reported_amplitude(), p.noise_floor.to_f64(), status);
                    pt.push(Some(mu), "distance_phase", "oracle", &p.fitted_phase, (&p.noise_floor / &p.fitted_amplitude).to_f64(), status);
                }
                Err(e) => pt.fail(Some(mu), "distance_amplitude", "oracle", &e),
            }
        }
    }
}

fn run_qp(pt: &mut Point, spec: &ModelSpec) {
    let cfg = pt.cfg;
    let p = spec.prec;
    match QpSeries::new(spec, None).and_then(|s| Ok((s.sup(64)?, s))) {
        Ok((sup, series)) => {
            pt.push(None, "melnikov_sup", "qp-series", &sup.value, series.tail_bound(), "ok");
            if let Some((k1, k2)) = series.dominant_harmonic() {
                pt.push(None, "dominant_k1", "qp-series", &Real::from_i64(k1, p), 0.0, "ok");
                pt.push(None, "dominant_k2", "qp-series", &Real::from_i64(k2, p), 0.0, "ok");
            }
            match envelope_reference(spec) {
                Ok((_, e)) => {
                    pt.push(None, "envelope_reference", "closed-form", &e, 0.0, "ok");
                    pt.push(None, "normalized_log", "qp-series", &(sup.value.ln() - &e.ln()), series.tail_bound() / sup.value.to_f64(), "ok");
                }
                Err(e) => pt.fail(None, "envelope_reference", "closed-form", &e),
            }
        }
        Err(e) => pt.fail(None, "melnikov_sup", "qp-series", &e),
    }
    if !spec.alpha.is_zero() {
        match solve_singularities(&spec.alpha, spec.variant).and_then(|s| leading_harmonic(spec, &s)) {
            Ok(h) => {
                pt.push(None, "leading_k1", "residue", &Real::from_i64(h.k.0, p), 0.0, "ok");
                pt.push(None, "leading_k2", "residue", &Real::from_i64(h.k.1, p), 0.0, "ok");
            }
            Err(e) => pt.fail(None, "leading_k1", "residue", &e),
        }
    }
    let section = cfg.section.unwrap_or_else(|| Section::for_model(spec));
    for &mu in &cfg.mu {
        let s = spec.clone().with_perturbation(mu, cfg.eta);
        match assemble_d0(&s, section, cfg.grid_n) {
            Ok(d) => pt.push(Some(mu), "d0_sup", "qp-series", &d.amplitude, 0.0, "ok"),
            Err(e) => pt.fail(Some(mu), "d0_sup", "qp-series", &e),
        }
        if cfg.wants(MethodTag::Oracle) {
            match splitting_profile_qp(&s, section, cfg.grid_n) {
                Ok(prof) => {
                    let status = if prof.resolved { "ok" } else { "unresolved" };
                    let value = if prof.resolved { &prof.sup_abs } else { &prof.noise_floor };
                    pt.push(Some(mu), "distance_sup", "oracle", value, prof.noise_floor.to_f64(), status);
                }
                Err(e) => pt.fail(Some(mu), "distance_sup", "oracle", &e),
            }
        }
    }
}

fn run_point(cfg: &SweepConfig, index: usize, eps: f64) -> Vec<SweepRecord> {
    let alpha = cfg.alpha.alpha(eps);
    let regime = point_regime(cfg, eps, alpha);
    let mut pt = Point { index, eps, alpha, regime: regime.name().into(), cfg, out: Vec::new() };
    match point_spec(cfg, eps, alpha) {
        Ok(spec) => match cfg.forcing {
            ForcingChoice::Sin => run_periodic(&mut pt, &spec, &regime),
            ForcingChoice::Qp { .. } => run_qp(&mut pt, &spec),
        },
        Err(e) => pt.fail(None, "point", "-", &e),
    }
    pt.out
}

/// Worker count from `SPLITLAB_WORKERS`, if set.
pub fn configured_workers() -> Option<usize> {
    std::env::var("SPLITLAB_WORKERS").ok().and_then(|v| v.trim().parse().ok()).filter(|&n| n > 0)
}

/// Runs every grid point; rows are ordered by grid index regardless of scheduling.
pub fn run_sweep(cfg: &SweepConfig) -> Result<SweepTable> {
    cfg.validate()?;
    let work = || -> Vec<SweepRecord> {
        let per_point: Vec<Vec<SweepRecord>> = cfg.eps.par_iter().enumerate().map(|(i, &e)| run_point(cfg, i, e)).collect();
        per_point.into_iter().flatten().collect()
    };
    let records = match configured_workers() {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::InvalidParameter(format!("worker pool: {e}")))?
            .install(work),
        None => work(),
    };
    Ok(SweepTable { name: cfg.name.clone(), records })
}

/// Writes the configured CSV, JSON and gnuplot outputs.
pub fn write_outputs(cfg: &SweepConfig, table: &SweepTable) -> Result<()> {
    if let Some(path) = &cfg.output.csv {
        std::fs::write(path, table.to_csv())?;
    }
    if let Some(path) = &cfg.output.json {
        std::fs::write(path, table.to_json()?)?;
    }
    if let Some(dir) = &cfg.output.gnuplot {
        std::fs::create_dir_all(dir)?;
        let mut keys: Vec<(String, String)> = table.records.iter().map(|r| (r.quantity.clone(), r.method.clone())).collect();
        keys.dedup();
        keys.sort();
        keys.dedup();
        for (q, m) in keys {
            std::fs::write(dir.join(format!("{}_{q}_{m}.dat", cfg.name)), table.gnuplot(&q, &m, None))?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lab::config::AlphaLaw;

    #[test]
    fn empty_sweep() {
        let cfg = SweepConfig::new("empty", AlphaLaw::Fixed { value: 0.4 }, vec![]);
        assert!(run_sweep(&cfg).unwrap().records.is_empty());
    }

    #[test]
    fn single_point_matches_direct_call() {
        let cfg = SweepConfig::new("one", AlphaLaw::Fixed { value: 0.4 }, vec![0.15]);
        let t = run_sweep(&cfg).unwrap();
        let direct = melnikov_residue(&ModelSpec::periodic(0.15, 0.4, 128).unwrap(), PoleSet::Complete).unwrap();
        let rec = t.records.iter().find(|r| r.quantity == "melnikov_amplitude").unwrap();
        assert_eq!(rec.value, direct.amplitude.to_decimal_digits(DIGITS));
        assert_eq!(rec.method, "residue");
    }

    #[test]
    fn deterministic_and_failures_recorded() {
        let mut cfg = SweepConfig::new("det", AlphaLaw::Fixed { value: 0.4 }, vec![0.3, 0.1, 0.2]);
        cfg.methods = vec![MethodTag::Residue, MethodTag::Asymptotic];
        let a = run_sweep(&cfg).unwrap().to_csv();
        let b = run_sweep(&cfg).unwrap().to_csv();
        assert_eq!(a, b);
        let t = run_sweep(&cfg).unwrap();
        assert_eq!(SweepTable::from_csv("det", &a).unwrap(), t);
        let idx: Vec<usize> = t.records.iter().map(|r| r.index).collect();
        assert!(idx.windows(2).all(|w| w[0] <= w[1]));
        // the asymptotic formulas cover only the standard coupling
        let cfg2 = {
            let mut c = SweepConfig::new("mixed", AlphaLaw::Fixed { value: 0.0 }, vec![0.2]);
            c.variant = crate::model::Variant::Alternative;
            c.methods = vec![MethodTag::Asymptotic];
            c
        };
        let t2 = run_sweep(&cfg2).unwrap();
        assert!(t2.records[0].status.starts_with("failed"));
    }
}
