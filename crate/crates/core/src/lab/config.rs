use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::melnikov::Regime;
use crate::model::{Variant, DEFAULT_GUARD_CEILING};
use crate::oracle::Section;

/// `alpha` as a function of `eps`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "law", rename_all = "lowercase")]
pub enum AlphaLaw {
    Fixed { value: f64 },
    /// `alpha = c eps^r`.
    Power { c: f64, r: f64 },
    /// `alpha = 1 - c eps^r`.
    Narrow { c: f64, r: f64 },
}

impl AlphaLaw {
    pub fn alpha(&self, eps: f64) -> f64 {
        match *self {
            AlphaLaw::Fixed { value } => value,
            AlphaLaw::Power { c, r } => c * eps.powf(r),
            AlphaLaw::Narrow { c, r } => 1.0 - c * eps.powf(r),
        }
    }

    /// Regime implied by the law itself, when it fixes one.
    pub fn regime_hint(&self) -> Option<Regime> {
        match *self {
            AlphaLaw::Narrow { c, r } => Some(Regime::narrow(c, r)),
            _ => None,
        }
    }

    /// Parses `0.4`, `eps^3`, `2*eps^3`, `1 - 1.0*eps^2` (with an optional
    /// `alpha =` prefix).
    pub fn parse(text: &str) -> Result<AlphaLaw> {
        let bad = || Error::Parse(format!("cannot read scaling law `{text}`"));
        let mut s: String = text.chars().filter(|c| !c.is_whitespace()).collect();
        if let Some(rest) = s.strip_prefix("alpha=") {
            s = rest.to_string();
        }
        if let Ok(value) = s.parse::<f64>() {
            return Ok(AlphaLaw::Fixed { value });
        }
        let (narrow, body) = match s.strip_prefix("1-") {
            Some(rest) => (true, rest),
            None => (false, s.as_str()),
        };
        let (coef, power) = body.split_once("eps").ok_or_else(bad)?;
        let c = match coef.trim_end_matches('*') {
            "" => 1.0,
            t => t.parse::<f64>().map_err(|_| bad())?,
        };
        let r = match power {
            "" => 1.0,
            t => t.strip_prefix('^').ok_or_else(bad)?.parse::<f64>().map_err(|_| bad())?,
        };
        Ok(if narrow { AlphaLaw::Narrow { c, r } } else { AlphaLaw::Power { c, r } })
    }
}

impl std::fmt::Display for AlphaLaw {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            AlphaLaw::Fixed { value } => write!(f, "{value}"),
            AlphaLaw::Power { c, r } => write!(f, "{c}*eps^{r}"),
            AlphaLaw::Narrow { c, r } => write!(f, "1 - {c}*eps^{r}"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ForcingChoice {
    Sin,
    Qp { r1: f64, r2: f64, kmax: Option<usize> },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MethodTag {
    Residue,
    Quadrature,
    Asymptotic,
    Oracle,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct OutputPaths {
    pub csv: Option<PathBuf>,
    pub json: Option<PathBuf>,
    /// Directory for two-column gnuplot files.
    pub gnuplot: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepConfig {
    pub name: String,
    pub variant: Variant,
    pub forcing: ForcingChoice,
    pub alpha: AlphaLaw,
    pub eps: Vec<f64>,
    pub mu: Vec<f64>,
    pub eta: f64,
    /// Base working precision in bits; modules raise it where cancellation requires.
    pub precision_bits: u32,
    pub methods: Vec<MethodTag>,
    /// Oracle section; chosen from the regime when absent.
    pub section: Option<Section>,
    pub n_phases: usize,
    pub grid_n: usize,
    pub guard_ceiling: f64,
    pub output: OutputPaths,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum EpsSpec {
    List(Vec<f64>),
    Range { min: f64, max: f64, count: usize },
    Ratio { start: f64, ratio: f64, count: usize },
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    name: Option<String>,
    variant: Option<String>,
    forcing: Option<String>,
    r1: Option<f64>,
    r2: Option<f64>,
    kmax: Option<usize>,
    alpha: String,
    eps: EpsSpec,
    mu: Option<Vec<f64>>,
    eta: Option<f64>,
    precision_bits: Option<u32>,
    methods: Option<Vec<MethodTag>>,
    section: Option<String>,
    n_phases: Option<usize>,
    grid_n: Option<usize>,
    guard_ceiling: Option<f64>,
    output: Option<OutputPaths>,
}

/// `count` points from `min` to `max` in geometric progression.
pub fn geometric(min: f64, max: f64, count: usize) -> Vec<f64> {
    match count {
        0 => vec![],
        1 => vec![min],
        _ => (0..count).map(|i| min * (max / min).powf(i as f64 / (count - 1) as f64)).collect(),
    }
}

impl SweepConfig {
    /// Defaults: Standard variant, sine forcing, residue method, 128 bits.
    pub fn new(name: &str, alpha: AlphaLaw, eps: Vec<f64>) -> SweepConfig {
        SweepConfig {
            name: name.into(),
            variant: Variant::Standard,
            forcing: ForcingChoice::Sin,
            alpha,
            eps,
            mu: vec![],
            eta: 0.0,
            precision_bits: 128,
            methods: vec![MethodTag::Residue],
            section: None,
            n_phases: 16,
            grid_n: 16,
            guard_ceiling: DEFAULT_GUARD_CEILING,
            output: OutputPaths::default(),
        }
    }

    pub fn from_toml(text: &str) -> Result<SweepConfig> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        let eps = match raw.eps {
            EpsSpec::List(v) => v,
            EpsSpec::Range { min, max, count } => geometric(min, max, count),
            EpsSpec::Ratio { start, ratio, count } => (0..count).map(|j| start * ratio.powi(j as i32)).collect(),
        };
        let forcing = match raw.forcing.as_deref().unwrap_or("sin") {
            "sin" => ForcingChoice::Sin,
            "qp" => ForcingChoice::Qp { r1: raw.r1.unwrap_or(1.0), r2: raw.r2.unwrap_or(1.0), kmax: raw.kmax },
            other => return Err(Error::Parse(format!("unknown forcing `{other}`"))),
        };
        let cfg = SweepConfig {
            name: raw.name.unwrap_or_else(|| "sweep".into()),
            variant: raw.variant.as_deref().unwrap_or("standard").parse()?,
            forcing,
            alpha: AlphaLaw::parse(&raw.alpha)?,
            eps,
            mu: raw.mu.unwrap_or_default(),
            eta: raw.eta.unwrap_or(0.0),
            precision_bits: raw.precision_bits.unwrap_or(128),
            methods: raw.methods.unwrap_or_else(|| vec![MethodTag::Residue]),
            section: raw.section.map(|s| s.parse()).transpose()?,
            n_phases: raw.n_phases.unwrap_or(16),
            grid_n: raw.grid_n.unwrap_or(16),
            guard_ceiling: raw.guard_ceiling.unwrap_or(DEFAULT_GUARD_CEILING),
            output: raw.output.unwrap_or_default(),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn wants(&self, m: MethodTag) -> bool {
        self.methods.contains(&m)
    }

    /// Parameter ranges, and the perturbation guard at every `(eps, alpha)`
    /// pair when the oracle runs.
    pub fn validate(&self) -> Result<()> {
        for &e in &self.eps {
            if !(e > 0.0) {
                return Err(Error::InvalidParameter(format!("eps = {e} must be positive")));
            }
            let a = self.alpha.alpha(e);
            if !(0.0..1.0).contains(&a) {
                return Err(Error::InvalidParameter(format!("alpha({e}) = {a} outside [0, 1)")));
            }
            if self.wants(MethodTag::Oracle) {
                let size = e.powf(self.eta) / (1.0 - a).powf(1.5);
                if size > self.guard_ceiling {
                    return Err(Error::GuardViolated { size, ceiling: self.guard_ceiling });
                }
            }
        }
        if self.wants(MethodTag::Oracle) && self.mu.is_empty() {
            return Err(Error::InvalidParameter("oracle runs need a mu list".into()));
        }
        Ok(())
    }
}

pub const PRESETS: [&str; 5] = ["prop21-wide", "prop21-intermediate", "coro23-r2", "th-main-validation", "qp-envelope"];

pub fn preset(name: &str) -> Result<SweepConfig> {
    use MethodTag::*;
    let mut cfg = match name {
        "prop21-wide" => {
            let mut c = SweepConfig::new(name, AlphaLaw::Power { c: 1.0, r: 3.0 }, vec![0.05, 0.08, 0.12, 0.2]);
            c.methods = vec![Residue, Asymptotic];
            c
        }
        "prop21-intermediate" => {
            let mut c = SweepConfig::new(name, AlphaLaw::Fixed { value: 0.4 }, geometric(0.08, 0.3, 10));
            c.methods = vec![Residue, Quadrature, Asymptotic];
            c
        }
        "coro23-r2" => {
            let mut c = SweepConfig::new(name, AlphaLaw::Narrow { c: 1.0, r: 2.0 }, geometric(0.05, 0.2, 6));
            c.methods = vec![Residue, Asymptotic];
            c
        }
        "th-main-validation" => {
            let mut c = SweepConfig::new(name, AlphaLaw::Fixed { value: 0.4 }, vec![0.25]);
            c.mu = vec![1e-3, 1e-4];
            c.eta = 2.0;
            c.methods = vec![Residue, Oracle];
            c.section = Some(Section::Pi);
            c
        }
        "qp-envelope" => {
            let eps = (0..7).map(|j| 0.3 * 0.5f64.powi(j)).collect();
            let mut c = SweepConfig::new(name, AlphaLaw::Fixed { value: 0.3 }, eps);
            c.forcing = ForcingChoice::Qp { r1: 1.0, r2: 1.0, kmax: None };
            c
        }
        other => return Err(Error::InvalidParameter(format!("unknown preset `{other}`; known: {}", PRESETS.join(", ")))),
    };
    cfg.name = name.into();
    cfg.validate()?;
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scaling_laws() {
        assert_eq!(AlphaLaw::parse("alpha = 1 - 1.0*eps^2").unwrap(), AlphaLaw::Narrow { c: 1.0, r: 2.0 });
        assert_eq!(AlphaLaw::parse("1 - eps^3").unwrap(), AlphaLaw::Narrow { c: 1.0, r: 3.0 });
        assert_eq!(AlphaLaw::parse("eps^3").unwrap(), AlphaLaw::Power { c: 1.0, r: 3.0 });
        assert_eq!(AlphaLaw::parse("0.5 * eps").unwrap(), AlphaLaw::Power { c: 0.5, r: 1.0 });
        assert_eq!(AlphaLaw::parse("0.4").unwrap(), AlphaLaw::Fixed { value: 0.4 });
        assert!(AlphaLaw::parse("1 - x^2").is_err());
        let law = AlphaLaw::parse(&AlphaLaw::Narrow { c: 2.0, r: 1.5 }.to_string()).unwrap();
        assert_eq!(law, AlphaLaw::Narrow { c: 2.0, r: 1.5 });
    }

    #[test]
    fn toml_config() {
        let cfg = SweepConfig::from_toml(
            r#"
            name = "demo"
            alpha = "1 - 1.0*eps^2"
            eps = { min = 0.05, max = 0.2, count = 3 }
            methods = ["residue", "asymptotic"]
            [output]
            csv = "out.csv"
            "#,
        )
        .unwrap();
        assert_eq!(cfg.eps.len(), 3);
        assert!((cfg.eps[1] - 0.1).abs() < 1e-12);
        assert_eq!(cfg.output.csv.as_deref(), Some(std::path::Path::new("out.csv")));
        let bad = SweepConfig::from_toml("alpha = \"0.9\"\neps = [0.3]\nmu = [1e-3]\nmethods = [\"oracle\"]");
        assert!(matches!(bad, Err(Error::GuardViolated { .. })));
    }

    #[test]
    fn presets_validate() {
        for name in PRESETS {
            preset(name).unwrap();
        }
    }
}
