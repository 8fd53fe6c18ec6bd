use serde::Serialize;

/// Half-width of the band around each threshold in which the regime is
/// flagged as a boundary case.
pub const TRANSITION_BAND: f64 = 0.15;
/// `ln(1 - alpha)/ln eps` at or above which `alpha = 1 - C eps^r` is treated
/// as a narrow strip.
pub const NARROW_ONSET: f64 = 0.5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ForcingCase {
    Periodic,
    Quasiperiodic,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "tag")]
pub enum Regime {
    /// `alpha <= C eps^nu`, `nu` above the threshold.
    WideStrip { nu: f64 },
    /// `alpha = alpha_star eps^threshold`.
    Transition { alpha_star: f64 },
    Intermediate { nu: f64 },
    /// `alpha = 1 - C eps^r`, `0 < r < 2`.
    NarrowExp { c: f64, r: f64 },
    /// `alpha = 1 - C eps^r`, `r >= 2`.
    NarrowPoly { c: f64, r: f64 },
}

impl Regime {
    pub fn name(&self) -> &'static str {
        match self {
            Regime::WideStrip { .. } => "wide",
            Regime::Transition { .. } => "transition",
            Regime::Intermediate { .. } => "intermediate",
            Regime::NarrowExp { .. } => "narrow-exp",
            Regime::NarrowPoly { .. } => "narrow-poly",
        }
    }

    /// Regime of `alpha = 1 - c eps^r` given the scaling law explicitly.
    pub fn narrow(c: f64, r: f64) -> Regime {
        if r >= 2.0 {
            Regime::NarrowPoly { c, r }
        } else {
            Regime::NarrowExp { c, r }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RegimeClass {
    pub regime: Regime,
    pub sigma: f64,
    pub tau_r: f64,
    /// Within [`TRANSITION_BAND`] of a threshold.
    pub boundary: bool,
}

/// Classifies from `sigma = ln alpha/ln eps` and `tau_r = ln(1 - alpha)/ln eps`.
pub fn classify_regime(eps: f64, alpha: f64, case: ForcingCase) -> RegimeClass {
    let threshold = match case {
        ForcingCase::Periodic => 2.0,
        ForcingCase::Quasiperiodic => 1.0,
    };
    let le = eps.ln();
    let sigma = if alpha > 0.0 { alpha.ln() / le } else { f64::INFINITY };
    let tau_r = (1.0 - alpha).ln() / le;
    let near = |x: f64, t: f64| (x - t).abs() <= TRANSITION_BAND;
    let boundary = near(sigma, threshold) || near(tau_r, 2.0) || near(tau_r, NARROW_ONSET);
    let regime = if tau_r >= 2.0 - TRANSITION_BAND {
        let r = if near(tau_r, 2.0) { 2.0 } else { tau_r };
        Regime::NarrowPoly { c: (1.0 - alpha) / eps.powf(r), r }
    } else if tau_r >= NARROW_ONSET {
        Regime::NarrowExp { c: (1.0 - alpha) / eps.powf(tau_r), r: tau_r }
    } else if near(sigma, threshold) {
        Regime::Transition { alpha_star: alpha / eps.powf(threshold) }
    } else if sigma > threshold {
        Regime::WideStrip { nu: sigma }
    } else {
        Regime::Intermediate { nu: sigma }
    };
    RegimeClass { regime, sigma, tau_r, boundary }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn examples() {
        let p = ForcingCase::Periodic;
        assert!(matches!(classify_regime(0.1, 1e-4, p).regime, Regime::WideStrip { .. }));
        assert!(matches!(classify_regime(0.1, 0.3, p).regime, Regime::Intermediate { .. }));
        assert!(matches!(classify_regime(0.1, 1.0 - 1e-3, p).regime, Regime::NarrowPoly { r, .. } if (r - 3.0).abs() < 1e-9));
        let t = classify_regime(0.1, 0.01, p);
        assert!(matches!(t.regime, Regime::Transition { alpha_star } if (alpha_star - 1.0).abs() < 1e-9));
        assert!(t.boundary);
        assert!(matches!(classify_regime(0.1, 0.9, p).regime, Regime::NarrowExp { r, .. } if (r - 1.0).abs() < 1e-9));
        assert!(matches!(classify_regime(0.1, 0.99, p).regime, Regime::NarrowPoly { r, .. } if r == 2.0));
        assert!(matches!(classify_regime(0.1, 0.0, p).regime, Regime::WideStrip { .. }));
    }

    #[test]
    fn quasiperiodic_threshold_is_one() {
        let q = ForcingCase::Quasiperiodic;
        assert!(matches!(classify_regime(0.1, 1e-3, q).regime, Regime::WideStrip { .. }));
        assert!(matches!(classify_regime(0.1, 0.1, q).regime, Regime::Transition { .. }));
        assert!(matches!(classify_regime(0.1, 0.3, q).regime, Regime::Intermediate { .. }));
        assert!(matches!(classify_regime(0.1, 0.05, ForcingCase::Periodic).regime, Regime::Intermediate { .. }));
        assert!(matches!(classify_regime(0.1, 0.05, q).regime, Regime::WideStrip { .. }));
    }
}
