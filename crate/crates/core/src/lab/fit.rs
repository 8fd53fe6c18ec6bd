use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitModel {
    /// `ln A = ln c + q ln eps - a/eps`.
    ExpPlusPower,
    /// `ln A = ln c + q ln eps`.
    PowerOnly,
}

impl std::str::FromStr for FitModel {
    type Err = Error;
    fn from_str(s: &str) -> Result<FitModel> {
        match s {
            "exp_plus_power" | "exp" => Ok(FitModel::ExpPlusPower),
            "power_only" | "power" => Ok(FitModel::PowerOnly),
            other => Err(Error::Parse(format!("unknown fit model `{other}`"))),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct RegressionReport {
    pub model: FitModel,
    /// `a` in `exp(-a/eps)`; absent for the power-only model.
    pub rate: Option<f64>,
    pub power: f64,
    pub log_prefactor: f64,
    /// Parameter covariance in the order `(ln c, q, a)`.
    pub covariance: Vec<Vec<f64>>,
    pub residuals: Vec<f64>,
    pub residual_norm: f64,
    pub n_points: usize,
}

pub const MIN_FIT_POINTS: usize = 6;

/// Least squares on `ln A` over points `(eps, A)`.
pub fn fit_rate_prefactor(points: &[(f64, f64)], model: FitModel) -> Result<RegressionReport> {
    let n = points.len();
    if n < MIN_FIT_POINTS {
        return Err(Error::InvalidParameter(format!("fit needs at least {MIN_FIT_POINTS} points, got {n}")));
    }
    if let Some(&(e, a)) = points.iter().find(|&&(e, a)| !(e > 0.0) || !(a > 0.0)) {
        return Err(Error::InvalidParameter(format!("non-positive point ({e}, {a})")));
    }
    let cols = match model {
        FitModel::ExpPlusPower => 3,
        FitModel::PowerOnly => 2,
    };
    let design = DMatrix::from_fn(n, cols, |i, j| {
        let e = points[i].0;
        match j {
            0 => 1.0,
            1 => e.ln(),
            _ => -1.0 / e,
        }
    });
    let rhs = DVector::from_iterator(n, points.iter().map(|p| p.1.ln()));
    let normal = design.transpose() * &design;
    let inv = normal
        .clone()
        .try_inverse()
        .filter(|_| normal.rank(1e-12 * normal.norm()) == cols)
        .ok_or_else(|| Error::SingularDesign(format!("{n} points, {cols} parameters")))?;
    let beta = &inv * design.transpose() * &rhs;
    let resid = &rhs - &design * &beta;
    let rss = resid.norm_squared();
    let dof = (n - cols).max(1) as f64;
    let cov = inv * (rss / dof);
    Ok(RegressionReport {
        model,
        rate: (cols == 3).then(|| beta[2]),
        power: beta[1],
        log_prefactor: beta[0],
        covariance: (0..cols).map(|i| (0..cols).map(|j| cov[(i, j)]).collect()).collect(),
        residuals: resid.iter().copied().collect(),
        residual_norm: rss.sqrt(),
        n_points: n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_exact_model() {
        let pts: Vec<(f64, f64)> = (0..8).map(|i| 0.05 + 0.03 * i as f64).map(|e| (e, e.powi(3) * (-2.0 / e).exp())).collect();
        let r = fit_rate_prefactor(&pts, FitModel::ExpPlusPower).unwrap();
        assert!((r.rate.unwrap() - 2.0).abs() < 1e-10);
        assert!((r.power - 3.0).abs() < 1e-10);
        assert!(r.residual_norm < 1e-10);
        let p: Vec<(f64, f64)> = pts.iter().map(|&(e, _)| (e, 7.0 * e.powf(-4.5))).collect();
        let r = fit_rate_prefactor(&p, FitModel::PowerOnly).unwrap();
        assert!((r.power + 4.5).abs() < 1e-10 && (r.log_prefactor - 7f64.ln()).abs() < 1e-10);
    }

    #[test]
    fn rejects_degenerate_input() {
        let same = vec![(0.1, 1.0); 6];
        assert!(matches!(fit_rate_prefactor(&same, FitModel::PowerOnly), Err(Error::SingularDesign(_))));
        assert!(fit_rate_prefactor(&same[..3], FitModel::PowerOnly).is_err());
        let mut neg = same.clone();
        neg[0].1 = -1.0;
        assert!(fit_rate_prefactor(&neg, FitModel::PowerOnly).is_err());
    }
}
