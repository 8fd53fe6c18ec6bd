//! Quasiperiodic Melnikov function with frequency vector `(1, gamma)`.

use rayon::prelude::*;
use serde::Serialize;

use super::periodic::Side;
use super::regime::{classify_regime, ForcingCase, Regime};
use super::PoleSet;
use crate::error::{Error, Result};
use crate::model::{beta_real, golden_mean, ModelSpec, QpForcing, Variant};
use crate::mpnum::{quad_semi_infinite, Complex, Direction, DoublePole, QuadOptions, Real};
use crate::singular::{solve_singularities, SingularityData};

/// The first `n` convergents `(F_{m+1}, F_m)` of the golden mean.
pub fn golden_convergents(n: usize) -> Vec<(i64, i64)> {
    let mut out = Vec::with_capacity(n);
    let (mut p, mut q) = (1i64, 1i64);
    for _ in 0..n {
        out.push((p, q));
        let np = p + q;
        q = p;
        p = np;
    }
    out
}

/// `k1 + gamma k2`.
pub fn small_divisor(k: (i64, i64), gamma: &Real) -> Real {
    gamma * (k.1 as f64) + k.0 as f64
}

/// True for `+-(F_{m+1}, -F_m)`.
pub fn is_convergent(k: (i64, i64)) -> bool {
    if k.0.signum() * k.1.signum() != -1 {
        return false;
    }
    let (p, q) = (k.0.abs(), k.1.abs());
    let (mut a, mut b) = (1i64, 1i64);
    while b <= q {
        if (a, b) == (p, q) {
            return true;
        }
        let na = a + b;
        b = a;
        a = na;
    }
    false
}

#[derive(Clone, Debug)]
pub struct EnvelopeData {
    pub c0: Real,
    pub delta0: Real,
    pub eps_star: Real,
    pub period: Real,
}

impl EnvelopeData {
    pub fn new(r1: f64, r2: f64, prec: u32) -> Result<EnvelopeData> {
        if !(r1 > 0.0 && r2 > 0.0) {
            return Err(Error::InvalidParameter(format!("decay rates must be positive, got ({r1}, {r2})")));
        }
        let g = golden_mean(prec);
        let sum = &g + &g.recip();
        let weight = &g * r1 + r2;
        let c0 = (&weight / &sum).sqrt() * 2.0;
        let eps_star = &sum / &(g.square() * &weight);
        let delta0 = eps_star.ln();
        let period = g.ln() * 2.0;
        Ok(EnvelopeData { c0, delta0, eps_star, period })
    }
}

/// `C0 cosh((delta - delta0)/2)` on `[delta0 - ln gamma, delta0 + ln gamma]`,
/// extended periodically.
pub fn c_of_delta(delta: &Real, env: &EnvelopeData) -> Real {
    let half = &env.period / 2.0;
    let shifted = (delta - &env.delta0 + &half).rem_euclid(&env.period) - &half;
    &env.c0 * &(shifted / 2.0).cosh()
}

#[derive(Clone, Debug, Serialize)]
pub struct HarmonicAmplitude {
    pub k: (i64, i64),
    #[serde(skip)]
    pub small_divisor: Real,
    #[serde(skip)]
    pub amplitude: Real,
    #[serde(skip)]
    pub phase: Real,
}

/// `K(nu) = 4 int beta(s) exp(i nu s) ds` from residues.
#[derive(Clone, Debug)]
pub struct QpKernel {
    eps: Real,
    gamma: Real,
    alpha_zero: bool,
    leading: Vec<DoublePole>,
    complete: Vec<DoublePole>,
    zero_mode: Real,
    /// `4 int |beta|`, a bound on `|K|` for every `nu`.
    l1_bound: f64,
    prec: u32,
}

impl QpKernel {
    pub fn new(spec: &ModelSpec) -> Result<QpKernel> {
        let p = spec.prec;
        let eps = spec.epsilon.with_prec(p);
        let gamma = golden_mean(p);
        let l1_bound = beta_l1(&spec.alpha, spec.variant)? * 4.0;
        if spec.alpha.is_zero() {
            return Ok(QpKernel {
                eps,
                gamma,
                alpha_zero: true,
                leading: vec![],
                complete: vec![],
                zero_mode: Real::zero(p),
                l1_bound,
                prec: p,
            });
        }
        let sing = solve_singularities(&spec.alpha.with_prec(p), spec.variant)?;
        QpKernel::from_singularities(&sing, &eps, l1_bound)
    }

    fn from_singularities(sing: &SingularityData, eps: &Real, l1_bound: f64) -> Result<QpKernel> {
        let p = sing.prec();
        let complete = sing.period_poles().iter().map(|r| sing.pole_data(r)).collect::<Result<Vec<_>>>()?;
        let leading_locs = match sing.variant {
            Variant::Standard => vec![sing.rho_minus.clone()],
            Variant::Alternative => vec![sing.rho_minus.clone(), sing.rho_plus.clone()],
        };
        let leading = leading_locs.iter().map(|r| sing.pole_data(r)).collect::<Result<Vec<_>>>()?;
        let zero_mode = match (sing.variant, &sing.deltas) {
            (Variant::Standard, Some((d1, _))) => d1.re.clone(),
            _ => Real::zero(p),
        };
        Ok(QpKernel {
            eps: eps.with_prec(p),
            gamma: golden_mean(p),
            alpha_zero: false,
            leading,
            complete,
            zero_mode,
            l1_bound,
            prec: p,
        })
    }

    pub fn nu(&self, k: (i64, i64)) -> Real {
        small_divisor(k, &self.gamma) / &self.eps
    }

    pub fn eval(&self, nu: &Real, poles: PoleSet) -> Complex {
        let p = self.prec;
        if nu.is_zero() {
            return Complex::from_real(self.zero_mode.clone());
        }
        if nu.is_sign_negative() {
            return self.eval(&(-nu), poles).conj();
        }
        if self.alpha_zero {
            let pi = Real::pi(p);
            let mag = &pi * 2.0 * &nu.square() / &(&pi * nu / 2.0).sinh();
            return Complex::new(Real::zero(p), mag);
        }
        let set = match poles {
            PoleSet::Leading => &self.leading,
            PoleSet::Pair => &self.complete[..2],
            PoleSet::Complete => &self.complete,
        };
        let mut sum = Complex::zero(p);
        for pole in set {
            sum += &pole.residue(nu);
        }
        let mut k = sum.mul_i().scale(&(Real::pi(p) * 8.0));
        if poles == PoleSet::Complete {
            k = k / &(1.0 - &(-(Real::pi(p) * 2.0 * nu)).exp());
        }
        k
    }

    /// f64 bound on `|K(nu)|`.
    pub fn bound(&self, nu: f64) -> f64 {
        let nu = nu.abs();
        if nu == 0.0 {
            return self.l1_bound;
        }
        let poles = if self.alpha_zero {
            let pi = std::f64::consts::PI;
            2.0 * pi * nu * nu / (pi * nu / 2.0).sinh()
        } else {
            let s: f64 = self
                .complete
                .iter()
                .map(|d| {
                    let im = d.location.im.to_f64();
                    (-nu * im).exp() * (nu * d.lead.abs().to_f64() + d.sub.abs().to_f64())
                })
                .sum();
            8.0 * std::f64::consts::PI * s / (1.0 - (-2.0 * std::f64::consts::PI * nu).exp())
        };
        poles.min(self.l1_bound)
    }
}

/// `int |beta(s)| ds`, to about 1e-12.
fn beta_l1(alpha: &Real, variant: Variant) -> Result<f64> {
    let p = 64;
    let alpha = alpha.with_prec(p);
    let f = |s: &Real| Complex::from_real(beta_real(s, &alpha, variant).abs());
    let opts = QuadOptions::new(p).rel_tol(1e-12).max_panel(0.5);
    let zero = Real::zero(p);
    let a = quad_semi_infinite(f, &zero, Direction::Forward, 2.0, &opts)?;
    let b = quad_semi_infinite(f, &zero, Direction::Backward, 2.0, &opts)?;
    Ok((a.value.re + &b.value.re).to_f64() * (1.0 + 1e-9))
}

fn forcing(spec: &ModelSpec) -> Result<&QpForcing> {
    spec.forcing.qp().ok_or_else(|| Error::InvalidParameter("quasiperiodic Melnikov needs qp forcing".into()))
}

fn amplitude_from_kernel(kernel: &QpKernel, f: &QpForcing, k: (i64, i64), poles: PoleSet) -> HarmonicAmplitude {
    let sd = small_divisor(k, &kernel.gamma);
    let nu = &sd / &kernel.eps;
    let c = &f.spectrum.get(k) * &kernel.eval(&nu, poles);
    let two_pi = Real::pi(kernel.prec) * 2.0;
    HarmonicAmplitude { k, small_divisor: sd, amplitude: c.abs(), phase: c.arg().rem_euclid(&two_pi) }
}

/// Modulus and phase of the `k` harmonic from the `rho_minus` residue,
/// checked against `|F^[k]| |(k.w/eps) delta2 + delta1| exp(-|k.w| Im rho/eps)`.
pub fn harmonic_amplitude(k: (i64, i64), spec: &ModelSpec, sing: &SingularityData) -> Result<HarmonicAmplitude> {
    if k == (0, 0) {
        return Err(Error::InvalidParameter("k = (0, 0) is excluded for zero-mean forcing".into()));
    }
    let f = forcing(spec)?;
    let kernel = QpKernel::from_singularities(sing, &spec.epsilon, 0.0)?;
    let h = amplitude_from_kernel(&kernel, f, k, PoleSet::Leading);
    if let Some((d1, d2)) = &sing.deltas {
        let nu = (&h.small_divisor / &kernel.eps).abs();
        let bracket = &d2.scale(&nu) + d1;
        let closed = f.spectrum.get(k).abs() * &bracket.abs() * &(-(&nu * &sing.rate())).exp();
        let p = sing.prec();
        let tol = Real::exp2i(-((p / 4) as i32), p);
        let scale = closed.max(&h.amplitude);
        if !scale.is_zero() && (&closed - &h.amplitude).abs() / &scale > tol {
            return Err(Error::NonConvergence {
                what: "harmonic residue vs closed form",
                iterations: 0,
                residual: ((&closed - &h.amplitude).abs() / &scale).to_f64(),
            });
        }
    }
    Ok(h)
}

/// Harmonic with every pole of the period strip (exact coefficient).
pub fn harmonic_coefficient(k: (i64, i64), spec: &ModelSpec) -> Result<Complex> {
    let f = forcing(spec)?;
    let kernel = QpKernel::new(spec)?;
    Ok(&f.coefficient(k) * &kernel.eval(&kernel.nu(k), PoleSet::Complete))
}

/// Argmax of the leading-pole amplitude over convergents `(-F_{m+1} + j, F_m)`,
/// `|j| <= 2`, `F_m <= kmax`.
pub fn leading_harmonic(spec: &ModelSpec, sing: &SingularityData) -> Result<HarmonicAmplitude> {
    let f = forcing(spec)?;
    let kmax = f.spectrum.kmax() as i64;
    let kernel = QpKernel::from_singularities(sing, &spec.epsilon, 0.0)?;
    let mut best: Option<(usize, HarmonicAmplitude)> = None;
    let mut last = 0usize;
    for (m, (p, q)) in golden_convergents(64).into_iter().enumerate() {
        if q > kmax || p + 2 > kmax {
            break;
        }
        last = m;
        for j in -2..=2 {
            let k = (-p + j, q);
            let h = amplitude_from_kernel(&kernel, f, k, PoleSet::Leading);
            if best.as_ref().map_or(true, |(_, b)| h.amplitude > b.amplitude) {
                best = Some((m, h));
            }
        }
    }
    let (m, h) = best.ok_or_else(|| Error::InvalidParameter("kmax admits no convergent".into()))?;
    if m == last {
        return Err(Error::InvalidParameter(format!("kmax = {kmax} insufficient: leading harmonic {:?} at the boundary", h.k)));
    }
    Ok(h)
}

/// Argmax over every stored harmonic with `|k2| <= k2max`, normalized to
/// `k2 > 0` (or `k2 = 0, k1 > 0`).
pub fn leading_harmonic_exhaustive(spec: &ModelSpec, sing: &SingularityData, k2max: i64) -> Result<HarmonicAmplitude> {
    let f = forcing(spec)?;
    let kernel = QpKernel::from_singularities(sing, &spec.epsilon, 0.0)?;
    let keys: Vec<(i64, i64)> = f
        .spectrum
        .iter()
        .map(|(k, _)| *k)
        .filter(|&(k1, k2)| (k2 > 0 || (k2 == 0 && k1 > 0)) && k2 <= k2max)
        .collect();
    let amps: Vec<HarmonicAmplitude> =
        keys.par_iter().map(|&k| amplitude_from_kernel(&kernel, f, k, PoleSet::Leading)).collect();
    amps.into_iter()
        .reduce(|a, b| if b.amplitude > a.amplitude { b } else { a })
        .ok_or_else(|| Error::InvalidParameter("empty spectrum".into()))
}

#[derive(Clone, Debug)]
pub struct QpTerm {
    pub k: (i64, i64),
    pub nu: Real,
    /// `F^[k] K(nu)`.
    pub coefficient: Complex,
}

/// Truncated series `M(u, theta) = sum_k F^[k] K(nu_k) exp(i(k.theta - nu_k u))`
/// over `max(|k1|, |k2|) <= kmax`.
#[derive(Clone, Debug)]
pub struct QpSeries {
    terms: Vec<QpTerm>,
    kmax: usize,
    tail: f64,
    prec: u32,
}

#[derive(Clone, Debug)]
pub struct TorusSup {
    /// `sup |M(0, theta)|`.
    pub value: Real,
    pub signed: Real,
    pub theta1: Real,
    pub theta2: Real,
}

impl QpSeries {
    pub fn new(spec: &ModelSpec, kmax: Option<usize>) -> Result<QpSeries> {
        let f = forcing(spec)?;
        let stored = f.spectrum.kmax();
        let kmax = kmax.unwrap_or(stored);
        if kmax > stored {
            return Err(Error::InvalidParameter(format!("truncation {kmax} beyond the stored spectrum ({stored})")));
        }
        let kernel = QpKernel::new(spec)?;
        let mut keys: Vec<(i64, i64)> = f
            .spectrum
            .iter()
            .map(|(k, _)| *k)
            .filter(|&(a, b)| a.unsigned_abs() as usize <= kmax && b.unsigned_abs() as usize <= kmax)
            .filter(|&k| !(k == (0, 0) && f.remove_mean))
            .collect();
        keys.sort_by_key(|&(a, b)| (b.abs(), b, a));
        let terms: Vec<QpTerm> = keys
            .par_iter()
            .map(|&k| {
                let nu = kernel.nu(k);
                let coefficient = &f.coefficient(k) * &kernel.eval(&nu, PoleSet::Complete);
                QpTerm { k, nu, coefficient }
            })
            .collect();
        let tail = series_tail(&kernel, f, kmax);
        Ok(QpSeries { terms, kmax, tail, prec: spec.prec })
    }

    pub fn terms(&self) -> &[QpTerm] {
        &self.terms
    }

    pub fn kmax(&self) -> usize {
        self.kmax
    }

    /// Bound on the sup-norm of the omitted harmonics.
    pub fn tail_bound(&self) -> f64 {
        self.tail
    }

    /// `sum_k |coefficient|`.
    pub fn l1_norm(&self) -> f64 {
        self.terms.iter().map(|t| t.coefficient.abs().to_f64()).sum()
    }

    pub fn eval(&self, u: &Real, th1: &Real, th2: &Real) -> Real {
        let p = self.prec.max(th1.prec());
        let mut acc = Real::zero(p);
        for t in &self.terms {
            let arg = th1 * (t.k.0 as f64) + &(th2 * (t.k.1 as f64)) - &(&t.nu * u);
            let (s, c) = arg.sin_cos();
            acc.add_mul(&t.coefficient.re, &c);
            acc.sub_mul(&t.coefficient.im, &s);
        }
        acc
    }

    /// Largest coefficient, normalized to `k2 > 0` (or `k2 = 0, k1 > 0`).
    pub fn dominant_harmonic(&self) -> Option<(i64, i64)> {
        self.terms
            .iter()
            .filter(|t| t.k.1 > 0 || (t.k.1 == 0 && t.k.0 > 0))
            .max_by(|a, b| a.coefficient.abs().partial_cmp(&b.coefficient.abs()).unwrap())
            .map(|t| t.k)
    }

    /// Supremum over the torus at `u = 0`: grid scan with `grid` points per
    /// angle, Newton refinement of the best cells, final values at full precision.
    pub fn sup(&self, grid: usize) -> Result<TorusSup> {
        let scale = self.terms.iter().map(|t| t.coefficient.abs()).fold(Real::zero(self.prec), |a, b| a.max(&b));
        if scale.is_zero() {
            let z = Real::zero(self.prec);
            return Ok(TorusSup { value: z.clone(), signed: z.clone(), theta1: z.clone(), theta2: z });
        }
        let scaled: Vec<((f64, f64), (f64, f64))> = self
            .terms
            .iter()
            .map(|t| {
                let c = t.coefficient.scale(&scale.recip());
                ((t.k.0 as f64, t.k.1 as f64), c.to_f64())
            })
            .collect();
        let values = grid_values(&self.terms, &scaled, grid);
        let n = grid;
        let h = 2.0 * std::f64::consts::PI / n as f64;
        let mut cells: Vec<(f64, usize, usize)> = Vec::new();
        for i in 0..n {
            for j in 0..n {
                let v = values[i * n + j].abs();
                let neighbours = [(1, 0), (n - 1, 0), (0, 1), (0, n - 1)];
                if neighbours.iter().all(|&(di, dj)| values[((i + di) % n) * n + (j + dj) % n].abs() <= v) {
                    cells.push((v, i, j));
                }
            }
        }
        cells.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());
        cells.truncate(8);
        let two_pi = Real::pi(self.prec) * 2.0;
        let zero = Real::zero(self.prec);
        let mut best: Option<TorusSup> = None;
        for &(_, i, j) in &cells {
            let (t1, t2) = newton_refine(&scaled, (i as f64 * h, j as f64 * h), h);
            let th1 = Real::from_f64(t1, self.prec).rem_euclid(&two_pi);
            let th2 = Real::from_f64(t2, self.prec).rem_euclid(&two_pi);
            let signed = self.eval(&zero, &th1, &th2);
            let value = signed.abs();
            if best.as_ref().map_or(true, |b| value > b.value) {
                best = Some(TorusSup { value, signed, theta1: th1, theta2: th2 });
            }
        }
        best.ok_or_else(|| Error::NonConvergence { what: "torus supremum", iterations: 0, residual: f64::NAN })
    }
}

/// Scaled series on the `n x n` grid, row-major in `theta1`.
fn grid_values(terms: &[QpTerm], scaled: &[((f64, f64), (f64, f64))], n: usize) -> Vec<f64> {
    use std::collections::BTreeMap;
    let h = 2.0 * std::f64::consts::PI / n as f64;
    // Partial sums over k1 for every k2 and theta1.
    let mut by_k2: BTreeMap<i64, Vec<(f64, f64)>> = BTreeMap::new();
    for (t, &((k1, _), (re, im))) in terms.iter().zip(scaled) {
        let row = by_k2.entry(t.k.1).or_insert_with(|| vec![(0.0, 0.0); n]);
        for (i, slot) in row.iter_mut().enumerate() {
            let (s, c) = (k1 * i as f64 * h).sin_cos();
            slot.0 += re * c - im * s;
            slot.1 += re * s + im * c;
        }
    }
    let rows: Vec<(i64, Vec<(f64, f64)>)> = by_k2.into_iter().collect();
    (0..n * n)
        .into_par_iter()
        .map(|idx| {
            let (i, j) = (idx / n, idx % n);
            rows.iter()
                .map(|(k2, row)| {
                    let (s, c) = (*k2 as f64 * j as f64 * h).sin_cos();
                    row[i].0 * c - row[i].1 * s
                })
                .sum()
        })
        .collect()
}

fn newton_refine(scaled: &[((f64, f64), (f64, f64))], start: (f64, f64), h: f64) -> (f64, f64) {
    let (mut x, mut y) = start;
    for _ in 0..30 {
        let (mut g1, mut g2, mut h11, mut h12, mut h22) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for &((k1, k2), (re, im)) in scaled {
            let (s, c) = (k1 * x + k2 * y).sin_cos();
            let d = -(re * s + im * c);
            let dd = -(re * c - im * s);
            g1 += d * k1;
            g2 += d * k2;
            h11 += dd * k1 * k1;
            h12 += dd * k1 * k2;
            h22 += dd * k2 * k2;
        }
        let det = h11 * h22 - h12 * h12;
        if det == 0.0 || !det.is_finite() {
            break;
        }
        let dx = (h22 * g1 - h12 * g2) / det;
        let dy = (h11 * g2 - h12 * g1) / det;
        if dx.hypot(dy) > 2.0 * h {
            break;
        }
        x -= dx;
        y -= dy;
        if dx.hypot(dy) < 1e-15 {
            break;
        }
    }
    (x, y)
}

/// Ring-by-ring bound on the harmonics with `max(|k1|, |k2|) > kmax`.
fn series_tail(kernel: &QpKernel, f: &QpForcing, kmax: usize) -> f64 {
    let decay = f.spectrum.decay_constant();
    let (r1, r2) = (f.r1, f.r2);
    let gamma = kernel.gamma.to_f64();
    let eps = kernel.eps.to_f64();
    let k = kmax as i64;
    let rings = 3 * k.max(8);
    let mut total = 0.0;
    for n in (k + 1)..=rings {
        for a in -n..=n {
            for b in [-n, n] {
                for (k1, k2) in [(a, b), (b, a)] {
                    if k1.abs() == n && k2.abs() == n && (k1, k2) == (b, a) {
                        continue;
                    }
                    let fk = decay * (-(r1 * k1.abs() as f64) - r2 * k2.abs() as f64).exp();
                    total += fk * kernel.bound((k1 as f64 + gamma * k2 as f64) / eps);
                }
            }
        }
    }
    let q = (-r1.min(r2)).exp();
    let n0 = (rings + 1) as f64;
    let rest = 8.0 * q.powf(n0) * (n0 / (1.0 - q) + q / (1.0 - q).powi(2));
    total + decay * kernel.l1_bound * rest
}

#[derive(Clone, Debug)]
pub struct QpValue {
    pub value: Real,
    pub tail: f64,
}

/// Truncated series at `(u, theta1, theta2)`; fails when the tail bound
/// exceeds `tol` times the series' l1 norm.
pub fn melnikov_qp_eval(
    u: &Real,
    th1: &Real,
    th2: &Real,
    spec: &ModelSpec,
    kmax: Option<usize>,
    tol: f64,
) -> Result<QpValue> {
    let series = QpSeries::new(spec, kmax)?;
    let norm = series.l1_norm();
    if series.tail > tol * norm {
        return Err(Error::InvalidParameter(format!("truncation tail {:e} exceeds tolerance {:e}", series.tail, tol * norm)));
    }
    Ok(QpValue { value: series.eval(u, th1, th2), tail: series.tail })
}

fn qp_half_integral(u: &Real, th1: &Real, th2: &Real, spec: &ModelSpec, dir: Direction) -> Result<Real> {
    let f = forcing(spec)?;
    let p = spec.prec;
    let eps = &spec.epsilon;
    let gamma = golden_mean(p);
    let alpha = &spec.alpha;
    let variant = spec.variant;
    let inv_eps = eps.recip();
    let g = |s: &Real| {
        let t = s * &inv_eps;
        let a = th1 + &t;
        let b = th2 + &(&gamma * &t);
        Complex::from_real(beta_real(&(u + s), alpha, variant) * &f.value(&a, &b))
    };
    let panel = eps.to_f64() * f.r1.min(f.r2 / gamma.to_f64());
    let opts = QuadOptions::new(p).max_panel(panel).rel_tol(2f64.powi(-((p / 2) as i32))).max_evals(4_000_000);
    let r = quad_semi_infinite(g, &Real::zero(p), dir, 2.0, &opts)?;
    Ok(r.value.re * 4.0)
}

/// Unstable: `-4 int_{-inf}^0`; stable: `4 int_0^inf` of `beta(u+s) F(theta + w s/eps)`.
pub fn half_melnikov_qp(u: &Real, th1: &Real, th2: &Real, spec: &ModelSpec, side: Side) -> Result<Real> {
    match side {
        Side::Unstable => Ok(-qp_half_integral(u, th1, th2, spec, Direction::Backward)?),
        Side::Stable => qp_half_integral(u, th1, th2, spec, Direction::Forward),
    }
}

/// Direct quadrature of the full integral, for cross-checks.
pub fn melnikov_qp_quadrature(u: &Real, th1: &Real, th2: &Real, spec: &ModelSpec) -> Result<Real> {
    let s = half_melnikov_qp(u, th1, th2, spec, Side::Stable)?;
    let un = half_melnikov_qp(u, th1, th2, spec, Side::Unstable)?;
    Ok(s - &un)
}

/// Measured constants of a bracket `C1 E <= sup|M| <= C2 E`.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct EnvelopeConstants {
    pub c1: f64,
    pub c2: f64,
}

/// `(1/eps) exp(-c(ln(2 eps/pi)) sqrt(pi/(2 eps)))`.
fn wide_reference(eps: &Real, env: &EnvelopeData) -> Real {
    let half_pi = Real::pi(eps.prec()) / 2.0;
    let q = eps / &half_pi;
    let c = c_of_delta(&q.ln(), env);
    eps.recip() * &(-(c * &q.recip().sqrt())).exp()
}

/// `exp(-c(ln(eps/Im rho)) sqrt(Im rho/eps))`.
fn rho_exponential(eps: &Real, rate: &Real, env: &EnvelopeData) -> Real {
    let q = eps / rate;
    let c = c_of_delta(&q.ln(), env);
    (-(c * &q.recip().sqrt())).exp()
}

/// Reference size `E` whose ratio to `sup|M|` is bounded above and below
/// in the regime of `spec`.
pub fn envelope_reference(spec: &ModelSpec) -> Result<(Regime, Real)> {
    let class = classify_regime(spec.epsilon.to_f64(), spec.alpha.to_f64(), ForcingCase::Quasiperiodic);
    Ok((class.regime, envelope_reference_in(spec, &class.regime)?))
}

/// Reference size of an explicitly chosen regime formula.
pub fn envelope_reference_in(spec: &ModelSpec, regime: &Regime) -> Result<Real> {
    let f = forcing(spec)?;
    let env = EnvelopeData::new(f.r1, f.r2, spec.prec)?;
    let eps = &spec.epsilon;
    Ok(match *regime {
        Regime::WideStrip { .. } | Regime::Transition { .. } => wide_reference(eps, &env),
        Regime::Intermediate { .. } => {
            let sing = solve_singularities(&spec.alpha, spec.variant)?;
            let pre = (eps * &spec.alpha).sqrt() * &(1.0 - &spec.alpha).pow_f64(1.25);
            rho_exponential(eps, &sing.rate(), &env) / &pre
        }
        Regime::NarrowExp { r, .. } => narrow_reference(spec, r, &env)?,
        Regime::NarrowPoly { r, .. } => eps.pow_f64(-1.5 * r),
    })
}

fn narrow_reference(spec: &ModelSpec, r: f64, env: &EnvelopeData) -> Result<Real> {
    let eps = &spec.epsilon;
    if r >= 2.0 {
        return Ok(eps.pow_f64(-1.5 * r));
    }
    let sing = solve_singularities(&spec.alpha, spec.variant)?;
    let pre = spec.alpha.sqrt() * &eps.pow_f64(0.5 + 1.25 * r);
    Ok(rho_exponential(eps, &sing.rate(), env) / &pre)
}

/// `(lower, upper)` bracket; the lower end is zero where only an upper bound holds.
pub fn envelope_bounds(spec: &ModelSpec, constants: &EnvelopeConstants) -> Result<(Real, Real)> {
    let (regime, e) = envelope_reference(spec)?;
    let lower = match regime {
        Regime::Transition { .. } => Real::zero(spec.prec),
        _ => &e * constants.c1,
    };
    Ok((lower, e * constants.c2))
}

/// Bracket for `alpha = 1 - c eps^r`.
pub fn qp_narrow_bounds(spec: &ModelSpec, c: f64, r: f64, constants: &EnvelopeConstants) -> Result<(Real, Real)> {
    if !(r > 0.0) {
        return Err(Error::InvalidParameter(format!("narrow exponent must be positive, got {r}")));
    }
    let law = c * spec.epsilon.to_f64().powf(r);
    let actual = (1.0 - &spec.alpha).to_f64();
    if (law - actual).abs() > 1e-6 * actual {
        return Err(Error::RegimeMismatch(format!("1 - alpha = {actual:e} but C eps^r = {law:e}")));
    }
    let f = forcing(spec)?;
    let env = EnvelopeData::new(f.r1, f.r2, spec.prec)?;
    let e = narrow_reference(spec, r, &env)?;
    Ok((&e * constants.c1, e * constants.c2))
}

#[derive(Clone, Debug, Serialize)]
pub struct EnvelopePoint {
    pub eps: f64,
    pub regime: &'static str,
    pub sup: f64,
    pub reference: f64,
    /// `ln(sup / reference)`.
    pub normalized_log: f64,
    pub dominant: (i64, i64),
    pub tail: f64,
}

/// `sup|M|` against the regime reference for each spec.
pub fn envelope_profile(specs: &[ModelSpec], grid: usize) -> Result<Vec<EnvelopePoint>> {
    specs
        .iter()
        .map(|spec| {
            let series = QpSeries::new(spec, None)?;
            let sup = series.sup(grid)?;
            let (regime, e) = envelope_reference(spec)?;
            Ok(EnvelopePoint {
                eps: spec.epsilon.to_f64(),
                regime: regime.name(),
                sup: sup.value.to_f64(),
                reference: e.to_f64(),
                normalized_log: (sup.value.ln() - &e.ln()).to_f64(),
                dominant: series.dominant_harmonic().unwrap_or((0, 0)),
                tail: series.tail_bound(),
            })
        })
        .collect()
}

/// `C1 = min`, `C2 = max` of `sup|M| / E` over a profile.
pub fn calibrate_envelope(profile: &[EnvelopePoint]) -> EnvelopeConstants {
    let ratios = profile.iter().map(|p| p.normalized_log.exp());
    let (c1, c2) = ratios.fold((f64::INFINITY, 0.0f64), |(lo, hi), r| (lo.min(r), hi.max(r)));
    EnvelopeConstants { c1, c2 }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ForcingSpec;

    fn qp_spec(eps: f64, alpha: f64, kmax: usize, prec: u32) -> ModelSpec {
        let f = QpForcing::example(1.0, 1.0, Some(kmax), prec).unwrap();
        ModelSpec::periodic(eps, alpha, prec).unwrap().with_forcing(ForcingSpec::Quasiperiodic(Box::new(f)))
    }

    #[test]
    fn convergents() {
        assert_eq!(golden_convergents(5), vec![(1, 1), (2, 1), (3, 2), (5, 3), (8, 5)]);
        let g = golden_mean(128);
        let mut prev = f64::INFINITY;
        let mut sign = 0.0;
        for (p, q) in golden_convergents(20) {
            let d = small_divisor((p, -q), &g).to_f64();
            assert!(d.abs() < prev && d.abs() < 1.0 / q as f64);
            assert!(d.signum() != sign);
            sign = d.signum();
            prev = d.abs();
            assert!(is_convergent((p, -q)) && is_convergent((-p, q)));
        }
        assert!(!is_convergent((4, -3)));
    }

    #[test]
    fn envelope_function() {
        let env = EnvelopeData::new(1.0, 1.0, 128).unwrap();
        assert!((env.c0.to_f64() - 2.164089).abs() < 1e-6);
        assert!((&c_of_delta(&env.delta0, &env) - &env.c0).abs() < 1e-35);
        let shifted = &env.delta0 + &env.period;
        assert!((&c_of_delta(&shifted, &env) - &env.c0).abs() < 1e-30);
        let g = golden_mean(128);
        let edge = &env.delta0 + &g.ln();
        let expect = &env.c0 * &(g.ln() / 2.0).cosh();
        assert!((&c_of_delta(&edge, &env) - &expect).abs() < 1e-30);
    }

    #[test]
    fn amplitude_symmetry_and_closed_form() {
        let s = qp_spec(0.2, 0.4, 16, 256);
        let sing = solve_singularities(&s.alpha, Variant::Standard).unwrap();
        let a = harmonic_amplitude((3, -2), &s, &sing).unwrap();
        let b = harmonic_amplitude((-3, 2), &s, &sing).unwrap();
        assert!(((&a.amplitude - &b.amplitude) / &a.amplitude).abs() < 1e-60);
        assert!(harmonic_amplitude((0, 0), &s, &sing).is_err());
    }

    #[test]
    fn series_is_translation_covariant() {
        let s = qp_spec(0.3, 0.3, 24, 128);
        let series = QpSeries::new(&s, None).unwrap();
        let u = Real::from_f64(0.37, 128);
        let (t1, t2) = (Real::from_f64(1.1, 128), Real::from_f64(-0.4, 128));
        let g = golden_mean(128);
        let a = series.eval(&u, &t1, &t2);
        let b = series.eval(&Real::zero(128), &(&t1 - &(&u / &s.epsilon)), &(&t2 - &(&g * &u / &s.epsilon)));
        assert!((&a - &b).abs() < 1e-30);
    }

    #[test]
    fn rho_plus_correction_is_exponentially_smaller() {
        let s = qp_spec(0.2, 0.4, 8, 128);
        let sing = solve_singularities(&s.alpha, Variant::Standard).unwrap();
        let gap = (&sing.rho_plus.im - &sing.rho_minus.im).to_f64();
        let kernel = QpKernel::new(&s).unwrap();
        for nu in [2.0, 5.0, 10.0, 20.0] {
            let nu = Real::from_f64(nu, 128);
            let lead = kernel.eval(&nu, PoleSet::Leading);
            let full = kernel.eval(&nu, PoleSet::Complete);
            let rel = ((&full - &lead).abs() / &lead.abs()).to_f64();
            assert!(rel < 4.0 * (-nu.to_f64() * gap).exp(), "nu={} rel={rel}", nu.to_f64());
        }
    }

    #[test]
    fn kernel_matches_periodic_residue() {
        let s = qp_spec(0.2, 0.5, 8, 128);
        let kernel = QpKernel::new(&s).unwrap();
        let k = kernel.eval(&s.epsilon.recip(), PoleSet::Complete);
        let periodic = ModelSpec::periodic(0.2, 0.5, 128).unwrap();
        let m = super::super::melnikov_residue(&periodic, PoleSet::Complete).unwrap();
        assert!((&k - &m.coefficient).abs() / &m.amplitude < 1e-30);
        assert!(kernel.bound(5.0) >= kernel.eval(&Real::from_f64(5.0, 128), PoleSet::Complete).abs().to_f64());
    }
}
