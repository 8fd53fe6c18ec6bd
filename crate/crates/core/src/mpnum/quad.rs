//! Adaptive Gauss-Legendre quadrature with paired rules for error estimation.

use super::complex::Complex;
use super::real::{clamp_prec, Real};
use crate::error::{Error, Result};

#[derive(Clone, Debug)]
pub struct QuadOptions {
    pub prec: u32,
    pub rel_tol: f64,
    /// Upper bound on panel width, e.g. a fraction of an oscillation period.
    pub max_panel: Option<f64>,
    pub max_evals: usize,
    /// Points in the low-order rule; the high-order rule uses twice as many.
    pub order: Option<usize>,
}

impl QuadOptions {
    pub fn new(prec: u32) -> QuadOptions {
        let prec = clamp_prec(prec);
        QuadOptions {
            prec,
            rel_tol: 2f64.powi(-(prec as i32) + 24).max(1e-300),
            max_panel: None,
            max_evals: 400_000,
            order: None,
        }
    }

    pub fn rel_tol(mut self, tol: f64) -> QuadOptions {
        self.rel_tol = tol;
        self
    }

    pub fn max_panel(mut self, w: f64) -> QuadOptions {
        self.max_panel = Some(w);
        self
    }

    pub fn max_evals(mut self, n: usize) -> QuadOptions {
        self.max_evals = n;
        self
    }

    fn low_order(&self) -> usize {
        self.order.unwrap_or_else(|| ((self.prec as usize) / 8).clamp(10, 80))
    }
}

#[derive(Clone, Debug)]
pub struct QuadratureResult {
    pub value: Complex,
    pub error_estimate: Real,
    pub evaluations: usize,
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
#[derive(Clone, Debug)]
pub struct GaussLegendre {
    pub nodes: Vec<Real>,
    pub weights: Vec<Real>,
}

fn legendre_with_derivative(n: usize, x: &Real) -> (Real, Real) {
    let p = x.prec();
    let mut p0 = Real::one(p);
    let mut p1 = x.clone();
    for k in 1..n {
        let kf = k as f64;
        let mut p2 = x * &p1 * (2.0 * kf + 1.0);
        p2.sub_mul(&p0, &Real::from_f64(kf, p));
        let p2 = p2 / (kf + 1.0);
        p0 = p1;
        p1 = p2;
    }
    let deriv = (x * &p1 - &p0) * (n as f64) / (x.square() - 1.0);
    (p1, deriv)
}

impl GaussLegendre {
    pub fn new(n: usize, prec: u32) -> GaussLegendre {
        assert!(n >= 1);
        let prec = clamp_prec(prec);
        let mut nodes = Vec::with_capacity(n);
        let mut weights = Vec::with_capacity(n);
        let tiny = Real::exp2i(-(prec as i32) + 4, prec);
        for i in 0..n.div_ceil(2) {
            let guess = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut x = Real::from_f64(guess, prec);
            let mut d = Real::one(prec);
            for _ in 0..60 {
                let (pn, dn) = legendre_with_derivative(n, &x);
                let step = &pn / &dn;
                x -= &step;
                d = dn;
                if step.abs() <= tiny {
                    let (_, dn) = legendre_with_derivative(n, &x);
                    d = dn;
                    break;
                }
            }
            let w = Real::from_f64(2.0, prec) / ((1.0 - x.square()) * d.square());
            nodes.push(x);
            weights.push(w);
        }
        let half = nodes.len();
        let mut all_nodes = Vec::with_capacity(n);
        let mut all_weights = Vec::with_capacity(n);
        for i in 0..half {
            all_nodes.push(nodes[i].clone());
            all_weights.push(weights[i].clone());
        }
        let mirror_from = if n % 2 == 1 { half - 1 } else { half };
        for i in (0..mirror_from).rev() {
            all_nodes.push(-&nodes[i]);
            all_weights.push(weights[i].clone());
        }
        if n % 2 == 1 {
            all_nodes[half - 1] = Real::zero(prec);
        }
        GaussLegendre { nodes: all_nodes, weights: all_weights }
    }

    fn apply<F: Fn(&Real) -> Complex>(&self, f: &F, mid: &Real, half: &Real) -> Complex {
        let p = mid.prec();
        let mut acc = Complex::zero(p);
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            let t = mid + &(half * x);
            let v = f(&t);
            acc.re.add_mul(&v.re, w);
            acc.im.add_mul(&v.im, w);
        }
        acc.scale(half)
    }
}

struct RulePair {
    low: GaussLegendre,
    high: GaussLegendre,
}

impl RulePair {
    fn new(opts: &QuadOptions) -> RulePair {
        let n = opts.low_order();
        RulePair { low: GaussLegendre::new(n, opts.prec), high: GaussLegendre::new(2 * n, opts.prec) }
    }

    fn evals(&self) -> usize {
        self.low.nodes.len() + self.high.nodes.len()
    }
}

struct Panel {
    a: Real,
    b: Real,
    value: Complex,
    err: Real,
}

fn eval_panel<F: Fn(&Real) -> Complex>(f: &F, rules: &RulePair, a: Real, b: Real) -> Panel {
    let mid = (&a + &b) / 2.0;
    let half = (&b - &a) / 2.0;
    let lo = rules.low.apply(f, &mid, &half);
    let hi = rules.high.apply(f, &mid, &half);
    let err = (&hi - &lo).abs();
    Panel { a, b, value: hi, err }
}

struct Adaptive {
    value: Complex,
    err: Real,
    l1: Real,
    evals: usize,
}

fn adaptive<F: Fn(&Real) -> Complex>(
    f: &F,
    a: &Real,
    b: &Real,
    rules: &RulePair,
    opts: &QuadOptions,
    abs_goal: Option<&Real>,
    budget: usize,
) -> Result<Adaptive> {
    let prec = opts.prec;
    let a = a.with_prec(prec);
    let b = b.with_prec(prec);
    let width = (&b - &a).abs().to_f64();
    let mut n0 = 1usize;
    if let Some(w) = opts.max_panel {
        if w > 0.0 {
            n0 = ((width / w).ceil() as usize).max(1);
        }
    }
    let step = (&b - &a) / (n0 as f64);
    let mut panels = Vec::with_capacity(n0 * 2);
    let mut evals = 0usize;
    for i in 0..n0 {
        let lo = &a + &(&step * (i as f64));
        let hi = if i + 1 == n0 { b.clone() } else { &a + &(&step * ((i + 1) as f64)) };
        panels.push(eval_panel(f, rules, lo, hi));
        evals += rules.evals();
    }
    let floor_factor = Real::exp2i(-(prec as i32) + 16, prec);
    loop {
        let mut total = Complex::zero(prec);
        let mut err = Real::zero(prec);
        let mut l1 = Real::zero(prec);
        let mut worst = 0usize;
        for (i, p) in panels.iter().enumerate() {
            total += &p.value;
            err += &p.err;
            l1 += &p.value.abs();
            if p.err > panels[worst].err {
                worst = i;
            }
        }
        let floor = &l1 * &floor_factor;
        let mut goal = total.abs() * opts.rel_tol;
        if let Some(g) = abs_goal {
            goal = goal.max(g);
        }
        let goal = goal.max(&floor);
        if err <= goal {
            return Ok(Adaptive { value: total, err: err + &floor, l1, evals });
        }
        if evals + 2 * rules.evals() > budget {
            return Err(Error::QuadratureBudget { budget, error: err.to_f64() });
        }
        let p = panels.swap_remove(worst);
        let mid = (&p.a + &p.b) / 2.0;
        panels.push(eval_panel(f, rules, p.a, mid.clone()));
        panels.push(eval_panel(f, rules, mid, p.b));
        evals += 2 * rules.evals();
    }
}

/// Integral of `f` over `[a, b]`.
pub fn quad_finite<F: Fn(&Real) -> Complex>(
    f: F,
    a: &Real,
    b: &Real,
    opts: &QuadOptions,
) -> Result<QuadratureResult> {
    let rules = RulePair::new(opts);
    let r = adaptive(&f, a, b, &rules, opts, None, opts.max_evals)?;
    Ok(QuadratureResult { value: r.value, error_estimate: r.err, evaluations: r.evals })
}

/// Real-valued convenience wrapper around [`quad_finite`].
pub fn quad_finite_real<F: Fn(&Real) -> Real>(
    f: F,
    a: &Real,
    b: &Real,
    opts: &QuadOptions,
) -> Result<(Real, Real)> {
    let r = quad_finite(|s| Complex::from_real(f(s)), a, b, opts)?;
    Ok((r.value.re, r.error_estimate))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Backward,
}

/// Integral of `f` from `start` to `+inf` (`Forward`) or `-inf` (`Backward`),
/// for integrands bounded by `K exp(-decay |s - start|)`. The truncation point
/// is chosen adaptively and its tail bound is folded into the error estimate.
pub fn quad_semi_infinite<F: Fn(&Real) -> Complex>(
    f: F,
    start: &Real,
    direction: Direction,
    decay: f64,
    opts: &QuadOptions,
) -> Result<QuadratureResult> {
    if !(decay > 0.0) {
        return Err(Error::InvalidParameter(format!("decay rate {decay} must be positive")));
    }
    let prec = opts.prec;
    let rules = RulePair::new(opts);
    let sign = match direction {
        Direction::Forward => 1.0,
        Direction::Backward => -1.0,
    };
    let chunk = 2.0 / decay;
    let start = start.with_prec(prec);
    let mut total = Complex::zero(prec);
    let mut err = Real::zero(prec);
    let mut evals = 0usize;
    let floor_factor = Real::exp2i(-(prec as i32) + 16, prec);
    let mut l1 = Real::zero(prec);
    let max_chunks = ((prec as f64) * 0.7 / 2.0).ceil() as usize + 64;
    for k in 0..max_chunks {
        let lo = &start + sign * chunk * k as f64;
        let hi = &start + sign * chunk * (k + 1) as f64;
        let (a, b) = if sign > 0.0 { (lo, hi) } else { (hi, lo) };
        let goal = (total.abs() * opts.rel_tol).max(&(&l1 * &floor_factor));
        let goal_ref = if k == 0 { None } else { Some(&goal) };
        let r = adaptive(&f, &a, &b, &rules, opts, goal_ref, opts.max_evals.saturating_sub(evals))?;
        evals += r.evals;
        total += &r.value;
        err += &r.err;
        l1 += &r.l1;
        // Sample the chunk to bound the constant K of the exponential envelope.
        let mut k_est = Real::zero(prec);
        let samples = 9;
        for j in 0..=samples {
            let s = &a + &((&b - &a) * (j as f64 / samples as f64));
            let dist = (&s - &start).abs();
            let bound = f(&s).abs() * (dist * decay).exp();
            k_est = k_est.max(&bound);
        }
        evals += samples + 1;
        let reach = chunk * (k + 1) as f64;
        let tail = k_est * 2.0 * Real::from_f64(-decay * reach, prec).exp() / decay;
        let goal = (total.abs() * opts.rel_tol).max(&(&l1 * &floor_factor));
        if tail <= goal {
            return Ok(QuadratureResult { value: total, error_estimate: err + &tail, evaluations: evals });
        }
    }
    Err(Error::NonConvergence { what: "semi-infinite truncation", iterations: max_chunks, residual: err.to_f64() })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nodes_are_exact_for_polynomials() {
        let g = GaussLegendre::new(7, 128);
        let mut s = Real::zero(128);
        for (x, w) in g.nodes.iter().zip(&g.weights) {
            s.add_mul(&x.powi(12), w);
        }
        let exact = 2.0 / 13.0;
        assert!((s.to_f64() - exact).abs() < 1e-30);
        let total: Real = g.weights.iter().cloned().sum();
        assert!((total.to_f64() - 2.0).abs() < 1e-30);
    }

    #[test]
    fn finite_integral_of_exp() {
        let opts = QuadOptions::new(192);
        let a = Real::zero(192);
        let b = Real::one(192);
        let (v, err) = quad_finite_real(|x| x.exp(), &a, &b, &opts).unwrap();
        let exact = Real::one(192).exp() - 1.0;
        let rel = ((&v - &exact) / &exact).abs();
        assert!(rel < 1e-50, "{rel:?}");
        assert!(err < 1e-45);
    }

    #[test]
    fn gaussian_on_half_line() {
        let p = 128;
        let opts = QuadOptions::new(p);
        let r = quad_semi_infinite(|s| Complex::from_real((-s.square()).exp()), &Real::zero(p), Direction::Forward, 1.0, &opts)
            .unwrap();
        let exact = Real::pi(p).sqrt() / 2.0;
        assert!(((&r.value.re - &exact) / &exact).abs() < 1e-32);
    }

    #[test]
    fn oscillatory_sech_transform() {
        let p = 128;
        let opts = QuadOptions::new(p).max_panel(0.5);
        let nu = 3.0;
        let f = |s: &Real| Complex::cis(&(s * nu)) * &s.cosh().recip();
        let fwd = quad_semi_infinite(f, &Real::zero(p), Direction::Forward, 1.0, &opts).unwrap();
        let bwd = quad_semi_infinite(f, &Real::zero(p), Direction::Backward, 1.0, &opts).unwrap();
        let total = &fwd.value + &bwd.value;
        let pi = Real::pi(p);
        let exact = &pi / (&pi * (nu / 2.0)).cosh();
        assert!(((&total.re - &exact) / &exact).abs() < 1e-28);
        assert!(total.im.abs() < 1e-30);
    }
}
