//! Taylor-series integrator for the forced pendulum and its linearization at
//! the origin, on raw MPFR values.

use rug::float::Constant;
use rug::ops::{AssignRound, NegAssign, Pow};
use rug::{Assign, Float};

use crate::error::{Error, Result};
use crate::model::{ForcingSpec, ModelSpec, Phase, Variant};
use crate::mpnum::Real;

/// Forcing phase `theta0 + omega t / eps` and its Taylor jets in `t`.
#[derive(Clone, Debug)]
pub(crate) enum ForcingJets {
    Sin { tau0: Float },
    Product { th1: Float, th2: Float, ch1: Float, ch2: Float, mean: Float },
    Spectrum { th1: Float, th2: Float, terms: Vec<((f64, f64), Float, Float)>, mean: Float },
}

impl ForcingJets {
    pub(crate) fn new(forcing: &ForcingSpec, phase: &Phase, prec: u32) -> Result<ForcingJets> {
        match (forcing, phase) {
            (ForcingSpec::PeriodicSin, Phase::Periodic(t)) => Ok(ForcingJets::Sin { tau0: Float::with_val(prec, &t.0) }),
            (ForcingSpec::Quasiperiodic(q), Phase::Torus(a, b)) => {
                let mean = if q.remove_mean {
                    Float::with_val(prec, &q.spectrum.get((0, 0)).re.0)
                } else {
                    Float::new(prec)
                };
                let th1 = Float::with_val(prec, &a.0);
                let th2 = Float::with_val(prec, &b.0);
                if q.product_form {
                    let ch1 = Float::with_val(prec, q.r1).cosh();
                    let ch2 = Float::with_val(prec, q.r2).cosh();
                    Ok(ForcingJets::Product { th1, th2, ch1, ch2, mean })
                } else {
                    let terms = q
                        .spectrum
                        .iter()
                        .map(|(&(k1, k2), c)| ((k1 as f64, k2 as f64), Float::with_val(prec, &c.re.0), Float::with_val(prec, &c.im.0)))
                        .collect();
                    let mean = if q.remove_mean { mean } else { Float::new(prec) };
                    Ok(ForcingJets::Spectrum { th1, th2, terms, mean })
                }
            }
            _ => Err(Error::InvalidParameter("phase kind does not match forcing".into())),
        }
    }
}

/// Jets of `cos(a0 + r t)`: `cos(a0 + k pi/2) r^k / k!`.
fn cos_jets(out: &mut [Float], a0: &Float, rate: &Float) {
    let (mut s, mut c) = (a0.clone(), Float::new(a0.prec()));
    s.sin_cos_mut(&mut c);
    let mut scale = Float::with_val(a0.prec(), 1);
    for (k, o) in out.iter_mut().enumerate() {
        match k % 4 {
            0 => o.assign(&c * &scale),
            1 => {
                o.assign(&s * &scale);
                o.neg_assign();
            }
            2 => {
                o.assign(&c * &scale);
                o.neg_assign();
            }
            _ => o.assign(&s * &scale),
        }
        scale *= rate;
        scale /= (k + 1) as u32;
    }
}

/// `out = num / den` as series.
fn quotient(out: &mut [Float], num: &[Float], den: &[Float], tmp: &mut Float) {
    for k in 0..out.len() {
        tmp.assign(&num[k]);
        for j in 1..=k {
            *tmp -= &den[j] * &out[k - j];
        }
        out[k].assign(&*tmp / &den[0]);
    }
}

struct ForcingScratch {
    f: Vec<Float>,
    wa: Vec<Float>,
    wb: Vec<Float>,
    wc: Vec<Float>,
    wd: Vec<Float>,
    qa: Vec<Float>,
    qb: Vec<Float>,
    tmp: Float,
}

/// Forcing jets at time `t` into `fs.f`.
fn forcing_jets(forcing: &ForcingJets, t: &Float, inv_eps: &Float, gamma_over_eps: &Float, fs: &mut ForcingScratch) {
    let n = fs.f.len();
    let prec = t.prec().max(inv_eps.prec());
    match forcing {
        ForcingJets::Sin { tau0 } => {
            let mut a = Float::with_val(prec, t * inv_eps);
            a += tau0;
            a -= Float::with_val(prec, Constant::Pi) / 2u32;
            cos_jets(&mut fs.f, &a, inv_eps);
        }
        ForcingJets::Product { th1, th2, ch1, ch2, mean } => {
            let a = Float::with_val(prec, t * inv_eps) + th1;
            let b = Float::with_val(prec, t * gamma_over_eps) + th2;
            cos_jets(&mut fs.wa, &a, inv_eps);
            cos_jets(&mut fs.wc, &b, gamma_over_eps);
            for k in 0..n {
                if k == 0 {
                    fs.wb[0].assign(ch1 - &fs.wa[0]);
                    fs.wd[0].assign(ch2 - &fs.wc[0]);
                } else {
                    fs.wb[k].assign(-&fs.wa[k]);
                    fs.wd[k].assign(-&fs.wc[k]);
                }
            }
            quotient(&mut fs.qa, &fs.wa, &fs.wb, &mut fs.tmp);
            quotient(&mut fs.qb, &fs.wc, &fs.wd, &mut fs.tmp);
            for k in 0..n {
                fs.f[k].assign(0);
                for j in 0..=k {
                    fs.f[k] += &fs.qa[j] * &fs.qb[k - j];
                }
            }
            fs.f[0] -= mean;
        }
        ForcingJets::Spectrum { th1, th2, terms, mean } => {
            for v in fs.f.iter_mut() {
                v.assign(0);
            }
            let a = Float::with_val(prec, t * inv_eps) + th1;
            let b = Float::with_val(prec, t * gamma_over_eps) + th2;
            let mut arg = Float::new(prec);
            let mut nu = Float::new(prec);
            for ((k1, k2), re, im) in terms {
                arg.assign(&a * *k1);
                arg += Float::with_val(prec, &b * *k2);
                nu.assign(inv_eps * *k1);
                nu += Float::with_val(prec, gamma_over_eps * *k2);
                // Re[(re + i im) exp(i arg)] has the jets of re cos - im sin.
                cos_jets(&mut fs.wa, &arg, &nu);
                let shifted = Float::with_val(prec, &arg + Float::with_val(prec, Constant::Pi) / 2u32);
                cos_jets(&mut fs.wb, &shifted, &nu);
                for k in 0..n {
                    fs.f[k] += &fs.wa[k] * re;
                    fs.f[k] += &fs.wb[k] * im;
                }
            }
            fs.f[0] -= mean;
        }
    }
}


/// At least the order whose last term at the ceiling step, `(pi/25)^k/k!`, is
/// below the local tolerance, and near `ln(1/tol)/2`, which balances the
/// quadratic cost per step against the step length.
fn series_order(prec: u32) -> usize {
    let balanced = ((prec as f64 * std::f64::consts::LN_2 / 2.0) as usize).min(80);
    ceiling_order(prec).max(balanced)
}

fn ceiling_order(prec: u32) -> usize {
    let goal = (12.0 - prec as f64) * std::f64::consts::LN_2 - 3.0 * std::f64::consts::LN_10;
    let r = (std::f64::consts::PI / 25.0).ln();
    let mut log_term = 0.0;
    for k in 1..=80usize {
        log_term += r - (k as f64).ln();
        if k >= 12 && log_term < goal {
            return k;
        }
    }
    80
}

pub(crate) struct Integrator {
    pub prec: u32,
    pub order: usize,
    inv_eps: Float,
    gamma_over_eps: Float,
    /// `mu eps^eta`.
    strength: Float,
    alpha: Float,
    variant: Variant,
    forcing: ForcingJets,
    /// Largest step, `2 pi eps / 50`.
    ceiling: Float,
    /// Relative local tolerance.
    tol: Float,
    x: Vec<Float>,
    y: Vec<Float>,
    s: Vec<Float>,
    c: Vec<Float>,
    d: Vec<Float>,
    e: Vec<Float>,
    h: Vec<Float>,
    fs: ForcingScratch,
    tmp: Float,
    pub steps: usize,
}

#[derive(Clone, Debug)]
pub(crate) struct Crossing {
    pub t: Float,
    pub y: Float,
    pub error: f64,
    pub steps: usize,
}

impl Integrator {
    pub(crate) fn new(spec: &ModelSpec, phase: &Phase, prec: u32) -> Result<Integrator> {
        let order = series_order(prec);
        let z = || vec![Float::new(prec); order + 1];
        let eps = Float::with_val(prec, &spec.epsilon.0);
        let inv_eps = Float::with_val(prec, eps.recip_ref());
        let gamma = (Float::with_val(prec, 5).sqrt() + 1u32) / 2u32;
        let gamma_over_eps = Float::with_val(prec, &gamma * &inv_eps);
        let strength = Float::with_val(prec, &spec.strength().0);
        let pi = Float::with_val(prec, Constant::Pi);
        let ceiling = Float::with_val(prec, &pi * &eps) / 25u32;
        let tol = Float::with_val(prec, Float::i_exp(1, 12 - prec as i32));
        Ok(Integrator {
            prec,
            order,
            inv_eps,
            gamma_over_eps,
            strength,
            alpha: Float::with_val(prec, &spec.alpha.0),
            variant: spec.variant,
            forcing: ForcingJets::new(&spec.forcing, phase, prec)?,
            ceiling,
            tol,
            x: z(),
            y: z(),
            s: z(),
            c: z(),
            d: z(),
            e: z(),
            h: z(),
            fs: ForcingScratch { f: z(), wa: z(), wb: z(), wc: z(), wd: z(), qa: z(), qb: z(), tmp: Float::new(prec) },
            tmp: Float::new(prec),
            steps: 0,
        })
    }

    /// Taylor coefficients of the solution through `(t, x0, y0)`.
    fn jets(&mut self, t: &Float, x0: &Float, y0: &Float) {
        let n = self.order;
        let forced = !self.strength.is_zero();
        if forced {
            forcing_jets(&self.forcing, t, &self.inv_eps, &self.gamma_over_eps, &mut self.fs);
        }
        self.x[0].assign(x0);
        self.y[0].assign(y0);
        for k in 0..n {
            if k == 0 {
                let (s0, c0) = (&mut self.s[0], &mut self.c[0]);
                s0.assign(x0);
                s0.sin_cos_mut(c0);
            } else {
                // j x_j = y_{j-1}
                self.tmp.assign(0);
                for j in 1..=k {
                    self.tmp += &self.y[j - 1] * &self.c[k - j];
                }
                self.s[k].assign(&self.tmp / k as u32);
                self.tmp.assign(0);
                for j in 1..=k {
                    self.tmp -= &self.y[j - 1] * &self.s[k - j];
                }
                self.c[k].assign(&self.tmp / k as u32);
            }
            self.tmp.assign(&self.s[k]);
            if forced {
                match self.variant {
                    Variant::Standard => self.d[k].assign(&self.alpha * &self.s[k]),
                    Variant::Alternative => {
                        self.d[k].assign(&self.alpha * &self.c[k]);
                        self.d[k].neg_assign();
                    }
                }
                if k == 0 {
                    self.d[0] += 1u32;
                }
                self.e[k].assign(0);
                for j in 0..=k {
                    self.e[k] += &self.d[j] * &self.d[k - j];
                }
                let mut hk = Float::with_val(self.prec, &self.s[k]);
                for j in 1..=k {
                    hk -= &self.e[j] * &self.h[k - j];
                }
                self.h[k].assign(&hk / &self.e[0]);
                let mut hf = Float::new(self.prec);
                for j in 0..=k {
                    hf += &self.h[j] * &self.fs.f[k - j];
                }
                self.tmp += &self.strength * &hf;
            }
            let k1 = (k + 1) as u32;
            let nx = Float::with_val(self.prec, &self.y[k] / k1);
            self.x[k + 1].assign(nx);
            let ny = Float::with_val(self.prec, &self.tmp / k1);
            self.y[k + 1].assign(ny);
        }
    }

    fn step_size(&self, x: &[Float], y: &[Float], scale: &Float) -> Float {
        let n = self.order;
        let mut h = self.ceiling.clone();
        let goal = Float::with_val(self.prec, &self.tol * scale);
        for k in [n - 1, n] {
            let m = Float::with_val(self.prec, x[k].abs_ref()).max(&Float::with_val(self.prec, y[k].abs_ref()));
            if m.is_zero() {
                continue;
            }
            let r = Float::with_val(self.prec, &goal / &m);
            let hk = r.root(k as u32) * 0.9f64;
            if hk < h {
                h = hk;
            }
        }
        h
    }

    fn eval_poly(c: &[Float], s: &Float, out: &mut Float) {
        out.assign(&c[c.len() - 1]);
        for k in (0..c.len() - 1).rev() {
            *out *= s;
            *out += &c[k];
        }
    }

    fn eval_dpoly(c: &[Float], s: &Float, out: &mut Float) {
        let n = c.len() - 1;
        out.assign(&c[n] * n as u32);
        for k in (1..n).rev() {
            *out *= s;
            *out += Float::with_val(out.prec(), &c[k] * k as u32);
        }
    }

    /// Integrates from `(t, x, y)` in direction `dir` (+1 or -1) until `x`
    /// crosses `target`.
    pub(crate) fn to_section(
        &mut self,
        t: &Float,
        x: &Float,
        y: &Float,
        dir: i32,
        target: &Float,
        t_max: f64,
    ) -> Result<Crossing> {
        let mut t = t.clone();
        let mut x = x.clone();
        let mut y = y.clone();
        let mut err = 0.0f64;
        let start_steps = self.steps;
        let start_side = Float::with_val(self.prec, &x - target).is_sign_negative();
        let mut nx = Float::new(self.prec);
        let mut ny = Float::new(self.prec);
        let t0 = t.to_f64();
        loop {
            self.jets(&t, &x, &y);
            let scale = Float::with_val(self.prec, x.abs_ref()).max(&Float::with_val(self.prec, y.abs_ref()));
            let scale = scale.max(&Float::with_val(self.prec, Float::i_exp(1, -(self.prec as i32))));
            let mut h = self.step_size(&self.x, &self.y, &scale);
            if dir < 0 {
                h = -h;
            }
            Self::eval_poly(&self.x, &h, &mut nx);
            Self::eval_poly(&self.y, &h, &mut ny);
            let last = Float::with_val(self.prec, self.x[self.order].abs_ref()).max(&Float::with_val(self.prec, self.y[self.order].abs_ref()));
            let local = (last * Float::with_val(self.prec, h.abs_ref()).pow(self.order as u32)).to_f64();
            self.steps += 1;
            let crossed = Float::with_val(self.prec, &nx - target).is_sign_negative() != start_side;
            if crossed {
                // Newton on the step polynomial, started from linear interpolation.
                let dx0 = Float::with_val(self.prec, target - &x);
                let dx1 = Float::with_val(self.prec, &nx - &x);
                let mut s = Float::with_val(self.prec, &h * &dx0) / &dx1;
                let mut p = Float::new(self.prec);
                let mut dp = Float::new(self.prec);
                for _ in 0..60 {
                    Self::eval_poly(&self.x, &s, &mut p);
                    p -= target;
                    Self::eval_dpoly(&self.x, &s, &mut dp);
                    let ds = Float::with_val(self.prec, &p / &dp);
                    s -= &ds;
                    let small = ds.is_zero() || ds.clone().abs() < Float::with_val(self.prec, Float::i_exp(1, 4 - self.prec as i32)) * Float::with_val(self.prec, h.abs_ref());
                    if small {
                        break;
                    }
                }
                Self::eval_poly(&self.y, &s, &mut ny);
                t += &s;
                return Ok(Crossing { t, y: ny, error: err + local, steps: self.steps - start_steps });
            }
            err += local;
            t += &h;
            x.assign(&nx);
            y.assign(&ny);
            let energy = {
                let yy = Float::with_val(self.prec, y.square_ref()) / 2u32;
                (yy + Float::with_val(self.prec, x.cos_ref()) - 1u32).to_f64()
            };
            let elapsed = (t.to_f64() - t0).abs();
            if energy.abs() > 0.5 || !x.is_finite() || x.to_f64().abs() > 8.0 {
                return Err(Error::Escaped { time: elapsed, energy });
            }
            if elapsed > t_max {
                return Err(Error::SectionNotReached(elapsed));
            }
        }
    }

    /// Integrates for a fixed duration (sign gives the direction).
    pub(crate) fn flow(&mut self, t: &Float, x: &Float, y: &Float, duration: &Float) -> (Float, Float, Float, f64) {
        let mut t = t.clone();
        let mut x = x.clone();
        let mut y = y.clone();
        let end = Float::with_val(self.prec, &t + duration);
        let dir = if duration.is_sign_negative() { -1 } else { 1 };
        let mut err = 0.0;
        let mut nx = Float::new(self.prec);
        let mut ny = Float::new(self.prec);
        loop {
            let remaining = Float::with_val(self.prec, &end - &t);
            if remaining.is_zero() || remaining.is_sign_negative() != (dir < 0) {
                break;
            }
            self.jets(&t, &x, &y);
            let scale = Float::with_val(self.prec, x.abs_ref()).max(&Float::with_val(self.prec, y.abs_ref()));
            let scale = scale.max(&Float::with_val(self.prec, Float::i_exp(1, -(self.prec as i32))));
            let mut h = self.step_size(&self.x, &self.y, &scale);
            if h >= Float::with_val(self.prec, remaining.abs_ref()) {
                h = Float::with_val(self.prec, remaining.abs_ref());
            }
            if dir < 0 {
                h = -h;
            }
            Self::eval_poly(&self.x, &h, &mut nx);
            Self::eval_poly(&self.y, &h, &mut ny);
            let last = Float::with_val(self.prec, self.x[self.order].abs_ref()).max(&Float::with_val(self.prec, self.y[self.order].abs_ref()));
            err += (last * Float::with_val(self.prec, h.abs_ref()).pow(self.order as u32)).to_f64();
            self.steps += 1;
            t += &h;
            x.assign(&nx);
            y.assign(&ny);
        }
        (t, x, y, err)
    }

    /// Fundamental matrix of `p' = q, q' = (1 + m h'(0) f(t)) p` from `t` over
    /// `duration`, column-major `[[p1, q1], [p2, q2]]`.
    pub(crate) fn linear_flow(&mut self, t: &Float, duration: &Float) -> [[Float; 2]; 2] {
        let p = self.prec;
        let n = ceiling_order(p).min(self.order);
        let slope = match self.variant {
            Variant::Standard => Float::with_val(p, 1),
            Variant::Alternative => {
                let one_minus = Float::with_val(p, 1u32 - &self.alpha);
                Float::with_val(p, one_minus.square_ref()).recip()
            }
        };
        let gain = Float::with_val(p, &self.strength * &slope);
        let forced = !gain.is_zero();
        let mut t = t.clone();
        let end = Float::with_val(p, &t + duration);
        let dir = if duration.is_sign_negative() { -1 } else { 1 };
        let mut cols = [[Float::with_val(p, 1), Float::new(p)], [Float::new(p), Float::with_val(p, 1)]];
        let mut a = vec![Float::new(p); n + 1];
        let mut pj = vec![Float::new(p); n + 1];
        let mut qj = vec![Float::new(p); n + 1];
        let mut acc = Float::new(p);
        loop {
            let remaining = Float::with_val(p, &end - &t);
            if remaining.is_zero() || remaining.is_sign_negative() != (dir < 0) {
                break;
            }
            if forced {
                forcing_jets(&self.forcing, &t, &self.inv_eps, &self.gamma_over_eps, &mut self.fs);
            }
            for k in 0..=n {
                if forced {
                    a[k].assign(&gain * &self.fs.f[k]);
                } else {
                    a[k].assign(0);
                }
            }
            a[0] += 1u32;
            let mut h = self.ceiling.clone();
            if h >= Float::with_val(p, remaining.abs_ref()) {
                h = Float::with_val(p, remaining.abs_ref());
            }
            if dir < 0 {
                h = -h;
            }
            for col in cols.iter_mut() {
                pj[0].assign(&col[0]);
                qj[0].assign(&col[1]);
                for k in 0..n {
                    let np = Float::with_val(p, &qj[k] / (k + 1) as u32);
                    pj[k + 1].assign(np);
                    acc.assign(0);
                    for j in 0..=k {
                        acc += &a[j] * &pj[k - j];
                    }
                    let nq = Float::with_val(p, &acc / (k + 1) as u32);
                    qj[k + 1].assign(nq);
                }
                Self::eval_poly(&pj, &h, &mut col[0]);
                Self::eval_poly(&qj, &h, &mut col[1]);
            }
            self.steps += 1;
            t += &h;
        }
        cols
    }
}

pub(crate) fn to_real(f: &Float) -> Real {
    Real(f.clone())
}

pub(crate) fn from_real(r: &Real, prec: u32) -> Float {
    let mut f = Float::new(prec);
    f.assign_round(&r.0, rug::float::Round::Nearest);
    f
}
