//! Direct computation of the perturbed invariant manifolds: Floquet-seeded
//! local manifolds, high-order integration to a section, and the splitting
//! profile measured there.

mod taylor;

use rayon::prelude::*;
use rug::Float;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::melnikov::qp::QpSeries;
use crate::melnikov::{classify_regime, melnikov_residue, ForcingCase, PoleSet, Regime, Side};
use crate::model::{coupling, separatrix, ForcingSpec, ModelSpec, Phase, DEFAULT_GUARD_CEILING};
use crate::mpnum::{cancellation_prec, Real};
use crate::singular::solve_singularities;
use taylor::{from_real, to_real, Integrator};

/// Order of the leading seed error in the offset, used by the Richardson step.
pub const RICHARDSON_ORDER: i32 = 2;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Section {
    /// `x = pi`, `u = 0`.
    Pi,
    /// `x = 3 pi/2`, `u = ln(1 + sqrt 2)`.
    ThreePiHalves,
}

impl Section {
    pub fn x(&self, prec: u32) -> Real {
        match self {
            Section::Pi => Real::pi(prec),
            Section::ThreePiHalves => Real::pi(prec) * 1.5,
        }
    }

    /// Separatrix parameter of the section.
    pub fn u(&self, prec: u32) -> Real {
        match self {
            Section::Pi => Real::zero(prec),
            Section::ThreePiHalves => (Real::from_f64(2.0, prec).sqrt() + 1.0).ln(),
        }
    }

    /// `x = 3 pi/2` for the narrow regimes, `x = pi` otherwise.
    pub fn for_model(spec: &ModelSpec) -> Section {
        let case = match spec.forcing {
            ForcingSpec::PeriodicSin => ForcingCase::Periodic,
            ForcingSpec::Quasiperiodic(_) => ForcingCase::Quasiperiodic,
        };
        match classify_regime(spec.epsilon.to_f64(), spec.alpha.to_f64(), case).regime {
            Regime::NarrowExp { .. } | Regime::NarrowPoly { .. } => Section::ThreePiHalves,
            _ => Section::Pi,
        }
    }
}

impl std::str::FromStr for Section {
    type Err = Error;
    fn from_str(s: &str) -> Result<Section> {
        match s.to_ascii_lowercase().as_str() {
            "pi" => Ok(Section::Pi),
            "3pi2" | "3pi/2" => Ok(Section::ThreePiHalves),
            other => Err(Error::Parse(format!("unknown section `{other}`"))),
        }
    }
}

#[derive(Clone, Debug)]
pub struct Floquet {
    /// Columns are the images of the unit vectors.
    pub monodromy: [[Real; 2]; 2],
    pub unstable_eigenvalue: Real,
    pub stable_eigenvalue: Real,
    /// Unit eigenvector with positive `x` and `y`.
    pub unstable: (Real, Real),
    /// Unit eigenvector with negative `x` and positive `y`.
    pub stable: (Real, Real),
    pub determinant: Real,
}

fn normalize(v: (Real, Real), sx: f64, sy: f64) -> (Real, Real) {
    let n = (v.0.square() + &v.1.square()).sqrt();
    let (mut a, mut b) = (v.0 / &n, v.1 / &n);
    if (a.to_f64() * sx) < 0.0 || (a.is_zero() && b.to_f64() * sy < 0.0) {
        a = -a;
        b = -b;
    }
    (a, b)
}

fn require_periodic(spec: &ModelSpec) -> Result<()> {
    match spec.forcing {
        ForcingSpec::PeriodicSin => Ok(()),
        _ => Err(Error::InvalidParameter("periodic forcing required".into())),
    }
}

/// Monodromy of the linearization at the origin over `[0, 2 pi eps]`
/// starting at forcing phase `tau0`.
pub fn monodromy_floquet_at(spec: &ModelSpec, tau0: &Real, prec: u32) -> Result<Floquet> {
    require_periodic(spec)?;
    let mut integ = Integrator::new(spec, &Phase::Periodic(tau0.with_prec(prec)), prec)?;
    let period = Float::with_val(prec, &(Real::pi(prec) * 2.0 * &spec.epsilon.with_prec(prec)).0);
    let cols = integ.linear_flow(&Float::new(prec), &period);
    let a = to_real(&cols[0][0]);
    let c = to_real(&cols[0][1]);
    let b = to_real(&cols[1][0]);
    let d = to_real(&cols[1][1]);
    let tr = &a + &d;
    let det = &a * &d - &(&b * &c);
    let disc = tr.square() - &(&det * 4.0);
    if !(disc > 0.0) {
        return Err(Error::NotHyperbolic(format!("monodromy discriminant {:e}", disc.to_f64())));
    }
    let root = disc.sqrt();
    let lu = (&tr + &root) / 2.0;
    let ls = (&tr - &root) / 2.0;
    let vec_for = |l: &Real| {
        if b.abs() > c.abs() {
            (b.clone(), l - &a)
        } else {
            (l - &d, c.clone())
        }
    };
    let unstable = normalize(vec_for(&lu), 1.0, 1.0);
    let stable = normalize(vec_for(&ls), -1.0, 1.0);
    Ok(Floquet { monodromy: [[a, c], [b, d]], unstable_eigenvalue: lu, stable_eigenvalue: ls, unstable, stable, determinant: det })
}

pub fn monodromy_floquet(spec: &ModelSpec) -> Result<Floquet> {
    monodromy_floquet_at(spec, &Real::zero(spec.prec), spec.prec)
}

#[derive(Clone, Debug)]
pub struct ManifoldSeed {
    pub side: Side,
    /// Forcing phase at the seed time `t = 0`.
    pub base_phase: Phase,
    pub offset: Real,
    /// Unit vector at the origin; the stable seed sits at `(2 pi, 0)` and is
    /// integrated in the shifted coordinate `x - 2 pi`.
    pub direction: (Real, Real),
}

/// Pushforward window for the quasiperiodic seed direction.
fn pushforward_window(strength: f64, offset: f64) -> f64 {
    if strength == 0.0 {
        return 2.0;
    }
    let target = 1e-16f64;
    (0.5 * (strength * offset * offset / target).ln()).clamp(2.0, 20.0)
}

impl ManifoldSeed {
    pub fn periodic(spec: &ModelSpec, side: Side, tau0: &Real, offset: &Real) -> Result<ManifoldSeed> {
        let prec = offset.prec();
        let fl = monodromy_floquet_at(spec, tau0, prec)?;
        let direction = match side {
            Side::Unstable => fl.unstable,
            Side::Stable => fl.stable,
        };
        Ok(ManifoldSeed { side, base_phase: Phase::Periodic(tau0.with_prec(prec)), offset: offset.clone(), direction })
    }

    /// Direction from the linearized flow over a window before (unstable) or
    /// after (stable) the seed time, started from `(1, +-1)/sqrt 2`.
    pub fn quasiperiodic(spec: &ModelSpec, side: Side, th1: &Real, th2: &Real, offset: &Real) -> Result<ManifoldSeed> {
        let prec = offset.prec();
        let phase = Phase::Torus(th1.with_prec(prec), th2.with_prec(prec));
        let window = pushforward_window(spec.strength().to_f64(), offset.to_f64());
        let mut integ = Integrator::new(spec, &phase, prec)?;
        let (start, dur, v0) = match side {
            Side::Unstable => (-window, window, (1.0, 1.0)),
            Side::Stable => (window, -window, (-1.0, 1.0)),
        };
        let cols = integ.linear_flow(&Float::with_val(prec, start), &Float::with_val(prec, dur));
        let x = Float::with_val(prec, &cols[0][0] * v0.0) + Float::with_val(prec, &cols[1][0] * v0.1);
        let y = Float::with_val(prec, &cols[0][1] * v0.0) + Float::with_val(prec, &cols[1][1] * v0.1);
        let direction = normalize((to_real(&x), to_real(&y)), v0.0, 1.0);
        Ok(ManifoldSeed { side, base_phase: phase, offset: offset.clone(), direction })
    }
}

#[derive(Clone, Debug)]
pub struct SectionCrossing {
    pub section_x: Real,
    pub y_at_crossing: Real,
    pub phase_at_crossing: Phase,
    pub time: Real,
    pub integration_error: Real,
    pub steps: usize,
}

fn advance_phase(phase: &Phase, t: &Real, eps: &Real) -> Phase {
    let p = t.prec();
    let two_pi = Real::pi(p) * 2.0;
    let s = t / eps;
    match phase {
        Phase::Periodic(tau) => Phase::Periodic((tau + &s).rem_euclid(&two_pi)),
        Phase::Torus(a, b) => {
            let g = crate::model::golden_mean(p);
            Phase::Torus((a + &s).rem_euclid(&two_pi), (b + &(&g * &s)).rem_euclid(&two_pi))
        }
    }
}

/// Integrates a seed to the section `x = section_x` (unstable forward, stable
/// backward in the shifted coordinate).
pub fn shoot_to_x(seed: &ManifoldSeed, spec: &ModelSpec, section_x: &Real) -> Result<SectionCrossing> {
    if !spec.mu.is_zero() {
        spec.check_guard(DEFAULT_GUARD_CEILING)?;
    }
    let prec = seed.offset.prec();
    let mut integ = Integrator::new(spec, &seed.base_phase, prec)?;
    let x0 = from_real(&(&seed.offset * &seed.direction.0), prec);
    let y0 = from_real(&(&seed.offset * &seed.direction.1), prec);
    let (dir, target) = match seed.side {
        Side::Unstable => (1, section_x.with_prec(prec)),
        Side::Stable => (-1, section_x.with_prec(prec) - &(Real::pi(prec) * 2.0)),
    };
    let t_max = 60.0 + 2.0 * (1.0 / seed.offset.to_f64().abs()).ln();
    let c = integ.to_section(&Float::new(prec), &x0, &y0, dir, &from_real(&target, prec), t_max)?;
    let t = to_real(&c.t);
    Ok(SectionCrossing {
        section_x: section_x.clone(),
        y_at_crossing: to_real(&c.y),
        phase_at_crossing: advance_phase(&seed.base_phase, &t, &spec.epsilon),
        time: t,
        integration_error: Real::from_f64(c.error, prec),
        steps: c.steps,
    })
}

pub fn shoot_to_section(seed: &ManifoldSeed, spec: &ModelSpec, section: Section) -> Result<SectionCrossing> {
    shoot_to_x(seed, spec, &section.x(seed.offset.prec()))
}

/// Shoots repeatedly, shifting the seed phase until the crossing phase equals
/// `target` to `2^(-prec/3)`.
pub fn shoot_targeted(spec: &ModelSpec, side: Side, target: &Phase, offset: &Real, section_x: &Real) -> Result<SectionCrossing> {
    shoot_targeted_from(spec, side, target, offset, section_x, &Real::zero(offset.prec()))
}

fn phase_distance(a: &Phase, b: &Phase) -> f64 {
    let wrap = |d: f64| {
        let t = d.rem_euclid(std::f64::consts::TAU);
        t.min(std::f64::consts::TAU - t)
    };
    match (a, b) {
        (Phase::Periodic(x), Phase::Periodic(y)) => wrap((x - y).to_f64()),
        (Phase::Torus(x1, x2), Phase::Torus(y1, y2)) => wrap((x1 - y1).to_f64()).max(wrap((x2 - y2).to_f64())),
        _ => f64::INFINITY,
    }
}

/// As [`shoot_targeted`], starting from a guess of the crossing time. The seed
/// direction is kept once the seed phase moves by less than `1e-6`.
pub fn shoot_targeted_from(
    spec: &ModelSpec,
    side: Side,
    target: &Phase,
    offset: &Real,
    section_x: &Real,
    guess: &Real,
) -> Result<SectionCrossing> {
    let prec = offset.prec();
    let eps = spec.epsilon.with_prec(prec);
    let tol = Real::exp2i(-((prec / 3) as i32), prec).to_f64();
    let mut time = guess.with_prec(prec);
    let mut seed: Option<ManifoldSeed> = None;
    let mut change = f64::INFINITY;
    for _ in 0..12 {
        let base = advance_phase(target, &(-&time), &eps);
        let reuse = seed.as_ref().map(|s| phase_distance(&s.base_phase, &base) < 1e-6).unwrap_or(false);
        let next = match (&base, reuse) {
            (_, true) => {
                let old = seed.take().unwrap();
                ManifoldSeed { base_phase: base, ..old }
            }
            (Phase::Periodic(t0), false) => ManifoldSeed::periodic(spec, side, t0, offset)?,
            (Phase::Torus(a, b), false) => ManifoldSeed::quasiperiodic(spec, side, a, b, offset)?,
        };
        let c = shoot_to_x(&next, spec, section_x)?;
        seed = Some(next);
        change = (&c.time - &time).abs().to_f64() / eps.to_f64();
        time = c.time.clone();
        if change < tol {
            return Ok(c);
        }
    }
    Err(Error::NonConvergence { what: "crossing phase targeting", iterations: 12, residual: change })
}

#[derive(Clone, Debug, Serialize)]
pub struct ProfileSample {
    #[serde(skip)]
    pub phase: Phase,
    #[serde(skip)]
    pub d: Real,
    #[serde(skip)]
    pub error: Real,
}

#[derive(Clone, Debug)]
pub struct SplittingProfile {
    pub section: Section,
    pub samples: Vec<ProfileSample>,
    /// First trigonometric harmonic (periodic) or dominant torus harmonic (quasiperiodic).
    pub fitted_amplitude: Real,
    /// Phase `phi` in `d = A sin(tau + phi)`; for the torus, `arg` of the dominant coefficient.
    pub fitted_phase: Real,
    pub residual: Real,
    pub noise_floor: Real,
    pub resolved: bool,
    pub dominant_harmonic: Option<(i64, i64)>,
    pub sup_abs: Real,
    pub offsets: (Real, Real),
    pub prec: u32,
}

impl SplittingProfile {
    /// `phase, d, error` columns as decimal strings (two phase columns on the torus).
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let torus = matches!(self.samples.first().map(|s| &s.phase), Some(Phase::Torus(..)));
        out.push_str(if torus { "theta1,theta2,d,error\n" } else { "phase,d,error\n" });
        for s in &self.samples {
            match &s.phase {
                Phase::Periodic(t) => out.push_str(&format!("{},{},{}\n", t.to_decimal_digits(20), s.d.to_decimal_digits(20), s.error.to_decimal_digits(6))),
                Phase::Torus(a, b) => out.push_str(&format!(
                    "{},{},{},{}\n",
                    a.to_decimal_digits(20),
                    b.to_decimal_digits(20),
                    s.d.to_decimal_digits(20),
                    s.error.to_decimal_digits(6)
                )),
            }
        }
        out
    }

    /// The amplitude, or the noise floor when unresolved.
    pub fn reported_amplitude(&self) -> &Real {
        if self.resolved {
            &self.fitted_amplitude
        } else {
            &self.noise_floor
        }
    }
}

/// Predicted size of `d` from the Melnikov function.
fn predicted_splitting(spec: &ModelSpec) -> Result<f64> {
    let m = spec.strength().to_f64().abs();
    let size = match &spec.forcing {
        ForcingSpec::PeriodicSin => melnikov_residue(&spec.at_prec(spec.prec.max(64)), PoleSet::Complete)?.amplitude.to_f64(),
        ForcingSpec::Quasiperiodic(_) => QpSeries::new(&spec.at_prec(spec.prec.max(64)), None)?.sup(64)?.value.to_f64(),
    };
    Ok(m * size / 2.0)
}

fn working_prec(spec: &ModelSpec, predicted: f64) -> Result<u32> {
    let eps = spec.epsilon.to_f64();
    let rate = if predicted > 0.0 && spec.strength().to_f64() != 0.0 {
        // Rate whose exp(-rate/eps) matches the predicted relative size.
        (-(predicted / spec.strength().to_f64().abs()).ln()).max(0.0) * eps
    } else if spec.alpha.is_zero() {
        std::f64::consts::FRAC_PI_2
    } else {
        solve_singularities(&spec.alpha, spec.variant)?.rate().to_f64()
    };
    Ok(cancellation_prec(rate, eps, spec.prec))
}

fn default_offset(predicted: f64, prec: u32) -> f64 {
    let floor = 2f64.powi(-((prec / 3) as i32));
    if predicted > 0.0 {
        (0.01 * predicted).sqrt().clamp(floor, 1e-2)
    } else {
        1e-4f64.max(floor)
    }
}

fn richardson(fine: &Real, coarse: &Real, order: i32) -> Real {
    let w = 2f64.powi(order);
    (fine * w - coarse) / (w - 1.0)
}

/// Trigonometric least squares of degree `deg`: coefficients
/// `[a0, a1, b1, ..., a_deg, b_deg]` of `a0 + sum a_k cos k t + b_k sin k t`.
fn trig_fit(points: &[(Real, Real)], deg: usize) -> Result<(Vec<Real>, Real)> {
    let n = 2 * deg + 1;
    if points.len() < n {
        return Err(Error::InvalidParameter(format!("{} samples cannot fit degree {deg}", points.len())));
    }
    let prec = points[0].1.prec();
    let basis = |t: &Real| {
        let mut row = vec![Real::one(prec)];
        for k in 1..=deg {
            let (s, c) = (t * k as f64).sin_cos();
            row.push(c);
            row.push(s);
        }
        row
    };
    let rows: Vec<Vec<Real>> = points.iter().map(|(t, _)| basis(t)).collect();
    let mut ata = vec![vec![Real::zero(prec); n]; n];
    let mut atb = vec![Real::zero(prec); n];
    for (row, (_, y)) in rows.iter().zip(points) {
        for i in 0..n {
            atb[i].add_mul(&row[i], y);
            for j in 0..n {
                ata[i][j].add_mul(&row[i], &row[j]);
            }
        }
    }
    let coef = solve_dense(ata, atb)?;
    let mut rss = Real::zero(prec);
    for (row, (_, y)) in rows.iter().zip(points) {
        let mut v = y.clone();
        for (c, b) in coef.iter().zip(row) {
            v.sub_mul(c, b);
        }
        rss.add_mul(&v, &v);
    }
    let rms = (rss / points.len() as f64).sqrt();
    Ok((coef, rms))
}

fn trig_eval(coef: &[Real], t: &Real) -> Real {
    let mut v = coef[0].clone();
    for k in 1..=(coef.len() - 1) / 2 {
        let (s, c) = (t * k as f64).sin_cos();
        v.add_mul(&coef[2 * k - 1], &c);
        v.add_mul(&coef[2 * k], &s);
    }
    v
}

/// Gaussian elimination with partial pivoting.
fn solve_dense(mut a: Vec<Vec<Real>>, mut b: Vec<Real>) -> Result<Vec<Real>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().partial_cmp(&a[j][col].abs()).unwrap()).unwrap();
        if a[piv][col].is_zero() {
            return Err(Error::NonConvergence { what: "singular least-squares system", iterations: col, residual: 0.0 });
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for r in col + 1..n {
            let f = &a[r][col] / &a[col][col];
            for c in col..n {
                let v = &f * &a[col][c];
                a[r][c] -= &v;
            }
            let v = &f * &b[col];
            b[r] -= &v;
        }
    }
    let mut x = vec![Real::zero(b[0].prec()); n];
    for r in (0..n).rev() {
        let mut v = b[r].clone();
        for c in r + 1..n {
            v.sub_mul(&a[r][c], &x[c]);
        }
        x[r] = v / &a[r][r];
    }
    Ok(x)
}

/// Options for [`splitting_profile_periodic_with`].
#[derive(Clone, Debug)]
pub struct ProfileOptions {
    pub n_phases: usize,
    /// Largest seed offset; the second is half of it.
    pub offset: Option<f64>,
    pub prec: Option<u32>,
    pub fit_degree: usize,
    pub richardson_order: i32,
}

impl ProfileOptions {
    pub fn new(n_phases: usize) -> ProfileOptions {
        ProfileOptions { n_phases, offset: None, prec: None, fit_degree: 4, richardson_order: RICHARDSON_ORDER }
    }
}

pub fn splitting_profile_periodic(spec: &ModelSpec, section: Section, n_phases: usize) -> Result<SplittingProfile> {
    splitting_profile_periodic_with(spec, section, &ProfileOptions::new(n_phases))
}

pub fn splitting_profile_periodic_with(spec: &ModelSpec, section: Section, opts: &ProfileOptions) -> Result<SplittingProfile> {
    require_periodic(spec)?;
    let n = opts.n_phases;
    if n < 16 {
        return Err(Error::InvalidParameter(format!("need at least 16 phases, got {n}")));
    }
    let predicted = predicted_splitting(spec)?;
    let prec = opts.prec.unwrap_or(working_prec(spec, predicted)?);
    let spec = spec.at_prec(prec);
    let delta = Real::from_f64(opts.offset.unwrap_or_else(|| default_offset(predicted, prec)), prec);
    let offsets = [delta.clone(), &delta / 2.0];
    let two_pi = Real::pi(prec) * 2.0;
    let section_x = section.x(prec);
    let phases: Vec<Real> = (0..n).map(|j| &two_pi * (j as f64 / n as f64)).collect();
    let floquet: Vec<Floquet> = phases.par_iter().map(|t| monodromy_floquet_at(&spec, t, prec)).collect::<Result<_>>()?;
    let jobs: Vec<(usize, usize, usize)> =
        (0..2).flat_map(|s| (0..2).flat_map(move |o| (0..n).map(move |j| (s, o, j)))).collect();
    let shots: Vec<SectionCrossing> = jobs
        .par_iter()
        .map(|&(s, o, j)| {
            let (side, direction) = if s == 0 {
                (Side::Unstable, floquet[j].unstable.clone())
            } else {
                (Side::Stable, floquet[j].stable.clone())
            };
            let seed = ManifoldSeed { side, base_phase: Phase::Periodic(phases[j].clone()), offset: offsets[o].clone(), direction };
            shoot_to_x(&seed, &spec, &section_x)
        })
        .collect::<Result<_>>()?;
    let deg = opts.fit_degree.min((n - 1) / 2 - 1);
    let mut fits = Vec::new();
    let mut residual = Real::zero(prec);
    let mut integ_err = Real::zero(prec);
    for (batch, chunk) in shots.chunks(n).enumerate() {
        let points: Vec<(Real, Real)> = chunk
            .iter()
            .map(|c| match &c.phase_at_crossing {
                Phase::Periodic(t) => (t.clone(), c.y_at_crossing.clone()),
                Phase::Torus(..) => unreachable!(),
            })
            .collect();
        for c in chunk {
            integ_err = integ_err.max(&c.integration_error);
        }
        let (coef, rms) = trig_fit(&points, deg)?;
        residual = residual.max(&rms);
        fits.push((batch, coef));
    }
    // fits: [u coarse, u fine, s coarse, s fine]
    let diff = |o: usize| -> Vec<Real> { fits[2 + o].1.iter().zip(&fits[o].1).map(|(s, u)| s - u).collect() };
    let coarse = diff(0);
    let fine = diff(1);
    let extrap: Vec<Real> = fine.iter().zip(&coarse).map(|(f, c)| richardson(f, c, opts.richardson_order)).collect();
    let change: Vec<Real> = extrap.iter().zip(&fine).map(|(e, f)| e - f).collect();
    let samples: Vec<ProfileSample> = phases
        .iter()
        .map(|t| {
            let d = trig_eval(&extrap, t);
            let err = trig_eval(&change, t).abs() + &residual + &integ_err;
            ProfileSample { phase: Phase::Periodic(t.clone()), d, error: err }
        })
        .collect();
    let (a1, b1) = (extrap[1].clone(), extrap[2].clone());
    let amplitude = (a1.square() + &b1.square()).sqrt();
    let phase = a1.atan2(&b1).rem_euclid(&two_pi);
    let change_amp = (change[1].square() + &change[2].square()).sqrt();
    let noise = change_amp + &residual + &integ_err;
    let resolved = amplitude > (&noise * 3.0);
    let sup_abs = samples.iter().map(|s| s.d.abs()).fold(Real::zero(prec), |a, b| a.max(&b));
    Ok(SplittingProfile {
        section,
        samples,
        fitted_amplitude: amplitude,
        fitted_phase: phase,
        residual,
        noise_floor: noise,
        resolved,
        dominant_harmonic: Some((1, 0)),
        sup_abs,
        offsets: (offsets[0].clone(), offsets[1].clone()),
        prec,
    })
}

/// `d` on a `grid_n x grid_n` torus grid of crossing phases.
pub fn splitting_profile_qp(spec: &ModelSpec, section: Section, grid_n: usize) -> Result<SplittingProfile> {
    splitting_profile_qp_with(spec, section, grid_n, None, None)
}

pub fn splitting_profile_qp_with(
    spec: &ModelSpec,
    section: Section,
    grid_n: usize,
    offset: Option<f64>,
    prec: Option<u32>,
) -> Result<SplittingProfile> {
    if spec.forcing.qp().is_none() {
        return Err(Error::InvalidParameter("quasiperiodic forcing required".into()));
    }
    if grid_n < 4 {
        return Err(Error::InvalidParameter(format!("grid {grid_n} too small")));
    }
    let predicted = predicted_splitting(spec)?;
    let prec = prec.unwrap_or(working_prec(spec, predicted)?);
    let spec = spec.at_prec(prec);
    let delta = Real::from_f64(offset.unwrap_or_else(|| default_offset(predicted, prec)), prec);
    let offsets = [delta.clone(), &delta / 2.0];
    let two_pi = Real::pi(prec) * 2.0;
    let section_x = section.x(prec);
    let n = grid_n;
    let grid: Vec<(Real, Real)> = (0..n * n)
        .map(|idx| (&two_pi * ((idx / n) as f64 / n as f64), &two_pi * ((idx % n) as f64 / n as f64)))
        .collect();
    let sides = [Side::Unstable, Side::Stable];
    // Crossing times of the unperturbed flow seed the phase targeting.
    let free = spec.clone().with_mu(Real::zero(prec));
    let guesses: Vec<Real> = (0..4)
        .into_par_iter()
        .map(|i| {
            let zero = Real::zero(prec);
            let seed = ManifoldSeed::quasiperiodic(&free, sides[i / 2], &zero, &zero, &offsets[i % 2])?;
            Ok(shoot_to_x(&seed, &free, &section_x)?.time)
        })
        .collect::<Result<_>>()?;
    let jobs: Vec<(usize, usize, usize)> =
        (0..n * n).flat_map(|g| (0..2).flat_map(move |s| (0..2).map(move |o| (g, s, o)))).collect();
    let shots: Vec<SectionCrossing> = jobs
        .par_iter()
        .map(|&(g, s, o)| {
            let target = Phase::Torus(grid[g].0.clone(), grid[g].1.clone());
            shoot_targeted_from(&spec, sides[s], &target, &offsets[o], &section_x, &guesses[2 * s + o])
        })
        .collect::<Result<_>>()?;
    let mut samples = Vec::with_capacity(n * n);
    let mut noise = Real::zero(prec);
    for (g, chunk) in shots.chunks(4).enumerate() {
        let coarse = &chunk[2].y_at_crossing - &chunk[0].y_at_crossing;
        let fine = &chunk[3].y_at_crossing - &chunk[1].y_at_crossing;
        let d = richardson(&fine, &coarse, RICHARDSON_ORDER);
        let integ = chunk.iter().map(|c| c.integration_error.clone()).fold(Real::zero(prec), |a, b| a.max(&b));
        let err = (&d - &fine).abs() + &integ;
        noise = noise.max(&err);
        samples.push(ProfileSample { phase: Phase::Torus(grid[g].0.clone(), grid[g].1.clone()), d, error: err });
    }
    let sup_abs = samples.iter().map(|s| s.d.abs()).fold(Real::zero(prec), |a, b| a.max(&b));
    let values: Vec<f64> = samples.iter().map(|s| s.d.to_f64()).collect();
    let (k, coef) = dominant_torus_harmonic(&values, n);
    let amplitude = Real::from_f64(2.0 * coef.0.hypot(coef.1), prec);
    let phase = Real::from_f64(coef.1.atan2(coef.0), prec).rem_euclid(&two_pi);
    let resolved = sup_abs > (&noise * 3.0);
    Ok(SplittingProfile {
        section,
        samples,
        fitted_amplitude: amplitude,
        fitted_phase: phase,
        residual: Real::zero(prec),
        noise_floor: noise,
        resolved,
        dominant_harmonic: Some(k),
        sup_abs,
        offsets: (offsets[0].clone(), offsets[1].clone()),
        prec,
    })
}

/// Largest DFT coefficient of row-major grid data, normalized to `k2 > 0`
/// (or `k2 = 0, k1 > 0`).
pub fn dominant_torus_harmonic(values: &[f64], n: usize) -> ((i64, i64), (f64, f64)) {
    let h = 2.0 * std::f64::consts::PI / n as f64;
    let half = (n / 2) as i64;
    let mut best = ((0, 0), (0.0, 0.0));
    let mut best_abs = -1.0;
    for k1 in -half + 1..half {
        for k2 in 0..half {
            if k2 == 0 && k1 <= 0 {
                continue;
            }
            let (mut re, mut im) = (0.0, 0.0);
            for i in 0..n {
                for j in 0..n {
                    let arg = (k1 * i as i64 + k2 * j as i64) as f64 * h;
                    let v = values[i * n + j];
                    re += v * arg.cos();
                    im -= v * arg.sin();
                }
            }
            let norm = (n * n) as f64;
            let (re, im) = (re / norm, im / norm);
            if re.hypot(im) > best_abs {
                best_abs = re.hypot(im);
                best = ((k1, k2), (re, im));
            }
        }
    }
    best
}

/// Manifold graph `w = y y0(u) = d/du T` on a uniform `(u, tau)` grid.
#[derive(Clone, Debug)]
pub struct ManifoldGraph {
    pub u: Vec<Real>,
    pub phases: Vec<Real>,
    /// `w[i][j]` at `(u[i], phases[j])`.
    pub w: Vec<Vec<Real>>,
}

impl ManifoldGraph {
    /// The unperturbed separatrix `w = 4/cosh^2 u`.
    pub fn separatrix(u: Vec<Real>, phases: Vec<Real>) -> ManifoldGraph {
        let w = u.iter().map(|ui| vec![(ui.cosh().square()).recip() * 4.0; phases.len()]).collect();
        ManifoldGraph { u, phases, w }
    }

    /// Samples one manifold of the periodic model at `(u_c + i h_u, tau_c + j h_tau)`,
    /// `i, j in {-1, 0, 1}`, by phase-targeted shots to the sections `x = x0(u)`.
    pub fn sample_periodic(
        spec: &ModelSpec,
        side: Side,
        u_c: &Real,
        tau_c: &Real,
        h_u: &Real,
        h_tau: &Real,
        offset: &Real,
    ) -> Result<ManifoldGraph> {
        require_periodic(spec)?;
        let u: Vec<Real> = (-1..=1).map(|i| u_c + &(h_u * i as f64)).collect();
        let phases: Vec<Real> = (-1..=1).map(|j| tau_c + &(h_tau * j as f64)).collect();
        let jobs: Vec<(usize, usize)> = (0..3).flat_map(|i| (0..3).map(move |j| (i, j))).collect();
        let ys: Vec<Real> = jobs
            .par_iter()
            .map(|&(i, j)| {
                let p = separatrix(&u[i]);
                let c = shoot_targeted(spec, side, &Phase::Periodic(phases[j].clone()), offset, &p.x0)?;
                Ok(c.y_at_crossing * &p.y0)
            })
            .collect::<Result<_>>()?;
        let w = (0..3).map(|i| ys[3 * i..3 * i + 3].to_vec()).collect();
        Ok(ManifoldGraph { u, phases, w })
    }
}

/// Largest residual over interior nodes of the u-derivative of the
/// Hamilton-Jacobi equation,
/// `eps^-1 d_tau w + d_u[cosh^2 u w^2/8 - 2/cosh^2 u] - mu eps^eta h(x0) y0 sin tau`,
/// with central differences.
pub fn hj_residual(spec: &ModelSpec, graph: &ManifoldGraph) -> Result<Real> {
    require_periodic(spec)?;
    let (nu, nt) = (graph.u.len(), graph.phases.len());
    if nu < 3 || nt < 3 {
        return Err(Error::InvalidParameter("hj_residual needs at least a 3 x 3 graph".into()));
    }
    let p = graph.w[0][0].prec();
    let hu = &graph.u[1] - &graph.u[0];
    let ht = &graph.phases[1] - &graph.phases[0];
    let eps = spec.epsilon.with_prec(p);
    let m = spec.strength().with_prec(p);
    let energy = |i: usize, j: usize| {
        let ch2 = graph.u[i].cosh().square();
        &ch2 * &graph.w[i][j].square() / 8.0 - &(ch2.recip() * 2.0)
    };
    let mut worst = Real::zero(p);
    for i in 1..nu - 1 {
        let sp = separatrix(&graph.u[i]);
        let forcing_shape = coupling(&sp.x0, &spec.alpha, spec.variant) * &sp.y0;
        for j in 1..nt - 1 {
            let dt = (&graph.w[i][j + 1] - &graph.w[i][j - 1]) / (&ht * 2.0) / &eps;
            let du = (energy(i + 1, j) - &energy(i - 1, j)) / (&hu * 2.0);
            let r = dt + &du - &(&m * &forcing_shape * &graph.phases[j].sin());
            worst = worst.max(&r.abs());
        }
    }
    Ok(worst)
}

/// Energy `|H0|` reached along the unperturbed flow from the separatrix point
/// at `u_start` over `duration`, and the reversibility defect of the same run.
pub fn integrator_diagnostics(spec: &ModelSpec, u_start: &Real, duration: &Real) -> Result<(Real, Real)> {
    let prec = spec.prec;
    let phase = match spec.forcing {
        ForcingSpec::PeriodicSin => Phase::Periodic(Real::zero(prec)),
        ForcingSpec::Quasiperiodic(_) => Phase::Torus(Real::zero(prec), Real::zero(prec)),
    };
    let mut integ = Integrator::new(spec, &phase, prec)?;
    let p0 = separatrix(u_start);
    let (x0, y0) = (from_real(&p0.x0, prec), from_real(&p0.y0, prec));
    let dur = from_real(duration, prec);
    let (t1, x1, y1, _) = integ.flow(&Float::new(prec), &x0, &y0, &dur);
    let energy = crate::model::energy(&to_real(&x1), &to_real(&y1)).abs();
    let back = Float::with_val(prec, -&dur);
    let (_, x2, y2, _) = integ.flow(&t1, &x1, &y1, &back);
    let defect = (to_real(&x2) - &p0.x0).abs().max(&(to_real(&y2) - &p0.y0).abs());
    Ok((energy, defect))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unperturbed_monodromy() {
        let spec = ModelSpec::periodic(0.25, 0.4, 128).unwrap();
        let fl = monodromy_floquet(&spec).unwrap();
        let expect = (Real::pi(128) * 0.5).exp();
        assert!(((&fl.unstable_eigenvalue - &expect) / &expect).abs() < 1e-30);
        let r = Real::from_f64(0.5, 128).sqrt();
        assert!((&fl.unstable.0 - &r).abs() < 1e-30 && (&fl.unstable.1 - &r).abs() < 1e-30);
        assert!((&fl.stable.0 + &r).abs() < 1e-30 && (&fl.stable.1 - &r).abs() < 1e-30);
    }

    #[test]
    fn forced_monodromy_is_area_preserving() {
        let spec = ModelSpec::periodic(0.25, 0.4, 256).unwrap().with_perturbation(1e-3, 2.0);
        let fl = monodromy_floquet(&spec).unwrap();
        assert!((&fl.determinant - 1.0).abs() < 1e-20);
        let prod = &fl.unstable_eigenvalue * &fl.stable_eigenvalue;
        assert!((prod - 1.0).abs() < 1e-20);
    }

    #[test]
    fn unperturbed_crossings() {
        let spec = ModelSpec::periodic(0.25, 0.4, 128).unwrap();
        let off = Real::from_f64(1e-6, 128);
        let seed = ManifoldSeed::periodic(&spec, Side::Unstable, &Real::zero(128), &off).unwrap();
        let c = shoot_to_section(&seed, &spec, Section::Pi).unwrap();
        assert!((&c.y_at_crossing - 2.0).abs() < 1e-20);
        let c = shoot_to_section(&seed, &spec, Section::ThreePiHalves).unwrap();
        assert!((&c.y_at_crossing - &Real::from_f64(2.0, 128).sqrt()).abs() < 1e-20);
        let seed = ManifoldSeed::periodic(&spec, Side::Stable, &Real::zero(128), &off).unwrap();
        let c = shoot_to_section(&seed, &spec, Section::Pi).unwrap();
        assert!((&c.y_at_crossing - 2.0).abs() < 1e-20);
        assert!(c.time < 0.0);
    }

    #[test]
    fn energy_and_reversibility() {
        let spec = ModelSpec::periodic(0.25, 0.4, 128).unwrap();
        let (e, r) = integrator_diagnostics(&spec, &Real::from_f64(-15.0, 128), &Real::from_f64(30.0, 128)).unwrap();
        assert!(e < 1e-28, "{e:?}");
        assert!(r < 1e-20, "{r:?}");
    }

    #[test]
    fn separatrix_graph_solves_hj() {
        let spec = ModelSpec::periodic(0.25, 0.4, 128).unwrap();
        let h = Real::from_f64(0.01, 128);
        let u: Vec<Real> = (-1..=1).map(|i| &h * i as f64 + 0.3).collect();
        let t: Vec<Real> = (-1..=1).map(|j| &h * j as f64 + 1.0).collect();
        let r = hj_residual(&spec, &ManifoldGraph::separatrix(u, t)).unwrap();
        assert!(r < 1e-30);
    }
}
