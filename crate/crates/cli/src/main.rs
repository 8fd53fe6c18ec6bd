use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Map, Value};

use splitlab::lab::validate::{find_criterion, run_criterion, CRITERIA};
use splitlab::lab::{assemble_d0, fit_rate_prefactor, preset, run_sweep, validate_suite, write_outputs, AlphaLaw, FitModel, Level, SweepConfig, SweepTable, ValidationReport};
use splitlab::melnikov::qp::{envelope_reference, leading_harmonic, QpSeries};
use splitlab::melnikov::{classify_regime, melnikov_asymptotic, melnikov_quadrature, melnikov_residue, ForcingCase, MelnikovResult, PoleSet};
use splitlab::model::{ForcingSpec, ModelSpec, QpForcing, Variant, DEFAULT_GUARD_CEILING};
use splitlab::mpnum::{Complex, Real};
use splitlab::oracle::{splitting_profile_periodic, splitting_profile_qp, Section};
use splitlab::singular::solve_singularities;

const DIGITS: usize = 30;

#[derive(Parser)]
#[command(name = "splitlab", version, about = "Exponentially small separatrix splitting for a rapidly forced pendulum")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Singularities of the coupling and the delta constants.
    Singularities(ModelArgs),
    /// Periodic Melnikov function by residues, quadrature and asymptotics.
    Melnikov(ModelArgs),
    /// Quasiperiodic Melnikov supremum, leading harmonic and envelope.
    MelnikovQp(ModelArgs),
    /// Splitting distance from the multiprecision manifold oracle.
    SplitDirect {
        #[command(flatten)]
        model: ModelArgs,
        /// Phase samples (periodic) or grid side (quasiperiodic).
        #[arg(long)]
        phases: Option<usize>,
    },
    /// Runs a sweep from a TOML config or a named preset.
    Sweep {
        #[arg(long, conflicts_with = "preset")]
        config: Option<PathBuf>,
        #[arg(long)]
        preset: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
    },
    /// Fits `ln A = ln c + q ln eps - a/eps` to a sweep CSV.
    Fit {
        input: PathBuf,
        #[arg(long, default_value = "melnikov_amplitude")]
        quantity: String,
        #[arg(long, default_value = "residue")]
        method: String,
        #[arg(long)]
        mu: Option<f64>,
        #[arg(long, default_value = "exp_plus_power")]
        model: String,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
    },
    /// Runs the acceptance checks.
    Validate {
        #[arg(long, default_value = "fast")]
        level: String,
        /// Comma-separated criterion ids, e.g. `A1,A4`.
        #[arg(long, value_delimiter = ',')]
        only: Vec<String>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Clone, Copy, ValueEnum)]
enum VariantArg {
    Standard,
    Alt,
}

#[derive(Clone, Copy, ValueEnum)]
enum ForcingArg {
    Sin,
    Qp,
}

#[derive(Args)]
struct ModelArgs {
    #[arg(long, default_value_t = 0.1)]
    eps: f64,
    /// A number or a scaling law such as `1 - 1.0*eps^2`.
    #[arg(long, default_value = "0.4", allow_hyphen_values = true)]
    alpha: String,
    #[arg(long, default_value_t = 0.0)]
    mu: f64,
    #[arg(long, default_value_t = 2.0)]
    eta: f64,
    #[arg(long, value_enum, default_value_t = VariantArg::Standard)]
    variant: VariantArg,
    #[arg(long, value_enum, default_value_t = ForcingArg::Sin)]
    forcing: ForcingArg,
    #[arg(long, default_value_t = 1.0)]
    r1: f64,
    #[arg(long, default_value_t = 1.0)]
    r2: f64,
    #[arg(long)]
    kmax: Option<usize>,
    /// `pi` or `3pi2`; defaults by regime.
    #[arg(long)]
    section: Option<String>,
    #[arg(long, default_value_t = 128)]
    precision_bits: u32,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

impl ModelArgs {
    fn law(&self) -> Result<AlphaLaw> {
        Ok(AlphaLaw::parse(&self.alpha)?)
    }

    fn spec(&self) -> Result<ModelSpec> {
        let p = self.precision_bits;
        let alpha = self.law()?.alpha(self.eps);
        let variant = match self.variant {
            VariantArg::Standard => Variant::Standard,
            VariantArg::Alt => Variant::Alternative,
        };
        let forcing = match self.forcing {
            ForcingArg::Sin => ForcingSpec::PeriodicSin,
            ForcingArg::Qp => ForcingSpec::Quasiperiodic(Box::new(QpForcing::example(self.r1, self.r2, self.kmax, p)?)),
        };
        let spec = ModelSpec::new(Real::from_f64(self.eps, p), Real::from_f64(alpha, p), variant, forcing, p)?;
        Ok(spec.with_perturbation(self.mu, self.eta))
    }

    fn section(&self, spec: &ModelSpec) -> Result<Section> {
        Ok(match &self.section {
            Some(s) => s.parse()?,
            None => Section::for_model(spec),
        })
    }

    fn emit(&self, rows: Rows) -> Result<()> {
        emit(rows, self.format, self.out.as_ref())
    }
}

/// Key/value output rendered as two-column CSV or a JSON object.
struct Rows(Vec<(String, Value)>);

impl Rows {
    fn new() -> Rows {
        Rows(Vec::new())
    }

    fn put(&mut self, key: impl Into<String>, value: impl Into<Value>) {
        self.0.push((key.into(), value.into()));
    }

    fn real(&mut self, key: &str, x: &Real) {
        self.put(key, x.to_decimal_digits(DIGITS));
    }

    fn complex(&mut self, key: &str, z: &Complex) {
        self.real(&format!("{key}.re"), &z.re);
        self.real(&format!("{key}.im"), &z.im);
    }

    fn melnikov(&mut self, tag: &str, m: &MelnikovResult) {
        self.real(&format!("{tag}.amplitude"), &m.amplitude);
        self.real(&format!("{tag}.phase"), &m.phase);
        self.real(&format!("{tag}.rate"), &m.rate);
        self.put(format!("{tag}.error"), format!("{:.3e}", m.error_estimate.to_f64()));
        if let Some(w) = &m.warning {
            self.put(format!("{tag}.warning"), w.clone());
        }
    }

    fn render(&self, format: Format) -> Result<String> {
        Ok(match format {
            Format::Csv => {
                let mut s = String::from("key,value\n");
                for (k, v) in &self.0 {
                    let v = match v {
                        Value::String(s) => s.clone(),
                        other => other.to_string(),
                    };
                    s.push_str(&format!("{k},{}\n", if v.contains(',') { format!("\"{v}\"") } else { v }));
                }
                s
            }
            Format::Json => {
                let map: Map<String, Value> = self.0.iter().cloned().collect();
                serde_json::to_string_pretty(&Value::Object(map))? + "\n"
            }
        })
    }
}

fn write_text(text: &str, out: Option<&PathBuf>) -> Result<()> {
    match out {
        Some(path) => std::fs::write(path, text).with_context(|| format!("writing {}", path.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn emit(rows: Rows, format: Format, out: Option<&PathBuf>) -> Result<()> {
    write_text(&rows.render(format)?, out)
}

fn header(rows: &mut Rows, spec: &ModelSpec) {
    rows.put("eps", spec.epsilon.to_f64());
    rows.put("alpha", spec.alpha.to_f64());
    rows.put("variant", format!("{:?}", spec.variant).to_lowercase());
    rows.put("precision_bits", spec.prec);
}

fn singularities(a: &ModelArgs) -> Result<()> {
    let spec = a.spec()?;
    let sing = solve_singularities(&spec.alpha, spec.variant)?;
    let mut rows = Rows::new();
    header(&mut rows, &spec);
    rows.complex("rho_minus", &sing.rho_minus);
    rows.complex("rho_plus", &sing.rho_plus);
    rows.real("strip_width", &sing.strip_width);
    rows.real("rate", &sing.rate());
    if let Some((d1, d2)) = &sing.deltas {
        rows.complex("delta1", d1);
        rows.complex("delta2", d2);
    }
    a.emit(rows)
}

fn melnikov(a: &ModelArgs) -> Result<()> {
    let spec = a.spec()?;
    if !matches!(spec.forcing, ForcingSpec::PeriodicSin) {
        bail!("melnikov needs --forcing sin; use melnikov-qp");
    }
    let regime = match a.law()?.regime_hint() {
        Some(r) => r,
        None => classify_regime(a.eps, spec.alpha.to_f64(), ForcingCase::Periodic).regime,
    };
    let mut rows = Rows::new();
    header(&mut rows, &spec);
    rows.put("regime", regime.name());
    rows.melnikov("residue", &melnikov_residue(&spec, PoleSet::Complete)?);
    rows.melnikov("quadrature", &melnikov_quadrature(&Real::zero(spec.prec), &spec, None)?);
    match melnikov_asymptotic(&spec, &regime) {
        Ok(m) => rows.melnikov("asymptotic", &m),
        Err(e) => rows.put("asymptotic.status", format!("failed: {e}")),
    }
    a.emit(rows)
}

fn melnikov_qp(a: &ModelArgs) -> Result<()> {
    let spec = a.spec()?;
    if spec.forcing.qp().is_none() {
        bail!("melnikov-qp needs --forcing qp");
    }
    let sing = solve_singularities(&spec.alpha, spec.variant)?;
    let series = QpSeries::new(&spec, a.kmax)?;
    let sup = series.sup(64)?;
    let lead = leading_harmonic(&spec, &sing)?;
    let (regime, reference) = envelope_reference(&spec)?;
    let mut rows = Rows::new();
    header(&mut rows, &spec);
    rows.put("kmax", series.kmax());
    rows.real("sup", &sup.value);
    rows.real("sup.theta1", &sup.theta1);
    rows.real("sup.theta2", &sup.theta2);
    rows.put("tail_bound", format!("{:.3e}", series.tail_bound()));
    if let Some((k1, k2)) = series.dominant_harmonic() {
        rows.put("dominant.k1", k1);
        rows.put("dominant.k2", k2);
    }
    rows.put("leading.k1", lead.k.0);
    rows.put("leading.k2", lead.k.1);
    rows.real("leading.amplitude", &lead.amplitude);
    rows.put("regime", regime.name());
    rows.real("envelope_reference", &reference);
    rows.put("normalized_log", (sup.value.ln() - &reference.ln()).to_f64());
    a.emit(rows)
}

fn split_direct(a: &ModelArgs, phases: Option<usize>) -> Result<()> {
    let spec = a.spec()?;
    spec.check_guard(DEFAULT_GUARD_CEILING)?;
    let section = a.section(&spec)?;
    let torus = spec.forcing.qp().is_some();
    let prof = if torus {
        splitting_profile_qp(&spec, section, phases.unwrap_or(8))?
    } else {
        splitting_profile_periodic(&spec, section, phases.unwrap_or(16))?
    };
    let d0 = assemble_d0(&spec, section, 16)?;
    match a.format {
        Format::Csv => write_text(&prof.to_csv(), a.out.as_ref()),
        Format::Json => {
            let mut rows = Rows::new();
            header(&mut rows, &spec);
            rows.put("mu", a.mu);
            rows.put("eta", a.eta);
            rows.put("section", format!("{section:?}"));
            rows.real("fitted_amplitude", &prof.fitted_amplitude);
            rows.real("fitted_phase", &prof.fitted_phase);
            rows.real("sup_abs", &prof.sup_abs);
            rows.put("residual", format!("{:.3e}", prof.residual.to_f64()));
            rows.put("noise_floor", format!("{:.3e}", prof.noise_floor.to_f64()));
            rows.put("resolved", prof.resolved);
            if let Some((k1, k2)) = prof.dominant_harmonic {
                rows.put("dominant", json!([k1, k2]));
            }
            rows.put("working_prec", prof.prec);
            rows.real("d0_amplitude", &d0.amplitude);
            rows.put("ratio_to_d0", (prof.reported_amplitude() / &d0.amplitude).to_f64());
            emit(rows, Format::Json, a.out.as_ref())
        }
    }
}

fn sweep(config: Option<PathBuf>, preset_name: Option<String>, out: Option<PathBuf>, format: Format) -> Result<()> {
    let mut cfg: SweepConfig = match (config, preset_name) {
        (Some(path), _) => SweepConfig::from_toml(&std::fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?)?,
        (None, Some(name)) => preset(&name)?,
        (None, None) => bail!("give --config <file> or --preset <name>"),
    };
    if let Some(path) = &out {
        match format {
            Format::Csv => cfg.output.csv = Some(path.clone()),
            Format::Json => cfg.output.json = Some(path.clone()),
        }
    }
    let table = run_sweep(&cfg)?;
    write_outputs(&cfg, &table)?;
    if out.is_none() {
        let text = match format {
            Format::Csv => table.to_csv(),
            Format::Json => table.to_json()? + "\n",
        };
        print!("{text}");
    }
    let failed = table.records.iter().filter(|r| r.status != "ok").count();
    if failed > 0 {
        eprintln!("{failed} of {} records failed", table.records.len());
    }
    Ok(())
}

fn fit(input: PathBuf, quantity: &str, method: &str, mu: Option<f64>, model: &str, out: Option<PathBuf>, format: Format) -> Result<()> {
    let text = std::fs::read_to_string(&input).with_context(|| format!("reading {}", input.display()))?;
    let table = SweepTable::from_csv("input", &text)?;
    let pts = table.points(quantity, method, mu);
    let model: FitModel = model.parse()?;
    let r = fit_rate_prefactor(&pts, model)?;
    let text = match format {
        Format::Json => serde_json::to_string_pretty(&r)? + "\n",
        Format::Csv => {
            let mut rows = Rows::new();
            if let Some(a) = r.rate {
                rows.put("rate", a);
            }
            rows.put("power", r.power);
            rows.put("log_prefactor", r.log_prefactor);
            rows.put("residual_norm", r.residual_norm);
            rows.put("n_points", r.n_points);
            for (i, row) in r.covariance.iter().enumerate() {
                for (j, c) in row.iter().enumerate() {
                    rows.put(format!("cov{i}{j}"), *c);
                }
            }
            rows.render(Format::Csv)?
        }
    };
    write_text(&text, out.as_ref())
}

fn validate(level: &str, only: &[String], out: Option<PathBuf>, format: Format) -> Result<bool> {
    let level: Level = level.parse()?;
    let report = if only.is_empty() {
        validate_suite(level)
    } else {
        let mut outcomes = Vec::new();
        for id in only {
            let c = find_criterion(id).with_context(|| format!("unknown criterion `{id}`; known: {}", CRITERIA.map(|c| c.id).join(" ")))?;
            outcomes.push(run_criterion(c));
        }
        ValidationReport { level, mpfr: splitlab::mpnum::mpfr_version(), outcomes }
    };
    for o in &report.outcomes {
        eprintln!("{}", o.line());
    }
    let text = match format {
        Format::Json => serde_json::to_string_pretty(&report)? + "\n",
        Format::Csv => {
            let mut s = String::from("id,label,value,limit,passed\n");
            for o in &report.outcomes {
                if let Some(e) = &o.error {
                    s.push_str(&format!("{},\"error: {}\",,,false\n", o.id, e.replace('"', "'")));
                }
                for m in &o.measurements {
                    let limit = m.limit.map(|l| format!("{l:e}")).unwrap_or_default();
                    s.push_str(&format!("{},\"{}\",{:e},{},{}\n", o.id, m.label, m.value, limit, m.passed));
                }
            }
            s
        }
    };
    write_text(&text, out.as_ref())?;
    Ok(report.all_passed())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Singularities(a) => singularities(&a).map(|_| true),
        Command::Melnikov(a) => melnikov(&a).map(|_| true),
        Command::MelnikovQp(a) => melnikov_qp(&a).map(|_| true),
        Command::SplitDirect { model, phases } => split_direct(&model, phases).map(|_| true),
        Command::Sweep { config, preset, out, format } => sweep(config, preset, out, format).map(|_| true),
        Command::Fit { input, quantity, method, mu, model, out, format } => fit(input, &quantity, &method, mu, &model, out, format).map(|_| true),
        Command::Validate { level, only, out, format } => validate(&level, &only, out, format),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
