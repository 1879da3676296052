//! Command-line front end: flags, `key = value` config files, and the
//! serialization of every pipeline.
//!
//! Each output starts with a header carrying the library version, the fully
//! resolved configuration and the derived parameters. JSON outputs are JSON
//! lines; CSV outputs put the header in `#` comment lines.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_complex::Complex64;
use serde::Serialize;
use serde_json::{json, Value};

use crate::bridge::{alpha_from_phi0, invert_grid, period_grid, InverseSample};
use crate::eigenbasis::{
    check_identities, eigenpair_cauchy, eigenpair_from_rsj, off_circle_samples, phase_ratios, values_at_one_from_phase, Branch, EigenPair,
};
use crate::error::Error;
use crate::heun::{circle_samples, involutivity_residual, SolutionJet};
use crate::monodromy::{lock_indicator, max_abs_diff, monodromy_closed_form, monodromy_continuation, phase_lock, DEFAULT_LOCK_TOL};
use crate::odeint::Tolerances;
use crate::params::Params;
use crate::rsj::{self, rotation_number, solve_rsj};
use crate::sweep::{compare_criteria, refine_edges, rotation_locked, run_sweep, Criterion, SweepConfig, CSV_HEADER};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Parser)]
#[command(name = "sdche", version, about = "Heun eigenfunctions, junction dynamics, inverse maps and monodromy")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Default, Args)]
pub struct Common {
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub ell: Option<f64>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub mu: Option<f64>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub omega: Option<f64>,
    /// Alternative to --omega.
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub lambda: Option<f64>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub phi0: Option<f64>,
    #[arg(long, global = true)]
    pub rel_tol: Option<f64>,
    #[arg(long, global = true)]
    pub abs_tol: Option<f64>,
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// File of `key = value` lines; flags take precedence.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Integrate the junction equation with P and Q from t = 0.
    SolveRsj {
        #[arg(long)]
        t_end: Option<f64>,
        #[arg(long)]
        samples: Option<usize>,
    },
    /// Rotation number over many forcing periods.
    Rotation {
        #[arg(long)]
        n_periods: Option<usize>,
    },
    /// Sample both eigenfunctions on the unit circle.
    BuildEigen {
        #[arg(long)]
        samples: Option<usize>,
        #[arg(long, value_enum)]
        route: Option<Route>,
    },
    /// Residuals of the eigenfunction identities and of the involution.
    Verify {
        #[arg(value_enum)]
        what: Option<VerifyWhat>,
        #[arg(long)]
        samples: Option<usize>,
        #[arg(long)]
        threshold: Option<f64>,
    },
    /// Recover phi, P, Q and Theta from the eigenfunctions.
    Invert {
        #[arg(long)]
        samples: Option<usize>,
    },
    /// Closed-form and continuation monodromy with phase-lock classification.
    Monodromy,
    /// Phase-lock classification over a grid in B.
    Sweep {
        #[arg(long, allow_hyphen_values = true)]
        amp: Option<f64>,
        /// `lo,hi`
        #[arg(long, allow_hyphen_values = true)]
        b_range: Option<Range>,
        #[arg(long)]
        b_steps: Option<usize>,
        #[arg(long)]
        n_periods: Option<usize>,
        /// Bisect tongue edges of both criteria and compare them.
        #[arg(long)]
        refine: Option<bool>,
        #[arg(long)]
        band: Option<f64>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Route {
    #[default]
    Riccati,
    Cauchy,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum VerifyWhat {
    Identities,
    #[value(alias = "opC")]
    Opc,
    #[default]
    All,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Range(pub f64, pub f64);

impl FromStr for Range {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (a, b) = s.split_once(',').ok_or_else(|| format!("expected `lo,hi`, got `{s}`"))?;
        let parse = |x: &str| x.trim().parse::<f64>().map_err(|e| format!("`{x}`: {e}"));
        Ok(Range(parse(a)?, parse(b)?))
    }
}

macro_rules! value_enum_from_str {
    ($($t:ty),*) => {$(
        impl FromStr for $t {
            type Err = String;
            fn from_str(s: &str) -> Result<Self, Self::Err> {
                <$t as ValueEnum>::from_str(s, true)
            }
        }
    )*};
}
value_enum_from_str!(Format, Route, VerifyWhat);

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{message}")]
    Usage { flag: Option<String>, message: String },
    #[error(transparent)]
    Compute(#[from] Error),
    #[error("{0}")]
    Io(String),
    /// The run completed but a checked residual exceeded its threshold.
    #[error("{0}")]
    Check(String),
}

impl CliError {
    fn usage(flag: &str, message: impl Into<String>) -> Self {
        CliError::Usage { flag: Some(format!("--{flag}")), message: message.into() }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage { .. } => 2,
            CliError::Compute(e) if e.is_usage() => 2,
            _ => 1,
        }
    }

    pub fn to_json(&self) -> Value {
        let (kind, flag) = match self {
            CliError::Usage { flag, .. } => ("usage", flag.clone()),
            CliError::Compute(e) => (e.kind(), None),
            CliError::Io(_) => ("io", None),
            CliError::Check(_) => ("check_failed", None),
        };
        let mut err = json!({ "kind": kind, "message": self.to_string() });
        if let Some(f) = flag {
            err["flag"] = json!(f);
        }
        json!({ "error": err })
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

const COMMON_KEYS: &[&str] = &["ell", "mu", "omega", "lambda", "phi0", "rel-tol", "abs-tol", "format", "jobs"];

/// Values read from a config file, keyed by flag name without the dashes.
#[derive(Debug, Clone, Default)]
pub struct ConfigFile {
    entries: BTreeMap<String, String>,
}

impl ConfigFile {
    pub fn parse(text: &str) -> CliResult<Self> {
        let mut entries = BTreeMap::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) =
                line.split_once('=').ok_or_else(|| CliError::usage("config", format!("line {}: expected `key = value`, got `{line}`", n + 1)))?;
            let key = k.trim().trim_start_matches("--").replace('_', "-");
            entries.insert(key, v.trim().trim_matches('"').to_string());
        }
        Ok(Self { entries })
    }

    fn check_keys(&self, allowed: &[&str]) -> CliResult<()> {
        match self.entries.keys().find(|k| !COMMON_KEYS.contains(&k.as_str()) && !allowed.contains(&k.as_str())) {
            Some(k) => Err(CliError::usage("config", format!("unknown or inapplicable key `{k}`"))),
            None => Ok(()),
        }
    }

    /// The flag value if given, otherwise the file value.
    fn pick<T: FromStr>(&self, flag: Option<T>, key: &str) -> CliResult<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        if flag.is_some() {
            return Ok(flag);
        }
        self.entries.get(key).map(|v| v.parse::<T>().map_err(|e| CliError::usage(key, format!("invalid value `{v}` for {key}: {e}")))).transpose()
    }
}

/// The parameter triple as given, before derivation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ParamsInput {
    pub ell: Option<f64>,
    pub mu: Option<f64>,
    pub omega: Option<f64>,
    pub lambda: Option<f64>,
}

impl ParamsInput {
    pub fn resolve(&self) -> CliResult<Params> {
        let ell = self.ell.ok_or_else(|| CliError::usage("ell", "--ell is required"))?;
        let mu = self.mu.ok_or_else(|| CliError::usage("mu", "--mu is required"))?;
        match (self.omega, self.lambda) {
            (Some(omega), None) => Ok(Params::new(ell, mu, omega)?),
            (None, Some(lambda)) => Ok(Params::from_heun(ell, mu, lambda)?),
            (Some(_), Some(_)) => Err(CliError::usage("lambda", "give either --omega or --lambda, not both")),
            (None, None) => Err(CliError::usage("omega", "one of --omega or --lambda is required")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Task {
    SolveRsj { t_end: f64, samples: usize },
    Rotation { n_periods: usize },
    BuildEigen { samples: usize, route: Route },
    Verify { what: VerifyWhat, samples: usize, threshold: f64 },
    Invert { samples: usize },
    Monodromy,
    Sweep { grid: SweepConfig, refine: bool, band: f64 },
}

impl Task {
    pub fn name(&self) -> &'static str {
        match self {
            Task::SolveRsj { .. } => "solve-rsj",
            Task::Rotation { .. } => "rotation",
            Task::BuildEigen { .. } => "build-eigen",
            Task::Verify { .. } => "verify",
            Task::Invert { .. } => "invert",
            Task::Monodromy => "monodromy",
            Task::Sweep { .. } => "sweep",
        }
    }
}

/// Fully resolved run. The output path is deliberately not part of it, so the
/// same run written to two places produces identical files.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub command: &'static str,
    pub task: Task,
    /// Absent for `sweep`, which derives parameters per cell.
    pub params: Option<ParamsInput>,
    pub phi0: f64,
    /// Tolerances for the Heun-side integrations.
    pub heun_tol: Tolerances,
    /// Tolerances for the junction-side integrations.
    pub rsj_tol: Tolerances,
    pub format: Format,
    pub jobs: usize,
    #[serde(skip)]
    pub out: Option<PathBuf>,
}

fn with_overrides(base: Tolerances, rel: Option<f64>, abs: Option<f64>) -> CliResult<Tolerances> {
    let t = Tolerances { rel: rel.unwrap_or(base.rel), abs: abs.unwrap_or(base.abs), ..base };
    t.validate().map_err(|e| CliError::usage(if rel.is_some() { "rel-tol" } else { "abs-tol" }, e.to_string()))?;
    Ok(t)
}

impl RunConfig {
    pub fn from_cli(cli: Cli) -> CliResult<Self> {
        let file = match &cli.common.config {
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| CliError::usage("config", format!("{}: {e}", path.display())))?;
                ConfigFile::parse(&text)?
            }
            None => ConfigFile::default(),
        };
        Self::resolve(cli, &file)
    }

    pub fn resolve(cli: Cli, file: &ConfigFile) -> CliResult<Self> {
        let c = &cli.common;
        let params = ParamsInput {
            ell: file.pick(c.ell, "ell")?,
            mu: file.pick(c.mu, "mu")?,
            omega: file.pick(c.omega, "omega")?,
            lambda: file.pick(c.lambda, "lambda")?,
        };
        let phi0 = file.pick(c.phi0, "phi0")?.unwrap_or(0.0);
        let rel = file.pick(c.rel_tol, "rel-tol")?;
        let abs = file.pick(c.abs_tol, "abs-tol")?;
        let heun_tol = with_overrides(Tolerances::default(), rel, abs)?;
        let rsj_tol = with_overrides(rsj::default_tolerances(), rel, abs)?;
        let format = file.pick(c.format, "format")?.unwrap_or_default();
        let jobs = file.pick(c.jobs, "jobs")?.unwrap_or(1);
        if jobs == 0 {
            return Err(CliError::usage("jobs", "--jobs must be positive"));
        }
        if !phi0.is_finite() {
            return Err(CliError::usage("phi0", "--phi0 must be finite"));
        }
        let positive = |n: usize, flag: &str| if n == 0 { Err(CliError::usage(flag, format!("--{flag} must be positive"))) } else { Ok(n) };

        let task = match cli.command {
            Command::SolveRsj { t_end, samples } => {
                file.check_keys(&["t-end", "samples"])?;
                let t_end = match file.pick(t_end, "t-end")? {
                    Some(t) if t.is_finite() && t >= 0.0 => t,
                    Some(t) => return Err(CliError::usage("t-end", format!("--t-end must be finite and non-negative, got {t}"))),
                    None => 2.0 * std::f64::consts::PI / params.resolve()?.omega,
                };
                Task::SolveRsj { t_end, samples: positive(file.pick(samples, "samples")?.unwrap_or(129), "samples")? }
            }
            Command::Rotation { n_periods } => {
                file.check_keys(&["n-periods"])?;
                Task::Rotation { n_periods: file.pick(n_periods, "n-periods")?.unwrap_or(256) }
            }
            Command::BuildEigen { samples, route } => {
                file.check_keys(&["samples", "route"])?;
                Task::BuildEigen {
                    samples: positive(file.pick(samples, "samples")?.unwrap_or(32), "samples")?,
                    route: file.pick(route, "route")?.unwrap_or_default(),
                }
            }
            Command::Verify { what, samples, threshold } => {
                file.check_keys(&["what", "samples", "threshold"])?;
                Task::Verify {
                    what: file.pick(what, "what")?.unwrap_or_default(),
                    samples: positive(file.pick(samples, "samples")?.unwrap_or(32), "samples")?,
                    threshold: file.pick(threshold, "threshold")?.unwrap_or(1e-7),
                }
            }
            Command::Invert { samples } => {
                file.check_keys(&["samples"])?;
                Task::Invert { samples: positive(file.pick(samples, "samples")?.unwrap_or(64), "samples")? }
            }
            Command::Monodromy => {
                file.check_keys(&[])?;
                Task::Monodromy
            }
            Command::Sweep { amp, b_range, b_steps, n_periods, refine, band } => {
                file.check_keys(&["amp", "b-range", "b-steps", "n-periods", "refine", "band"])?;
                if params.lambda.is_some() {
                    return Err(CliError::usage("lambda", "sweep takes --omega, not --lambda"));
                }
                let defaults = SweepConfig::default();
                let grid = SweepConfig {
                    omega: params.omega.unwrap_or(defaults.omega),
                    amp: file.pick(amp, "amp")?.unwrap_or(defaults.amp),
                    b_range: file.pick(b_range, "b-range")?.map_or(defaults.b_range, |r| (r.0, r.1)),
                    b_steps: positive(file.pick(b_steps, "b-steps")?.unwrap_or(defaults.b_steps), "b-steps")?,
                    n_periods: file.pick(n_periods, "n-periods")?.unwrap_or(defaults.n_periods),
                    phi0,
                    tol: heun_tol,
                    rsj_tol,
                    ..defaults
                };
                grid.validate().map_err(|e| CliError::usage("b-range", e.to_string()))?;
                Task::Sweep { grid, refine: file.pick(refine, "refine")?.unwrap_or(false), band: file.pick(band, "band")?.unwrap_or(1e-3) }
            }
        };
        let tabular = matches!(task, Task::SolveRsj { .. } | Task::BuildEigen { .. } | Task::Invert { .. } | Task::Sweep { .. });
        if format == Format::Csv && !tabular {
            return Err(CliError::usage("format", format!("{} has no CSV form", task.name())));
        }
        let params = if matches!(task, Task::Sweep { .. }) {
            None
        } else {
            params.resolve()?;
            Some(params)
        };
        Ok(RunConfig { command: task.name(), task, params, phi0, heun_tol, rsj_tol, format, jobs, out: cli.common.out })
    }

    fn derived_params(&self) -> CliResult<Option<Params>> {
        self.params.map(|p| p.resolve()).transpose()
    }
}

/// Finished output of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct Artifact {
    pub text: String,
    /// Set when the run finished but a checked quantity failed its threshold.
    pub failure: Option<String>,
}

struct Writer {
    format: Format,
    text: String,
}

impl Writer {
    fn new(cfg: &RunConfig, extra: Value) -> CliResult<Self> {
        let mut header = json!({
            "version": VERSION,
            "config": cfg,
            "params": cfg.derived_params()?,
        });
        if let (Value::Object(h), Value::Object(e)) = (&mut header, extra) {
            h.extend(e);
        }
        let mut w = Writer { format: cfg.format, text: String::new() };
        match cfg.format {
            Format::Json => w.line(&header.to_string()),
            Format::Csv => {
                w.line(&format!("# sdche {VERSION}"));
                for (k, v) in header.as_object().into_iter().flatten().filter(|(k, _)| k.as_str() != "version") {
                    w.line(&format!("# {k}: {v}"));
                }
            }
        }
        Ok(w)
    }

    fn line(&mut self, s: &str) {
        self.text.push_str(s);
        self.text.push('\n');
    }

    fn record<T: Serialize>(&mut self, row: &T, csv: impl FnOnce() -> String) {
        match self.format {
            Format::Json => {
                let s = serde_json::to_string(row).expect("records serialize");
                self.line(&s);
            }
            Format::Csv => self.line(&csv()),
        }
    }

    fn csv_header(&mut self, cols: &str) {
        if self.format == Format::Csv {
            self.line(cols);
        }
    }

    fn done(self) -> Artifact {
        Artifact { text: self.text, failure: None }
    }
}

/// Shortest round-trip form, with an exponent where that is shorter.
fn num(x: f64) -> String {
    serde_json::to_string(&x).expect("f64 serializes")
}

fn complex_csv(z: Complex64) -> String {
    format!("{},{}", num(z.re), num(z.im))
}

fn build_pair(cfg: &RunConfig, params: &Params, route: Route) -> CliResult<EigenPair> {
    Ok(match route {
        Route::Riccati => eigenpair_from_rsj(params, cfg.phi0, &cfg.rsj_tol)?,
        Route::Cauchy => {
            let (vp, vm) = values_at_one_from_phase(cfg.phi0);
            let c = |v: f64| Complex64::new(v, 0.0);
            eigenpair_cauchy(params, c(vp), c(vm), &cfg.heun_tol)?
        }
    })
}

fn degeneracy_json(pair: &EigenPair) -> Value {
    json!({
        "degenerate_branch": pair.degenerate_branch(),
        "near_degenerate": Branch::BOTH.iter().filter(|&&b| pair.get(b).is_near_degenerate()).collect::<Vec<_>>(),
        "value_at_one": { "plus": pair.plus.value_at_one(), "minus": pair.minus.value_at_one() },
    })
}

pub fn run(cfg: &RunConfig) -> CliResult<Artifact> {
    let params = cfg.derived_params()?;
    match (&cfg.task, params) {
        (Task::SolveRsj { t_end, samples }, Some(p)) => {
            let sol = solve_rsj(&p, cfg.phi0, (0.0, *t_end), &cfg.rsj_tol)?;
            let rows = sol.samples(*samples)?;
            let mut w = Writer::new(cfg, json!({ "max_residual": sol.max_residual(*samples)? }))?;
            w.csv_header("t,phi,P,Q");
            for r in &rows {
                w.record(r, || [r.t, r.phi, r.p, r.q].map(num).join(","));
            }
            Ok(w.done())
        }
        (Task::Rotation { n_periods }, Some(p)) => {
            let rho = rotation_number(&p, cfg.phi0, *n_periods, &cfg.rsj_tol)?;
            let mut w = Writer::new(cfg, json!({}))?;
            w.record(&json!({ "rotation_number": rho, "n_periods": n_periods, "plateau": rotation_locked(rho, *n_periods) }), String::new);
            Ok(w.done())
        }
        (Task::BuildEigen { samples, route }, Some(p)) => {
            let pair = build_pair(cfg, &p, *route)?;
            let mut extra = degeneracy_json(&pair);
            let reference = build_pair(&RunConfig { phi0: 0.0, ..cfg.clone() }, &p, *route)?;
            extra["phase_ratio"] = json!(phase_ratios(&pair, &reference, 16)?);
            let mut w = Writer::new(cfg, extra)?;
            w.csv_header("w_re,w_im,E_plus_re,E_plus_im,E_plus_prime_re,E_plus_prime_im,E_minus_re,E_minus_im,E_minus_prime_re,E_minus_prime_im");
            for pt in circle_samples(*samples) {
                let (a, b) = (pair.plus.eval(pt)?, pair.minus.eval(pt)?);
                let row = json!({
                    "w": pt.w,
                    "E_plus": a.value,
                    "E_plus_prime": a.derivative,
                    "E_minus": b.value,
                    "E_minus_prime": b.derivative,
                });
                w.record(&row, || [pt.w, a.value, a.derivative, b.value, b.derivative].map(complex_csv).join(","));
            }
            Ok(w.done())
        }
        (Task::Verify { what, samples, threshold }, Some(p)) => verify(cfg, &p, *what, *samples, *threshold),
        (Task::Invert { samples }, Some(p)) => invert(cfg, &p, *samples),
        (Task::Monodromy, Some(p)) => monodromy(cfg, &p),
        (Task::Sweep { grid, refine, band }, None) => sweep(cfg, grid, *refine, *band),
        _ => unreachable!("parameters are resolved for every task except sweep"),
    }
}

fn verify(cfg: &RunConfig, p: &Params, what: VerifyWhat, samples: usize, threshold: f64) -> CliResult<Artifact> {
    let pair = build_pair(cfg, p, Route::Riccati)?;
    let mut report = serde_json::Map::new();
    let mut worst = 0.0f64;
    if matches!(what, VerifyWhat::Identities | VerifyWhat::All) {
        let ids = check_identities(&pair, samples)?;
        worst = worst.max(ids.worst());
        report.insert("identities".into(), json!(ids));
    }
    if matches!(what, VerifyWhat::Opc | VerifyWhat::All) {
        let mut points = circle_samples(samples);
        points.extend(off_circle_samples());
        let mut opc = serde_json::Map::new();
        for branch in Branch::BOTH {
            let f = pair.get(branch);
            let r = if f.is_zero() {
                None
            } else {
                let r = involutivity_residual(p, &SolutionJet { params: *p, solution: f }, &points)?;
                worst = worst.max(r);
                Some(r)
            };
            opc.insert(branch.to_string(), json!(r));
        }
        opc.insert("samples".into(), json!(points.len()));
        report.insert("involutivity".into(), Value::Object(opc));
    }
    report.insert("worst".into(), json!(worst));
    report.insert("threshold".into(), json!(threshold));
    report.insert("pass".into(), json!(worst < threshold));
    let mut w = Writer::new(cfg, degeneracy_json(&pair))?;
    w.record(&report, String::new);
    let mut art = w.done();
    if !(worst < threshold) {
        art.failure = Some(format!("worst residual {worst:e} is not below {threshold:e}"));
    }
    Ok(art)
}

#[derive(Serialize)]
struct InverseRow {
    #[serde(flatten)]
    sample: InverseSample,
    phi_error: f64,
    #[serde(rename = "P_error")]
    p_error: f64,
    #[serde(rename = "Q_error")]
    q_error: f64,
}

fn invert(cfg: &RunConfig, p: &Params, samples: usize) -> CliResult<Artifact> {
    let pair = build_pair(cfg, p, Route::Riccati)?;
    let alpha = alpha_from_phi0(&pair, cfg.phi0)?;
    let grid = period_grid(p.omega, samples);
    let inv = invert_grid(&pair, alpha, &grid)?;
    let forward = solve_rsj(p, cfg.phi0, rsj::default_span(p), &cfg.rsj_tol)?;
    let mut w = Writer::new(cfg, json!({ "alpha": alpha.alpha }))?;
    w.csv_header("t,phi,P,Q,theta_re,theta_im,duality_residual,unimodularity_residual,phi_error,P_error,Q_error");
    for s in inv {
        let f = forward.sample(s.t)?;
        let row = InverseRow { sample: s, phi_error: (s.phi - f.phi).abs(), p_error: (s.p - f.p).abs(), q_error: (s.q - f.q).abs() };
        w.record(&row, || {
            [s.t, s.phi, s.p, s.q, s.theta_re, s.theta_im, s.duality_residual, s.unimodularity_residual, row.phi_error, row.p_error, row.q_error]
                .map(num)
                .join(",")
        });
    }
    Ok(w.done())
}

fn monodromy(cfg: &RunConfig, p: &Params) -> CliResult<Artifact> {
    let pair = build_pair(cfg, p, Route::Riccati)?;
    let closed = monodromy_closed_form(&pair)?;
    let cont = monodromy_continuation(p, &pair, &cfg.heun_tol)?;
    let normalized = cont.normalized(p);
    let classification = phase_lock(&normalized, DEFAULT_LOCK_TOL)?;
    let mut w = Writer::new(cfg, json!({}))?;
    let record = json!({
        "closed_form": closed,
        "continuation": cont,
        "normalized": normalized,
        "route_difference": max_abs_diff(&closed.m, &cont.m),
        "det": cont.det(),
        "trace": cont.trace(),
        "structure": normalized.structure(),
        "classification": classification,
        "lock_indicator": lock_indicator(&normalized),
    });
    w.record(&record, String::new);
    Ok(w.done())
}

fn sweep(cfg: &RunConfig, grid: &SweepConfig, refine: bool, band: f64) -> CliResult<Artifact> {
    let rows = run_sweep(grid, cfg.jobs)?;
    let mut w = Writer::new(cfg, json!({}))?;
    w.csv_header(CSV_HEADER);
    for r in &rows {
        w.record(r, || r.csv());
    }
    if refine {
        let medges = refine_edges(grid, &rows, Criterion::Monodromy, cfg.jobs)?;
        let redges = refine_edges(grid, &rows, Criterion::Rotation, cfg.jobs)?;
        let agreement = compare_criteria(&rows, &medges, &redges, band);
        let summary = json!({ "agreement": agreement, "fraction": agreement.fraction() });
        match cfg.format {
            Format::Json => w.line(&summary.to_string()),
            Format::Csv => w.line(&format!("# agreement: {summary}")),
        }
    }
    Ok(w.done())
}

fn emit(out: &Option<PathBuf>, text: &str) -> CliResult<()> {
    match out {
        Some(path) => std::fs::write(path, text).map_err(|e| CliError::Io(format!("{}: {e}", path.display()))),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes()).and_then(|_| stdout.flush()).map_err(|e| CliError::Io(e.to_string()))
        }
    }
}

fn report(err: &CliError) -> i32 {
    eprintln!("{}", err.to_json());
    err.exit_code()
}

/// Parse, run and write; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return 0;
        }
        Err(e) => {
            let flag = e.get(clap::error::ContextKind::InvalidArg).map(|v| v.to_string());
            let mut message = String::new();
            let _ = write!(message, "{}", e.render());
            return report(&CliError::Usage { flag, message: message.trim_end().to_string() });
        }
    };
    let result = RunConfig::from_cli(cli).and_then(|cfg| {
        let art = run(&cfg)?;
        emit(&cfg.out, &art.text)?;
        match art.failure {
            Some(msg) => Err(CliError::Check(msg)),
            None => Ok(()),
        }
    });
    match result {
        Ok(()) => 0,
        Err(e) => report(&e),
    }
}
