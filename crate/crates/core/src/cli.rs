//! Command-line runner: reports, verification suites, sweeps, regulator
//! studies and the thermal/quantum comparison.
//!
//! Exit codes: `0` success, `1` a verification or comparison failed, `2` bad
//! configuration or input, `3` numerical failure. Machine output goes to
//! `--out` or stdout; diagnostics go to stderr.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use crate::ensemble::{self, Classicality, EnsembleReport, HistorySpace};
use crate::freeparticle::{self, FreeParticleModel};
use crate::oscillatory::{self, RegulatorKind, RegulatorSpec};
use crate::stationarity;
use crate::thermo::{self, ThermalReport};
use crate::{complex_json, Error};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error(transparent)]
    Numerical(#[from] Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Io(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }
}

fn config<T>(msg: impl Into<String>) -> Result<T, CliError> {
    Err(CliError::Config(msg.into()))
}

#[derive(Debug, Parser)]
#[command(
    name = "quantropy",
    version,
    about = "Quantropy, expected action and free action of history ensembles"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: CommandArgs,
}

#[derive(Debug, Subcommand)]
pub enum CommandArgs {
    /// Compute (ln Z, <A>, Q, Φ) for a model.
    Report(CommonArgs),
    /// Run the verification suites.
    Verify(CommonArgs),
    /// Tabulate reports over a grid of hbar, n or beta.
    Sweep(CommonArgs),
    /// Regulator convergence study for the complex Gaussian integral.
    Limit(CommonArgs),
    /// Compare the quantum engine at real lambda with the thermal engine.
    Analogy(CommonArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Default, Args)]
pub struct CommonArgs {
    /// Model JSON file, or inline JSON starting with `{`.
    #[arg(long)]
    pub model: Option<String>,
    #[arg(long)]
    pub hbar: Option<f64>,
    /// Explicit classicality as `re,im`.
    #[arg(long, allow_hyphen_values = true)]
    pub lambda: Option<String>,
    #[arg(long)]
    pub beta: Option<f64>,
    /// `name=v1,v2,...`, `name=a..b` or `name=geom:start:end:count`.
    #[arg(long)]
    pub grid: Option<String>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    /// Tolerance override `name=value`; repeatable.
    #[arg(long = "tol")]
    pub tol: Vec<String>,
    /// Gaussian parameter alpha as `re,im` (limit).
    #[arg(long, allow_hyphen_values = true)]
    pub alpha: Option<String>,
    /// Regulator kind (limit).
    #[arg(long)]
    pub regulator: Option<String>,
    /// First cutoff M or damping epsilon (limit).
    #[arg(long)]
    pub start: Option<f64>,
    /// Number of regulator levels (limit).
    #[arg(long)]
    pub levels: Option<usize>,
    /// Multiply Feynman weights by 1 + f·noise in the stationarity suite (verify).
    #[arg(long)]
    pub perturb: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Report,
    Verify,
    Sweep,
    Limit,
    Analogy,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Model {
    FreeParticle(FreeParticleModel),
    Space(HistorySpace),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LambdaSpec {
    /// Use the model's own ℏ (free particle) or ℏ = 1.
    Default,
    Hbar(f64),
    Beta(f64),
    Explicit(Complex64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum GridVar {
    Hbar,
    N,
    Beta,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub var: GridVar,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LimitSpec {
    pub alpha: Complex64,
    pub regulator: RegulatorSpec,
}

/// A fully validated run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub command: Command,
    pub model: Model,
    pub lambda: LambdaSpec,
    pub grid: Option<Grid>,
    pub output: Option<PathBuf>,
    pub format: Format,
    pub seed: u64,
    pub tolerances: BTreeMap<String, f64>,
    pub perturb: Option<f64>,
    pub limit: LimitSpec,
}

/// Machine output plus exit code.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub text: String,
    pub exit_code: i32,
    /// Human-readable note for stderr.
    pub diagnostic: Option<String>,
}

impl RunOutput {
    fn ok(text: String) -> Self {
        RunOutput {
            text,
            exit_code: 0,
            diagnostic: None,
        }
    }
}

fn parse_complex(text: &str, what: &str) -> Result<Complex64, CliError> {
    let parts: Vec<&str> = text.split(',').map(str::trim).collect();
    let parsed: Option<Vec<f64>> = parts.iter().map(|p| p.parse::<f64>().ok()).collect();
    match parsed.as_deref() {
        Some([re]) => Ok(Complex64::new(*re, 0.0)),
        Some([re, im]) if re.is_finite() && im.is_finite() => Ok(Complex64::new(*re, *im)),
        _ => config(format!("--{what} expects `re,im`, got `{text}`")),
    }
}

/// Parse a model from JSON text: a history space if it has `histories`,
/// otherwise a free-particle config.
pub fn parse_model(text: &str) -> Result<Model, CliError> {
    let value: Value = serde_json::from_str(text).map_err(|e| CliError::Config(format!("model JSON: {e}")))?;
    if value.get("histories").is_some() {
        let space: HistorySpace =
            serde_json::from_value(value).map_err(|e| CliError::Config(format!("history space: {e}")))?;
        Ok(Model::Space(space))
    } else {
        let model: FreeParticleModel =
            serde_json::from_value(value).map_err(|e| CliError::Config(format!("free-particle model: {e}")))?;
        Ok(Model::FreeParticle(model))
    }
}

fn load_model(source: Option<&str>) -> Result<Model, CliError> {
    match source {
        None => Ok(Model::FreeParticle(FreeParticleModel::default())),
        Some(s) if s.trim_start().starts_with('{') => parse_model(s),
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Config(format!("cannot read model `{path}`: {e}")))?;
            parse_model(&text)
        }
    }
}

fn check_monotone(values: &[f64]) -> Result<(), CliError> {
    if values.is_empty() {
        return config("grid is empty");
    }
    if values.iter().any(|v| !v.is_finite()) {
        return config("grid values must be finite");
    }
    let up = values.windows(2).all(|w| w[1] > w[0]);
    let down = values.windows(2).all(|w| w[1] < w[0]);
    if !(up || down) {
        return config("grid must be strictly monotone");
    }
    Ok(())
}

/// Parse `name=v1,v2`, `name=a..b` (integer steps) or `name=geom:start:end:count`.
pub fn parse_grid(spec: &str) -> Result<Grid, CliError> {
    let (name, body) = spec
        .split_once('=')
        .ok_or_else(|| CliError::Config(format!("grid `{spec}` must look like name=values")))?;
    let var = match name.trim() {
        "hbar" => GridVar::Hbar,
        "n" => GridVar::N,
        "beta" => GridVar::Beta,
        other => return config(format!("unknown grid variable `{other}` (hbar, n or beta)")),
    };
    let body = body.trim();
    let bad = || CliError::Config(format!("cannot parse grid values `{body}`"));
    let values: Vec<f64> = if let Some(rest) = body.strip_prefix("geom:") {
        let parts: Vec<&str> = rest.split(':').collect();
        let [a, b, k] = parts.as_slice() else { return Err(bad()) };
        let a: f64 = a.parse().map_err(|_| bad())?;
        let b: f64 = b.parse().map_err(|_| bad())?;
        let k: usize = k.parse().map_err(|_| bad())?;
        if !(a > 0.0 && b > 0.0) || k == 0 {
            return Err(bad());
        }
        if k == 1 {
            vec![a]
        } else {
            let ratio = (b / a).ln() / (k - 1) as f64;
            (0..k).map(|i| a * (ratio * i as f64).exp()).collect()
        }
    } else if let Some((a, b)) = body.split_once("..") {
        let a: i64 = a.trim().parse().map_err(|_| bad())?;
        let b: i64 = b.trim().parse().map_err(|_| bad())?;
        if b < a {
            return config(format!("grid range `{body}` is empty"));
        }
        (a..=b).map(|v| v as f64).collect()
    } else if body.is_empty() {
        Vec::new()
    } else {
        body.split(',')
            .map(|v| v.trim().parse::<f64>().map_err(|_| bad()))
            .collect::<Result<_, _>>()?
    };
    check_monotone(&values)?;
    match var {
        GridVar::N => {
            if values.iter().any(|v| *v < 1.0 || v.fract() != 0.0) {
                return config("grid n values must be positive integers");
            }
        }
        GridVar::Hbar | GridVar::Beta => {
            if values.iter().any(|v| *v <= 0.0) {
                return config("grid hbar/beta values must be positive");
            }
        }
    }
    Ok(Grid { var, values })
}

const TOLERANCE_NAMES: [&str; 9] = [
    "residual",
    "linear",
    "identity",
    "derivative",
    "factorization",
    "cross_engine",
    "damping",
    "cutoff",
    "limit",
];

fn default_tolerances() -> BTreeMap<String, f64> {
    [
        ("residual", 1e-11),
        ("linear", 1e-8),
        ("identity", 1e-10),
        ("derivative", 1e-6),
        ("factorization", 1e-9),
        ("cross_engine", 1e-12),
        ("damping", 1e-4),
        ("cutoff", 1e-3),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_string(), v))
    .collect()
}

impl RunConfig {
    pub fn from_args(command: Command, args: CommonArgs) -> Result<Self, CliError> {
        let model = load_model(args.model.as_deref())?;
        let picked = [args.hbar.is_some(), args.beta.is_some(), args.lambda.is_some()]
            .iter()
            .filter(|b| **b)
            .count();
        if picked > 1 {
            return config("give at most one of --hbar, --beta, --lambda");
        }
        let lambda = if let Some(h) = args.hbar {
            Classicality::quantum(h).map_err(|e| CliError::Config(e.to_string()))?;
            LambdaSpec::Hbar(h)
        } else if let Some(b) = args.beta {
            Classicality::thermal(b).map_err(|e| CliError::Config(e.to_string()))?;
            LambdaSpec::Beta(b)
        } else if let Some(text) = &args.lambda {
            let l = parse_complex(text, "lambda")?;
            Classicality::new(l).map_err(|e| CliError::Config(e.to_string()))?;
            LambdaSpec::Explicit(l)
        } else {
            LambdaSpec::Default
        };
        let grid = args.grid.as_deref().map(parse_grid).transpose()?;
        if command == Command::Sweep && grid.is_none() {
            return config("sweep needs --grid");
        }
        let mut tolerances = default_tolerances();
        for item in &args.tol {
            let (name, value) = item
                .split_once('=')
                .ok_or_else(|| CliError::Config(format!("--tol expects name=value, got `{item}`")))?;
            if !TOLERANCE_NAMES.contains(&name) {
                return config(format!(
                    "unknown tolerance `{name}`; known: {}",
                    TOLERANCE_NAMES.join(", ")
                ));
            }
            let v: f64 = value
                .parse()
                .ok()
                .filter(|v: &f64| v.is_finite() && *v > 0.0)
                .ok_or_else(|| CliError::Config(format!("tolerance `{name}` must be a positive number")))?;
            tolerances.insert(name.to_string(), v);
        }
        let alpha = match &args.alpha {
            Some(text) => parse_complex(text, "alpha")?,
            None => Complex64::new(0.0, 1.0),
        };
        let kind: RegulatorKind = match &args.regulator {
            Some(k) => k.parse().map_err(CliError::Config)?,
            None => RegulatorKind::Damping,
        };
        let levels = args.levels.unwrap_or(4);
        let mut regulator = match kind {
            RegulatorKind::Damping => RegulatorSpec::damping(args.start.unwrap_or(1e-2), levels),
            RegulatorKind::Cutoff => RegulatorSpec::cutoff(args.start.unwrap_or(50.0), levels),
        };
        if let Some(t) = tolerances.get("limit") {
            regulator.tolerance = *t;
        }
        regulator.validate().map_err(|e| CliError::Config(e.to_string()))?;
        if let Some(p) = args.perturb {
            if !(0.0..1.0).contains(&p) {
                return config("--perturb must lie in [0, 1)");
            }
        }
        let format = args.format.unwrap_or(match command {
            Command::Sweep | Command::Limit => Format::Csv,
            _ => Format::Json,
        });
        Ok(RunConfig {
            command,
            model,
            lambda,
            grid,
            output: args.out,
            format,
            seed: args.seed,
            tolerances,
            perturb: args.perturb,
            limit: LimitSpec { alpha, regulator },
        })
    }

    fn tolerance(&self, name: &str) -> f64 {
        self.tolerances[name]
    }
}

fn classicality_for(model: &Model, spec: LambdaSpec) -> Result<Classicality, CliError> {
    let out = match spec {
        LambdaSpec::Hbar(h) => Classicality::quantum(h),
        LambdaSpec::Beta(b) => Classicality::thermal(b),
        LambdaSpec::Explicit(l) => Classicality::new(l),
        LambdaSpec::Default => match model {
            Model::FreeParticle(m) => Ok(m.classicality()),
            Model::Space(_) => Classicality::quantum(1.0),
        },
    };
    out.map_err(|e| CliError::Config(e.to_string()))
}

/// Thermal counterpart of a real-λ free-particle report (energy `Σ m v² Δt/2`).
fn free_particle_thermal(report: &EnsembleReport) -> ThermalReport {
    ThermalReport {
        log_z: report.log_z.re,
        expected_energy: report.expected_action.re,
        entropy: report.quantropy.re,
        free_energy: report.free_action.re,
        beta: report.lambda.lambda().re,
    }
}

#[derive(Serialize)]
struct ReportJson {
    model: &'static str,
    #[serde(with = "complex_json")]
    lambda: Complex64,
    #[serde(skip_serializing_if = "Option::is_none")]
    hbar: Option<f64>,
    #[serde(with = "complex_json")]
    log_z: Complex64,
    #[serde(with = "complex_json")]
    expected_action: Complex64,
    #[serde(with = "complex_json")]
    quantropy: Complex64,
    #[serde(with = "complex_json")]
    free_action: Complex64,
    #[serde(skip_serializing_if = "Option::is_none")]
    thermal: Option<ThermalReport>,
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable output");
    s.push('\n');
    s
}

pub fn run_report(cfg: &RunConfig) -> Result<RunOutput, CliError> {
    let lambda = classicality_for(&cfg.model, cfg.lambda)?;
    let (kind, report, thermal) = match &cfg.model {
        Model::FreeParticle(m) => {
            let m = match cfg.lambda {
                LambdaSpec::Hbar(h) => m.with_hbar(h)?,
                _ => *m,
            };
            let r = freeparticle::closed_report(&m, &lambda);
            let thermal = lambda.is_real().then(|| free_particle_thermal(&r));
            ("free_particle", r, thermal)
        }
        Model::Space(s) => {
            let r = ensemble::report(s, &lambda)?;
            let thermal = if lambda.is_real() {
                Some(thermo::boltzmann_report(s, lambda.lambda().re)?)
            } else {
                None
            };
            ("history_space", r, thermal)
        }
    };
    let text = match cfg.format {
        Format::Json => to_json(&ReportJson {
            model: kind,
            lambda: lambda.lambda(),
            hbar: lambda.hbar(),
            log_z: report.log_z,
            expected_action: report.expected_action,
            quantropy: report.quantropy,
            free_action: report.free_action,
            thermal,
        }),
        Format::Csv => {
            let mut s = String::from("quantity,re,im\n");
            for (name, z) in [
                ("lambda", lambda.lambda()),
                ("log_z", report.log_z),
                ("expected_action", report.expected_action),
                ("quantropy", report.quantropy),
                ("free_action", report.free_action),
            ] {
                writeln!(s, "{name},{},{}", z.re, z.im).unwrap();
            }
            if let Some(t) = thermal {
                for (name, v) in [
                    ("thermal_log_z", t.log_z),
                    ("expected_energy", t.expected_energy),
                    ("entropy", t.entropy),
                    ("free_energy", t.free_energy),
                ] {
                    writeln!(s, "{name},{v},0").unwrap();
                }
            }
            s
        }
    };
    Ok(RunOutput::ok(text))
}

/// One measured quantity against its tolerance.
#[derive(Debug, Clone, Serialize)]
struct Check {
    name: String,
    measured: f64,
    tolerance: f64,
    passed: bool,
}

#[derive(Debug, Clone, Serialize)]
struct Suite {
    name: &'static str,
    passed: bool,
    checks: Vec<Check>,
    #[serde(skip_serializing_if = "Option::is_none")]
    details: Option<Value>,
}

impl Suite {
    fn new(name: &'static str, checks: Vec<Check>, details: Option<Value>) -> Self {
        let passed = checks.iter().all(|c| c.passed);
        Suite {
            name,
            passed,
            checks,
            details,
        }
    }
}

fn check(name: &str, measured: f64, tolerance: f64) -> Check {
    Check {
        name: name.to_string(),
        measured,
        tolerance,
        passed: measured <= tolerance,
    }
}

fn random_space(rng: &mut ChaCha8Rng, min_len: usize, max_len: usize) -> HistorySpace {
    let n = rng.random_range(min_len..=max_len);
    let w: Vec<f64> = (0..n).map(|_| rng.random_range(0.2..2.0)).collect();
    let a: Vec<f64> = (0..n).map(|_| rng.random_range(-3.0..3.0)).collect();
    HistorySpace::from_weights_and_actions(&w, &a).expect("valid random space")
}

fn random_lambda(rng: &mut ChaCha8Rng, i: usize) -> Classicality {
    match i % 3 {
        0 => Classicality::thermal(rng.random_range(0.2..2.0)),
        1 => Classicality::quantum(rng.random_range(0.25..4.0)),
        _ => Classicality::new(Complex64::new(rng.random_range(0.1..1.0), rng.random_range(-2.0..2.0))),
    }
    .expect("admissible random lambda")
}

const VERIFY_SPACES: usize = 20;
const VERIFY_TRIALS: usize = 6;

fn stationarity_suite(cfg: &RunConfig) -> Result<Suite, Error> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut residual_max: f64 = 0.0;
    let mut linear_max: f64 = 0.0;
    for i in 0..VERIFY_SPACES {
        let space = random_space(&mut rng, 3, 32);
        let lambda = random_lambda(&mut rng, i);
        let ens = match cfg.perturb {
            Some(p) => stationarity::perturbed_ensemble(&space, &lambda, p, cfg.seed.wrapping_add(i as u64))?,
            None => ensemble::feynman_weights(&space, &lambda)?,
        };
        let v = stationarity::verify_ensemble(
            &ens,
            &lambda,
            VERIFY_TRIALS,
            stationarity::DEFAULT_STEP,
            cfg.seed.wrapping_add(1000 + i as u64),
        )?;
        residual_max = residual_max.max(v.residual_max);
        linear_max = linear_max.max(v.linear_coeff_max);
    }
    let details = json!({
        "residual_max": residual_max,
        "linear_coeff_max": linear_max,
        "trials": VERIFY_TRIALS * VERIFY_SPACES,
        "seed": cfg.seed,
    });
    Ok(Suite::new(
        "stationarity",
        vec![
            check("residual", residual_max, cfg.tolerance("residual")),
            check("linear", linear_max, cfg.tolerance("linear")),
        ],
        Some(details),
    ))
}

fn identity_suite(cfg: &RunConfig) -> Result<Suite, Error> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x1d);
    let mut q_max: f64 = 0.0;
    let mut phi_max: f64 = 0.0;
    let mut deriv_max: f64 = 0.0;
    for i in 0..VERIFY_SPACES {
        let space = random_space(&mut rng, 1, 64);
        let lambda = random_lambda(&mut rng, i);
        let r = ensemble::report(&space, &lambda)?;
        let (q, phi) = r.identity_residuals();
        q_max = q_max.max(q);
        phi_max = phi_max.max(phi);
        let d = ensemble::expected_action_via_derivative(&space, &lambda, ensemble::DEFAULT_DERIVATIVE_STEP)?;
        deriv_max = deriv_max.max((d - r.expected_action).norm() / (1.0 + r.expected_action.norm()));
    }
    for n in [1usize, 4, 16] {
        let m = FreeParticleModel::default().with_steps(n)?;
        let r = freeparticle::closed_report(&m, &m.classicality());
        let (q, phi) = r.identity_residuals();
        q_max = q_max.max(q);
        phi_max = phi_max.max(phi);
    }
    Ok(Suite::new(
        "identity",
        vec![
            check("quantropy_identity", q_max, cfg.tolerance("identity")),
            check("free_action_identity", phi_max, cfg.tolerance("identity")),
            check("derivative", deriv_max, cfg.tolerance("derivative")),
        ],
        None,
    ))
}

fn factorization_suite(cfg: &RunConfig) -> Result<Suite, Error> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0xfac);
    let mut action_max: f64 = 0.0;
    let mut winding_max: f64 = 0.0;
    let mut wraps = 0i64;
    for i in 0..VERIFY_SPACES {
        let s1 = random_space(&mut rng, 1, 8);
        let s2 = random_space(&mut rng, 1, 8);
        let lambda = random_lambda(&mut rng, i);
        let p = ensemble::product_space(&s1, &s2)?;
        let (r1, r2, rp) = (
            ensemble::report(&s1, &lambda)?,
            ensemble::report(&s2, &lambda)?,
            ensemble::report(&p, &lambda)?,
        );
        action_max = action_max.max((rp.expected_action - r1.expected_action - r2.expected_action).norm());
        let (k, residual) = ensemble::winding(rp.quantropy - r1.quantropy - r2.quantropy);
        winding_max = winding_max.max(residual);
        wraps += k.abs();
    }
    Ok(Suite::new(
        "factorization",
        vec![
            check("expected_action_additivity", action_max, cfg.tolerance("factorization")),
            check("quantropy_winding", winding_max, cfg.tolerance("factorization")),
        ],
        Some(json!({ "branch_wraps": wraps })),
    ))
}

fn cross_engine_suite(cfg: &RunConfig) -> Result<Suite, Error> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0xc055);
    let mut gap: f64 = 0.0;
    for _ in 0..VERIFY_SPACES {
        let space = random_space(&mut rng, 1, 16);
        for beta in [0.1, 1.0, 10.0] {
            gap = gap.max(thermo::analogy_discrepancy(&space, beta)?);
        }
    }
    Ok(Suite::new(
        "cross_engine",
        vec![check("field_gap", gap, cfg.tolerance("cross_engine"))],
        None,
    ))
}

fn regulator_suite(cfg: &RunConfig) -> Result<Suite, Error> {
    let alpha = Complex64::new(0.0, 1.0);
    let exact = oscillatory::gaussian_closed_form(alpha)?;
    let damped = oscillatory::gaussian_regularized(alpha, &RegulatorSpec::damping(1e-2, 4))?;
    let cut = oscillatory::gaussian_regularized(alpha, &RegulatorSpec::cutoff(50.0, 4))?;
    let agreement = (damped.value - cut.value).norm();
    let bars = damped.error_estimate + cut.error_estimate;
    Ok(Suite::new(
        "regulator",
        vec![
            check("damping_error", (damped.value - exact).norm(), cfg.tolerance("damping")),
            check("cutoff_error", (cut.value - exact).norm(), cfg.tolerance("cutoff")),
            check("regulator_agreement", agreement, bars),
        ],
        None,
    ))
}

pub fn run_verify(cfg: &RunConfig) -> Result<RunOutput, CliError> {
    let suites = vec![
        stationarity_suite(cfg)?,
        identity_suite(cfg)?,
        factorization_suite(cfg)?,
        cross_engine_suite(cfg)?,
        regulator_suite(cfg)?,
    ];
    let failed: Vec<&str> = suites.iter().filter(|s| !s.passed).map(|s| s.name).collect();
    let passed = failed.is_empty();
    let text = match cfg.format {
        Format::Json => to_json(&json!({ "seed": cfg.seed, "passed": passed, "suites": suites })),
        Format::Csv => {
            let mut s = String::from("suite,check,measured,tolerance,passed\n");
            for suite in &suites {
                for c in &suite.checks {
                    writeln!(
                        s,
                        "{},{},{:e},{:e},{}",
                        suite.name, c.name, c.measured, c.tolerance, c.passed
                    )
                    .unwrap();
                }
            }
            s
        }
    };
    let diagnostic = (!passed).then(|| format!("verification failed: {}", failed.join(", ")));
    Ok(RunOutput {
        text,
        exit_code: if passed { 0 } else { 1 },
        diagnostic,
    })
}

pub const SWEEP_COLUMNS: [&str; 13] = [
    "n",
    "hbar",
    "lambda_re",
    "lambda_im",
    "lnZ_re",
    "lnZ_im",
    "EA_re",
    "EA_im",
    "Q_re",
    "Q_im",
    "Phi_re",
    "Phi_im",
    "error",
];

#[derive(Debug, Clone, Serialize)]
struct SweepRow {
    n: Option<usize>,
    hbar: Option<f64>,
    #[serde(with = "complex_json")]
    lambda: Complex64,
    report: Option<EnsembleReport>,
    error: Option<String>,
}

fn sweep_point(cfg: &RunConfig, var: GridVar, value: f64) -> Result<SweepRow, CliError> {
    let (n, hbar, lambda, result) = match (&cfg.model, var) {
        (Model::FreeParticle(base), GridVar::Hbar) => {
            let m = base.with_hbar(value)?;
            let l = m.classicality();
            (Some(m.n), Some(value), l, Ok(freeparticle::closed_report(&m, &l)))
        }
        (Model::FreeParticle(base), GridVar::N) => {
            let m = base.with_steps(value as usize)?;
            let m = match cfg.lambda {
                LambdaSpec::Hbar(h) => m.with_hbar(h)?,
                _ => m,
            };
            let l = classicality_for(&Model::FreeParticle(m), cfg.lambda)?;
            (Some(m.n), l.hbar(), l, Ok(freeparticle::closed_report(&m, &l)))
        }
        (Model::FreeParticle(base), GridVar::Beta) => {
            let l = Classicality::thermal(value)?;
            (Some(base.n), None, l, Ok(freeparticle::closed_report(base, &l)))
        }
        (Model::Space(s), GridVar::Hbar) => {
            let l = Classicality::quantum(value)?;
            (None, Some(value), l, ensemble::report(s, &l))
        }
        (Model::Space(s), GridVar::Beta) => {
            let l = Classicality::thermal(value)?;
            (None, None, l, ensemble::report(s, &l))
        }
        (Model::Space(_), GridVar::N) => return config("an n grid needs a free-particle model"),
    };
    let (report, error) = match result {
        Ok(r) => (Some(r), None),
        Err(e) => (None, Some(e.to_string())),
    };
    Ok(SweepRow {
        n,
        hbar,
        lambda: lambda.lambda(),
        report,
        error,
    })
}

pub fn run_sweep(cfg: &RunConfig) -> Result<RunOutput, CliError> {
    let grid = cfg
        .grid
        .as_ref()
        .ok_or_else(|| CliError::Config("sweep needs --grid".into()))?;
    let rows: Vec<SweepRow> = grid
        .values
        .par_iter()
        .map(|v| sweep_point(cfg, grid.var, *v))
        .collect::<Result<_, _>>()?;
    let failures = rows.iter().filter(|r| r.error.is_some()).count();
    let text = match cfg.format {
        Format::Json => to_json(&rows),
        Format::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(SWEEP_COLUMNS).map_err(|e| CliError::Io(e.into()))?;
            let opt = |v: Option<String>| v.unwrap_or_default();
            for r in &rows {
                let mut rec = vec![opt(r.n.map(|n| n.to_string())), opt(r.hbar.map(|h| h.to_string()))];
                rec.push(r.lambda.re.to_string());
                rec.push(r.lambda.im.to_string());
                match &r.report {
                    Some(rep) => {
                        for z in [rep.log_z, rep.expected_action, rep.quantropy, rep.free_action] {
                            rec.push(z.re.to_string());
                            rec.push(z.im.to_string());
                        }
                    }
                    None => rec.extend(std::iter::repeat_n(String::new(), 8)),
                }
                rec.push(r.error.clone().unwrap_or_default());
                w.write_record(&rec).map_err(|e| CliError::Io(e.into()))?;
            }
            String::from_utf8(w.into_inner().map_err(|e| CliError::Io(e.into_error()))?).expect("csv output is utf-8")
        }
    };
    let diagnostic = (failures > 0).then(|| format!("{failures} grid point(s) failed; see the error column"));
    Ok(RunOutput {
        text,
        exit_code: 0,
        diagnostic,
    })
}

pub fn run_limit(cfg: &RunConfig) -> Result<RunOutput, CliError> {
    let alpha = cfg.limit.alpha;
    let study = oscillatory::gaussian_regularized(alpha, &cfg.limit.regulator)?;
    let text = match cfg.format {
        Format::Csv => {
            let mut buf = Vec::new();
            oscillatory::write_convergence_csv(alpha, &study, &mut buf)?;
            String::from_utf8(buf).expect("csv output is utf-8")
        }
        Format::Json => {
            let exact = oscillatory::gaussian_closed_form(alpha)?;
            to_json(&json!({
                "alpha": { "re": alpha.re, "im": alpha.im },
                "closed_form": { "re": exact.re, "im": exact.im },
                "study": study,
            }))
        }
    };
    Ok(RunOutput::ok(text))
}

pub fn run_analogy(cfg: &RunConfig) -> Result<RunOutput, CliError> {
    let beta = match cfg.lambda {
        LambdaSpec::Beta(b) => b,
        LambdaSpec::Default => 1.0,
        _ => return config("analogy takes --beta"),
    };
    let lambda = thermo::analogy_substitution(beta)?;
    let (body, agrees) = match &cfg.model {
        Model::Space(space) => {
            let thermal = thermo::boltzmann_report(space, beta)?;
            let quantum = ensemble::report(space, &lambda)?;
            let gap = thermo::analogy_discrepancy(space, beta)?;
            let agrees = gap <= thermo::ANALOGY_TOL;
            (
                json!({ "beta": beta, "thermal": thermal, "quantum": quantum, "discrepancy": gap, "agrees": agrees }),
                agrees,
            )
        }
        Model::FreeParticle(m) => {
            // n velocity modes at λ = β against an n-mode ideal gas at T = 1/β
            let quantum = freeparticle::closed_report(m, &lambda);
            let gas = thermo::ideal_gas_expected_energy(m.n, 1, 1.0 / beta);
            let gap = (quantum.expected_action - gas).norm();
            let agrees = gap <= thermo::ANALOGY_TOL;
            (
                json!({ "beta": beta, "quantum": quantum, "ideal_gas_expected_energy": gas, "discrepancy": gap, "agrees": agrees }),
                agrees,
            )
        }
    };
    let text = to_json(&body);
    Ok(RunOutput {
        text,
        exit_code: if agrees { 0 } else { 1 },
        diagnostic: (!agrees).then(|| "quantum and thermal engines disagree".to_string()),
    })
}

pub fn run(cfg: &RunConfig) -> Result<RunOutput, CliError> {
    match cfg.command {
        Command::Report => run_report(cfg),
        Command::Verify => run_verify(cfg),
        Command::Sweep => run_sweep(cfg),
        Command::Limit => run_limit(cfg),
        Command::Analogy => run_analogy(cfg),
    }
}

/// Parse, run and write output; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let (command, common) = match cli.command {
        CommandArgs::Report(a) => (Command::Report, a),
        CommandArgs::Verify(a) => (Command::Verify, a),
        CommandArgs::Sweep(a) => (Command::Sweep, a),
        CommandArgs::Limit(a) => (Command::Limit, a),
        CommandArgs::Analogy(a) => (Command::Analogy, a),
    };
    let outcome = RunConfig::from_args(command, common).and_then(|cfg| {
        let out = run(&cfg)?;
        match &cfg.output {
            Some(path) => std::fs::write(path, &out.text)?,
            None => print!("{}", out.text),
        }
        Ok(out)
    });
    match outcome {
        Ok(out) => {
            if let Some(d) = out.diagnostic {
                eprintln!("{d}");
            }
            out.exit_code
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
