//! The four CLI commands. Each returns a [`CliError`] carrying the exit code
//! on failure and writes human-readable progress to `log`.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde_json::{json, Value};

use qhomog_core::analysis::linear_fit;
use qhomog_core::lindblad::GkslSpec;
use qhomog_core::models::{self, naive_growth_rate, Diagnostics, ModelSpec, Regime, Severity};
use qhomog_core::Error as CoreError;

use crate::config::{Config, ConfigError};
use crate::ensemble::{self, EnsembleError, EnsembleResult};
use crate::output;
use crate::sweep;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("validation failed:\n{0}")]
    Validation(String),
    #[error("numerical guard: {0}")]
    Numerical(String),
    #[error("I/O error: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::Validation(_) => 1,
            CliError::Numerical(_) => 2,
            CliError::Io(_) => 3,
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

fn is_guard(e: &CoreError) -> bool {
    matches!(
        e,
        CoreError::StepTooLarge { .. }
            | CoreError::ToleranceBreach { .. }
            | CoreError::NonFinite(_)
            | CoreError::NoiseOutOfRange(_)
            | CoreError::DegenerateState
            | CoreError::NonRealExpectation { .. }
    )
}

impl From<EnsembleError> for CliError {
    fn from(e: EnsembleError) -> Self {
        let guard = match &e {
            EnsembleError::Trajectory { source, .. } | EnsembleError::Core(source) => {
                is_guard(source)
            }
            _ => false,
        };
        if guard {
            CliError::Numerical(e.to_string())
        } else {
            CliError::Config(e.to_string())
        }
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        EnsembleError::Core(e).into()
    }
}

pub type Result<T> = std::result::Result<T, CliError>;

#[derive(Debug, Clone, Default)]
pub struct Options {
    pub config: PathBuf,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub workers: Option<usize>,
}

struct Loaded {
    text: String,
    config: Config,
    seed: u64,
    workers: Option<usize>,
}

fn load(opts: &Options) -> Result<Loaded> {
    let text = std::fs::read_to_string(&opts.config)
        .map_err(|e| CliError::Io(format!("{}: {e}", opts.config.display())))?;
    let config = Config::parse(&text)?;
    let seed = opts.seed.unwrap_or(config.ensemble.master_seed);
    let workers = opts.workers.or(config.ensemble.workers);
    if workers == Some(0) {
        return Err(CliError::Config("workers: must be at least 1".into()));
    }
    if config.ensemble.trajectories == 0 {
        return Err(CliError::Config(
            "ensemble.trajectories: must be at least 1".into(),
        ));
    }
    Ok(Loaded {
        text,
        config,
        seed,
        workers,
    })
}

fn out_dir(opts: &Options) -> Result<&Path> {
    let dir = opts
        .out
        .as_deref()
        .ok_or_else(|| CliError::Config("--out is required for this command".into()))?;
    std::fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
    Ok(dir)
}

fn with_workers<T: Send>(workers: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match workers {
        None => Ok(f()),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| CliError::Config(format!("workers: {e}")))?;
            Ok(pool.install(f))
        }
    }
}

fn severity_label(s: Severity) -> &'static str {
    match s {
        Severity::Ok => "ok",
        Severity::Warning => "warning",
        Severity::Error => "error",
    }
}

fn diagnostics_json(d: &Diagnostics) -> Value {
    Value::Array(
        d.checks
            .iter()
            .map(|c| {
                json!({
                    "name": c.name,
                    "severity": severity_label(c.severity),
                    "value": c.value,
                    "message": c.message,
                })
            })
            .collect(),
    )
}

fn require_valid(model: &ModelSpec, log: &mut dyn Write) -> Result<Diagnostics> {
    let diag = models::validate(model);
    for w in diag.warnings() {
        writeln!(log, "warning: {}", w.message)?;
    }
    if !diag.passed() {
        let msgs: Vec<String> = diag
            .errors()
            .map(|c| format!("  {}: {}", c.name, c.message))
            .collect();
        return Err(CliError::Validation(msgs.join("\n")));
    }
    Ok(diag)
}

fn config_echo(loaded: &Loaded) -> Value {
    serde_json::to_value(&loaded.config).unwrap_or(Value::Null)
}

fn distances_json(ds: &[ensemble::Distance]) -> Value {
    Value::Array(
        ds.iter()
            .map(|d| json!({"time": d.time, "trace_distance": d.distance, "stderr": d.stderr}))
            .collect(),
    )
}

/// Prints every structural check; fails with exit code 1 if a hard check
/// fails.
pub fn cmd_validate(opts: &Options, log: &mut dyn Write) -> Result<Diagnostics> {
    let loaded = load(opts)?;
    let model = loaded.config.model()?;
    loaded.config.integration_for(model.regime)?;
    loaded.config.observables()?;
    loaded.config.initial_state()?;
    let diag = models::validate(&model);
    for c in &diag.checks {
        writeln!(
            log,
            "[{}] {}: {}",
            severity_label(c.severity),
            c.name,
            c.message
        )?;
    }
    if let Some(dir) = &opts.out {
        std::fs::create_dir_all(dir)?;
        output::write_json(
            &dir.join("validation.json"),
            &json!({
                "regime": model.regime.name(),
                "passed": diag.passed(),
                "checks": diagnostics_json(&diag),
            }),
        )?;
    }
    if !diag.passed() {
        let msgs: Vec<String> = diag
            .errors()
            .map(|c| format!("  {}: {}", c.name, c.message))
            .collect();
        return Err(CliError::Validation(msgs.join("\n")));
    }
    writeln!(
        log,
        "model is valid ({} warning(s))",
        diag.warnings().count()
    )?;
    Ok(diag)
}

/// Runs one ensemble in the configured regime.
pub fn cmd_run(opts: &Options, log: &mut dyn Write) -> Result<EnsembleResult> {
    let started = Instant::now();
    let loaded = load(opts)?;
    let cfg = &loaded.config;
    let model = cfg.model()?;
    let diag = require_valid(&model, log)?;
    let psi0 = cfg.initial_state()?;
    let integration = cfg.integration_for(model.regime)?;
    let observables = cfg.observables()?;
    let dir = out_dir(opts)?;

    let result = with_workers(loaded.workers, || {
        ensemble::run_batched(
            &model,
            &psi0,
            &integration,
            &observables,
            cfg.ensemble.trajectories,
            loaded.seed,
            cfg.batches(),
        )
    })??;
    let master = ensemble::compare_to_master(&result, &GkslSpec::from_model(&model)?)?;

    output::write_observables(&dir.join("observables.csv"), &result)?;
    output::write_rho(&dir.join("rho.json"), &result)?;
    output::write_norms(&dir.join("norms.csv"), &result)?;
    output::write_json(
        &dir.join("summary.json"),
        &json!({
            "command": "run",
            "regime": model.regime.name(),
            "master_seed": loaded.seed,
            "trajectories": result.trajectories,
            "batches": result.batches(),
            "workers": loaded.workers,
            "dt": integration.dt,
            "wall_time_seconds": started.elapsed().as_secs_f64(),
            "distance_to_master": distances_json(&master),
            "diagnostics": diagnostics_json(&diag),
            "config": config_echo(&loaded),
            "config_text": loaded.text,
        }),
    )?;
    writeln!(
        log,
        "{} trajectories of {} written to {}",
        result.trajectories,
        model.regime.name(),
        dir.display()
    )?;
    Ok(result)
}

/// Fixed-diffusion tau sweep of the colored model against its GKSL limit.
pub fn cmd_sweep(opts: &Options, log: &mut dyn Write) -> Result<sweep::SweepTable> {
    let started = Instant::now();
    let loaded = load(opts)?;
    let (taus, settings) = loaded.config.sweep_settings(loaded.seed)?;
    let mut cfg = loaded.config.clone();
    for ch in &mut cfg.channels {
        ch.tau.get_or_insert(taus[0]);
    }
    let template = cfg.model_in(Regime::Colored)?;
    require_valid(&template, log)?;
    let psi0 = cfg.initial_state()?;
    let observables = cfg.observables()?;
    let reference = GkslSpec::from_model(&template)?;
    let dir = out_dir(opts)?;

    let table = with_workers(loaded.workers, || {
        sweep::tau_sweep(&template, &taus, &reference, &psi0, &settings, &observables)
    })??;

    output::write_sweep(&dir.join("sweep.csv"), &table)?;
    let fit = match &table.fit {
        Some(f) => json!({
            "time": f.time,
            "order": f.fit.slope,
            "intercept": f.fit.intercept,
            "residuals": f.fit.residuals,
            "taus": taus,
        }),
        None => json!({
            "order": Value::Null,
            "reason": if taus.len() < 2 { "fewer than two taus" } else { "non-positive distance" },
            "taus": taus,
        }),
    };
    output::write_json(&dir.join("fit.json"), &fit)?;
    output::write_json(
        &dir.join("summary.json"),
        &json!({
            "command": "sweep",
            "master_seed": loaded.seed,
            "trajectories": settings.trajectories,
            "steps_per_tau": settings.steps_per_tau,
            "workers": loaded.workers,
            "wall_time_seconds": started.elapsed().as_secs_f64(),
            "config": config_echo(&loaded),
            "config_text": loaded.text,
        }),
    )?;
    writeln!(
        log,
        "{} sweep rows written to {}",
        table.rows.len(),
        dir.display()
    )?;
    Ok(table)
}

#[derive(Debug, Clone)]
pub struct CompareOutcome {
    pub results: Vec<(Regime, EnsembleResult)>,
    pub naive_growth: Option<Value>,
}

/// Runs every listed regime on the same seeds and reports pairwise trace
/// distances and distances to the GKSL reference.
pub fn cmd_compare(opts: &Options, log: &mut dyn Write) -> Result<CompareOutcome> {
    let started = Instant::now();
    let loaded = load(opts)?;
    let cfg = &loaded.config;
    let regimes = cfg.compare_regimes()?;
    let psi0 = cfg.initial_state()?;
    let observables = cfg.observables()?;
    let dir = out_dir(opts)?;

    let mut results = Vec::new();
    let mut models = Vec::new();
    for &regime in &regimes {
        let model = cfg.model_in(regime)?;
        require_valid(&model, log)?;
        let integration = cfg.integration_for(regime)?;
        let result = with_workers(loaded.workers, || {
            ensemble::run_batched(
                &model,
                &psi0,
                &integration,
                &observables,
                cfg.ensemble.trajectories,
                loaded.seed,
                cfg.batches(),
            )
        })??;
        let name = regime.name();
        output::write_observables(&dir.join(format!("observables_{name}.csv")), &result)?;
        output::write_norms(&dir.join(format!("norms_{name}.csv")), &result)?;
        output::write_rho(&dir.join(format!("rho_{name}.json")), &result)?;
        models.push(model);
        results.push((regime, result));
    }

    let mut rows = Vec::new();
    for i in 0..results.len() {
        for j in i + 1..results.len() {
            let d = ensemble::paired_distances(&results[i].1, &results[j].1)?;
            rows.push((
                results[i].0.name().to_string(),
                results[j].0.name().to_string(),
                d,
            ));
        }
    }
    for ((regime, result), model) in results.iter().zip(&models) {
        let d = ensemble::compare_to_master(result, &GkslSpec::from_model(model)?)?;
        rows.push((regime.name().to_string(), "gksl".to_string(), d));
    }
    output::write_distances(&dir.join("distances.csv"), &rows)?;

    let naive_growth = match regimes.iter().position(|r| *r == Regime::NaiveItoWhite) {
        Some(k) => Some(naive_diagnostic(cfg, &models[k], &results[k].1, &psi0)?),
        None => None,
    };
    if let Some(ng) = &naive_growth {
        if ng["norm_violation"] == Value::Bool(true) {
            writeln!(
                log,
                "naive_ito_white: mean norm^2 departs from 1 (see summary.json)"
            )?;
        }
    }
    output::write_json(
        &dir.join("summary.json"),
        &json!({
            "command": "compare",
            "regimes": regimes.iter().map(|r| r.name()).collect::<Vec<_>>(),
            "master_seed": loaded.seed,
            "trajectories": cfg.ensemble.trajectories,
            "workers": loaded.workers,
            "wall_time_seconds": started.elapsed().as_secs_f64(),
            "naive_ito_norm_growth": naive_growth.clone().unwrap_or(Value::Null),
            "config": config_echo(&loaded),
            "config_text": loaded.text,
        }),
    )?;
    writeln!(
        log,
        "{} regimes compared, outputs in {}",
        regimes.len(),
        dir.display()
    )?;
    Ok(CompareOutcome {
        results,
        naive_growth,
    })
}

/// Predicted initial growth rate of the mean squared norm against a linear
/// fit over the growth window, plus the final excess in standard errors.
fn naive_diagnostic(
    cfg: &Config,
    model: &ModelSpec,
    result: &EnsembleResult,
    psi0: &qhomog_core::StateVector,
) -> Result<Value> {
    let predicted = naive_growth_rate(model, psi0)?;
    let last = result.times.len().saturating_sub(1);
    let excess = result.norm2_mean.get(last).map(|m| m - 1.0).unwrap_or(0.0);
    let se = result.norm2_stderr.get(last).copied().unwrap_or(0.0);
    let sigma = if se > 0.0 { excess / se } else { 0.0 };
    if cfg.integration.renormalize {
        return Ok(json!({
            "predicted_rate": predicted,
            "fitted_rate": Value::Null,
            "note": "renormalize is on, so recorded norms are single-step values; set integration.renormalize = false",
            "norm_violation": Value::Null,
        }));
    }
    let t_end = cfg.integration.t_end;
    let window = cfg
        .compare
        .as_ref()
        .and_then(|c| c.growth_window)
        .unwrap_or(0.1 * t_end);
    let (xs, ys): (Vec<f64>, Vec<f64>) = result
        .times
        .iter()
        .zip(&result.norm2_mean)
        .filter(|(t, _)| **t <= window)
        .map(|(t, m)| (*t, *m))
        .unzip();
    let fitted = linear_fit(&xs, &ys).ok().map(|f| f.slope);
    Ok(json!({
        "predicted_rate": predicted,
        "fitted_rate": fitted,
        "growth_window": window,
        "final_time": result.times.get(last),
        "final_excess": excess,
        "final_excess_in_stderr": sigma,
        "norm_violation": sigma >= 3.0,
    }))
}
