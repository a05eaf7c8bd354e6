//! Command-line front end: configuration, commands, run manifests.
//!
//! Every command reads one JSON config, validates it and all flags before
//! touching the output directory, writes CSV/JSON payloads, and finishes
//! with `manifest.json` listing each file with its SHA-256.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use sync_ramsey::ramsey::{
    default_transient_cut, expectations_csv, fit_fringe_with, run_ramsey_with, sweep_csv, sweep_lambda_with,
    zero_crossings, Backend, FitOptions, RamseyOptions, ReadoutMode, SweepAxis, SweepOptions,
};
use sync_ramsey::trajectory::{crossing_statistics, ensemble_run_with, max_dt, TrajectoryOptions};
use sync_ramsey::validate::{run_validation, ValidationOptions};
use sync_ramsey::ModelParams;

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION_FAILED: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_SOLVER: i32 = 3;
pub const EXIT_FIT: i32 = 4;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("solver failure: {0}")]
    Solver(String),
    #[error("fit failure: {0}")]
    Fit(String),
    #[error("validation failed")]
    Validation,
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) => EXIT_CONFIG,
            Self::Solver(_) | Self::Io(_) => EXIT_SOLVER,
            Self::Fit(_) => EXIT_FIT,
            Self::Validation => EXIT_VALIDATION_FAILED,
        }
    }
}

fn solver(e: sync_ramsey::Error) -> CliError {
    CliError::Solver(e.to_string())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RamseySection {
    pub t_max: Option<f64>,
    #[serde(default = "default_samples")]
    pub n_samples: usize,
    #[serde(default = "default_tol")]
    pub tol: f64,
    pub transient_cut: Option<f64>,
    #[serde(default)]
    pub pin_delta_nu: bool,
}

fn default_samples() -> usize {
    2001
}

fn default_tol() -> f64 {
    1e-10
}

impl Default for RamseySection {
    fn default() -> Self {
        Self {
            t_max: None,
            n_samples: default_samples(),
            tol: default_tol(),
            transient_cut: None,
            pin_delta_nu: false,
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    /// Fitted window after the transient; automatic when absent.
    pub window: Option<f64>,
    pub tol: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrajectorySection {
    #[serde(default = "default_traj_t_max")]
    pub t_max: f64,
    /// Defaults to the largest admissible step, `0.01/Γ_t`.
    pub dt: Option<f64>,
    #[serde(default = "default_record_every")]
    pub record_every: usize,
    /// Number of per-trial CSV files to write.
    #[serde(default = "default_keep")]
    pub keep_trials: usize,
    /// Crossing indices for the statistics; defaults to those nominally in
    /// the first half of the window.
    pub crossing_indices: Option<Vec<usize>>,
}

fn default_traj_t_max() -> f64 {
    10.0
}

fn default_record_every() -> usize {
    10
}

fn default_keep() -> usize {
    5
}

impl Default for TrajectorySection {
    fn default() -> Self {
        Self {
            t_max: default_traj_t_max(),
            dt: None,
            record_every: default_record_every(),
            keep_trials: default_keep(),
            crossing_indices: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub params: ModelParams,
    #[serde(default)]
    pub ramsey: RamseySection,
    #[serde(default)]
    pub sweep: SweepSection,
    #[serde(default)]
    pub trajectories: TrajectorySection,
}

impl Config {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let cfg: Self = serde_json::from_str(&text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.params.validate().map_err(|e| CliError::Config(e.to_string()))?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OutputFile {
    pub path: String,
    pub sha256: String,
    pub bytes: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub code_version: String,
    pub config: serde_json::Value,
    pub base_seed: Option<u64>,
    pub wall_clock_seconds: f64,
    pub outputs: Vec<OutputFile>,
}

/// Collects output files and their checksums.
pub struct OutputDir {
    root: PathBuf,
    files: Vec<OutputFile>,
}

impl OutputDir {
    pub fn create(root: &Path) -> Result<Self, CliError> {
        std::fs::create_dir_all(root)?;
        Ok(Self {
            root: root.to_path_buf(),
            files: Vec::new(),
        })
    }

    pub fn write(&mut self, name: &str, contents: &str) -> Result<(), CliError> {
        std::fs::write(self.root.join(name), contents.as_bytes())?;
        self.files.push(OutputFile {
            path: name.to_string(),
            sha256: hex::encode(Sha256::digest(contents.as_bytes())),
            bytes: contents.len(),
        });
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Solver(e.to_string()))?;
        text.push('\n');
        self.write(name, &text)
    }

    pub fn finish(self, command: &str, config: serde_json::Value, seed: Option<u64>, started: Instant) -> Result<(), CliError> {
        let manifest = RunManifest {
            command: command.to_string(),
            code_version: env!("CARGO_PKG_VERSION").to_string(),
            config,
            base_seed: seed,
            wall_clock_seconds: started.elapsed().as_secs_f64(),
            outputs: self.files,
        };
        let mut text = serde_json::to_string_pretty(&manifest).map_err(|e| CliError::Solver(e.to_string()))?;
        text.push('\n');
        std::fs::write(self.root.join("manifest.json"), text)?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BackendArg {
    Dense,
    Cavity,
    Dicke,
    Cumulant,
    Trajectory,
}

impl From<BackendArg> for Backend {
    fn from(b: BackendArg) -> Self {
        match b {
            BackendArg::Dense => Backend::Dense,
            BackendArg::Cavity => Backend::Cavity,
            BackendArg::Dicke => Backend::Dicke,
            BackendArg::Cumulant => Backend::Cumulant,
            BackendArg::Trajectory => Backend::Trajectory,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ReadoutArg {
    ImSigmaPlus,
    SecondPulse,
}

#[derive(Debug, Parser)]
#[command(name = "sync-ramsey", version, about = "Ramsey spectroscopy with cavity-synchronized atoms")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one Ramsey sequence and fit the fringe.
    Ramsey {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_enum, default_value = "dicke")]
        backend: BackendArg,
        #[arg(long, value_enum, default_value = "im-sigma-plus")]
        readout: ReadoutArg,
        #[arg(long)]
        out: PathBuf,
        /// Trajectory backend only.
        #[arg(long, default_value_t = 200)]
        n_trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Decay rate against repumping (`w`) or atom number (`N`).
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        axis: String,
        /// Comma-separated values.
        #[arg(long, allow_hyphen_values = true)]
        values: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Conditional homodyne trajectories and zero-crossing statistics.
    Trajectories {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        n_trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Cross-check the solvers against each other.
    Validate {
        #[arg(long)]
        out: PathBuf,
        /// Scale one Dicke coupling coefficient (mutation test).
        #[arg(long)]
        corrupt_dicke: Option<f64>,
        #[arg(long, default_value_t = 200)]
        trajectory_trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Ramsey {
            config,
            backend,
            readout,
            out,
            n_trials,
            seed,
        } => cmd_ramsey(&config, backend.into(), readout, &out, n_trials, seed),
        Command::Sweep {
            config,
            axis,
            values,
            out,
        } => cmd_sweep(&config, &axis, &values, &out),
        Command::Trajectories {
            config,
            n_trials,
            seed,
            out,
        } => cmd_trajectories(&config, n_trials, seed, &out),
        Command::Validate {
            out,
            corrupt_dicke,
            trajectory_trials,
            seed,
        } => cmd_validate(&out, corrupt_dicke, trajectory_trials, seed),
    }
}

fn snapshot(cfg: &Config) -> serde_json::Value {
    serde_json::to_value(cfg).unwrap_or(serde_json::Value::Null)
}

/// Default interrogation time: the transient plus eight single-atom decay
/// times or ten periods, whichever is longer.
fn default_t_max(p: &ModelParams) -> Result<f64, CliError> {
    let rates = p.rates().map_err(|e| CliError::Config(e.to_string()))?;
    let period = if p.delta_nu != 0.0 {
        std::f64::consts::TAU / p.delta_nu.abs()
    } else {
        0.0
    };
    Ok(default_transient_cut(p) + (8.0 / rates.gamma_s).max(10.0 * period))
}

#[derive(Serialize)]
struct FitReport {
    #[serde(flatten)]
    fit: sync_ramsey::ramsey::FitResult,
    gamma_s: f64,
    gamma_c: f64,
    n_zero_crossings: usize,
}

pub fn cmd_ramsey(
    config: &Path,
    backend: Backend,
    readout: ReadoutArg,
    out: &Path,
    n_trials: usize,
    seed: u64,
) -> Result<(), CliError> {
    let started = Instant::now();
    let cfg = Config::load(config)?;
    let p = cfg.params;
    let t_max = match cfg.ramsey.t_max {
        Some(t) if t > 0.0 && t.is_finite() => t,
        Some(t) => return Err(CliError::Config(format!("ramsey.t_max must be positive, got {t}"))),
        None => default_t_max(&p)?,
    };
    if cfg.ramsey.n_samples < 2 || !(cfg.ramsey.tol > 0.0) {
        return Err(CliError::Config("ramsey.n_samples must be >= 2 and ramsey.tol > 0".into()));
    }
    if backend == Backend::Trajectory && n_trials == 0 {
        return Err(CliError::Config("n_trials must be at least 1".into()));
    }
    let opts = RamseyOptions {
        tol: cfg.ramsey.tol,
        readout: match readout {
            ReadoutArg::ImSigmaPlus => ReadoutMode::ImSigmaPlus,
            ReadoutArg::SecondPulse => ReadoutMode::SecondPulse,
        },
        n_trials,
        seed,
        dt: cfg.trajectories.dt,
    };
    let run = run_ramsey_with(&p, backend, t_max, cfg.ramsey.n_samples, &opts).map_err(|e| match e {
        sync_ramsey::Error::InvalidParams(m) | sync_ramsey::Error::Incompatible(m) | sync_ramsey::Error::TooLarge(m) => {
            CliError::Config(m)
        }
        other => solver(other),
    })?;
    let mut dir = OutputDir::create(out)?;
    dir.write("fringe.csv", run.series.csv().as_str())?;
    if !run.expectations.is_empty() {
        dir.write("expectations.csv", expectations_csv(&run.expectations).as_str())?;
    }
    let fit = fit_fringe_with(
        &run.series,
        &FitOptions {
            transient_cut: cfg.ramsey.transient_cut,
            pin_delta_nu: cfg.ramsey.pin_delta_nu,
            ..FitOptions::default()
        },
    );
    let rates = p.rates().map_err(solver)?;
    let result = match fit {
        Ok(fit) => {
            dir.write_json(
                "fit.json",
                &FitReport {
                    fit,
                    gamma_s: rates.gamma_s,
                    gamma_c: rates.gamma_c,
                    n_zero_crossings: zero_crossings(&run.series).len(),
                },
            )?;
            Ok(())
        }
        Err(e) => Err(CliError::Fit(e.to_string())),
    };
    let seed = (backend == Backend::Trajectory).then_some(seed);
    dir.finish("ramsey", snapshot(&cfg), seed, started)?;
    result
}

pub fn parse_values(values: &str) -> Result<Vec<f64>, CliError> {
    let parsed: Result<Vec<f64>, _> = values
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<f64>())
        .collect();
    let parsed = parsed.map_err(|e| CliError::Config(format!("bad value list `{values}`: {e}")))?;
    if parsed.is_empty() {
        return Err(CliError::Config("values list is empty".into()));
    }
    if parsed.iter().any(|v| !v.is_finite()) {
        return Err(CliError::Config("values must be finite".into()));
    }
    Ok(parsed)
}

pub fn cmd_sweep(config: &Path, axis: &str, values: &str, out: &Path) -> Result<(), CliError> {
    let started = Instant::now();
    let cfg = Config::load(config)?;
    let axis: SweepAxis = axis.parse().map_err(|e: sync_ramsey::Error| CliError::Config(e.to_string()))?;
    let values = parse_values(values)?;
    for &v in &values {
        axis.apply(&cfg.params, v)
            .and_then(|p| p.validate())
            .map_err(|e| CliError::Config(format!("value {v}: {e}")))?;
    }
    let mut opts = SweepOptions {
        window: cfg.sweep.window,
        ..SweepOptions::default()
    };
    if let Some(t) = cfg.sweep.tol {
        opts.tol = t;
    }
    let rows = sweep_lambda_with(&cfg.params, axis, &values, &opts).map_err(solver)?;
    let mut dir = OutputDir::create(out)?;
    dir.write("sweep.csv", sweep_csv(axis, &rows).as_str())?;
    dir.write_json("sweep.json", &rows)?;
    dir.finish("sweep", snapshot(&cfg), None, started)?;
    if rows.iter().all(|r| r.lambda_master.is_none()) {
        return Err(CliError::Solver(format!(
            "every sweep point failed; first: {}",
            rows[0].error.clone().unwrap_or_default()
        )));
    }
    Ok(())
}

#[derive(Serialize)]
struct TrajectorySummary {
    n_trials: usize,
    failures: Vec<(u64, String)>,
    dt: f64,
    gamma_c: f64,
    phase_diffusion: Option<f64>,
    slope: Option<f64>,
    slope_stderr: Option<f64>,
    normality: Option<sync_ramsey::trajectory::NormalityTest>,
    statistics_error: Option<String>,
}

pub fn cmd_trajectories(config: &Path, n_trials: usize, seed: u64, out: &Path) -> Result<(), CliError> {
    let started = Instant::now();
    let cfg = Config::load(config)?;
    let p = cfg.params;
    let sec = &cfg.trajectories;
    if n_trials == 0 {
        return Err(CliError::Config("n_trials must be at least 1".into()));
    }
    if !(sec.t_max > 0.0) || sec.record_every == 0 {
        return Err(CliError::Config("trajectories.t_max must be positive and record_every >= 1".into()));
    }
    let limit = max_dt(&p).map_err(|e| CliError::Config(e.to_string()))?;
    let dt = sec.dt.unwrap_or(limit);
    if !(dt > 0.0) || dt > limit * (1.0 + 1e-12) {
        return Err(CliError::Config(format!("trajectories.dt must be in (0, {limit:e}]")));
    }
    let opts = TrajectoryOptions {
        dt,
        record_every: sec.record_every,
    };
    let ens = ensemble_run_with(&p, sec.t_max, &opts, n_trials, seed).map_err(|e| match e {
        sync_ramsey::Error::InvalidParams(m) | sync_ramsey::Error::TooLarge(m) => CliError::Config(m),
        other => solver(other),
    })?;
    let mut dir = OutputDir::create(out)?;
    for rec in ens.records.iter().take(sec.keep_trials) {
        dir.write(&format!("trajectory_{:06}.csv", rec.seed), rec.signal_csv().as_str())?;
    }
    let mean = ens.mean_of(|r| &r.conditional_signal);
    let mut csv = sync_ramsey::output::Csv::new(&["t", "ensemble_signal"]);
    for (t, s) in ens.records[0].times.iter().zip(&mean) {
        csv.floats(&[*t, *s]);
    }
    dir.write("ensemble.csv", csv.as_str())?;
    let indices = sec.crossing_indices.clone().unwrap_or_else(|| {
        let k = (p.delta_nu.abs() * sec.t_max / 2.0 / std::f64::consts::PI) as usize;
        (0..k.max(1)).collect()
    });
    let mut summary = TrajectorySummary {
        n_trials,
        failures: ens.failures.clone(),
        dt,
        gamma_c: p.gamma_c(),
        phase_diffusion: None,
        slope: None,
        slope_stderr: None,
        normality: None,
        statistics_error: None,
    };
    match crossing_statistics(&ens.records, &indices, p.delta_nu) {
        Ok(rep) => {
            dir.write("crossings.csv", rep.csv().as_str())?;
            summary.phase_diffusion = Some(rep.phase_diffusion);
            summary.slope = Some(rep.slope);
            summary.slope_stderr = Some(rep.slope_stderr);
            summary.normality = rep.normality;
        }
        Err(e) => summary.statistics_error = Some(e.to_string()),
    }
    dir.write_json("summary.json", &summary)?;
    dir.finish("trajectories", snapshot(&cfg), Some(seed), started)?;
    Ok(())
}

pub fn cmd_validate(out: &Path, corrupt: Option<f64>, trials: usize, seed: u64) -> Result<(), CliError> {
    let started = Instant::now();
    if trials < 2 {
        return Err(CliError::Config("trajectory_trials must be at least 2".into()));
    }
    let report = run_validation(&ValidationOptions {
        corrupt_dicke: corrupt,
        trajectory_trials: trials,
        seed,
    });
    let mut dir = OutputDir::create(out)?;
    dir.write("validation.txt", &report.text())?;
    dir.write_json("validation.json", &report)?;
    let config = serde_json::json!({ "corrupt_dicke": corrupt, "trajectory_trials": trials });
    dir.finish("validate", config, Some(seed), started)?;
    print!("{}", report.text());
    if report.all_passed {
        Ok(())
    } else {
        Err(CliError::Validation)
    }
}
