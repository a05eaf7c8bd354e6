//! Decay rate as a function of repumping or atom number.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{fit_fringe_with, run_ramsey_with, Backend, FitOptions, RamseyOptions};
use crate::error::{Error, Result};
use crate::output::{fmt_float, Csv};
use crate::params::ModelParams;
use crate::semiclassical::lambda_semiclassical;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SweepAxis {
    #[serde(rename = "w")]
    Repump,
    #[serde(rename = "N")]
    AtomNumber,
}

impl FromStr for SweepAxis {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "w" | "W" => Ok(Self::Repump),
            "N" | "n" => Ok(Self::AtomNumber),
            other => Err(Error::InvalidParams(format!("unknown sweep axis `{other}` (use w or N)"))),
        }
    }
}

impl fmt::Display for SweepAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Repump => "w",
            Self::AtomNumber => "N",
        })
    }
}

impl SweepAxis {
    pub fn apply(self, template: &ModelParams, value: f64) -> Result<ModelParams> {
        match self {
            Self::Repump => Ok(template.with_w(value)),
            Self::AtomNumber => {
                if !(value >= 1.0) || value.fract() != 0.0 {
                    return Err(Error::InvalidParams(format!("atom number must be a positive integer, got {value}")));
                }
                Ok(template.with_n_atoms(value as usize))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub value: f64,
    pub lambda_master: Option<f64>,
    pub lambda_master_stderr: Option<f64>,
    pub lambda_semiclassical: Option<f64>,
    pub gamma_s: f64,
    pub gamma_c: f64,
    pub fit_converged: bool,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepOptions {
    pub backend: Backend,
    pub tol: f64,
    pub samples_per_period: usize,
    /// Fitted window after the transient; `None` picks it from the
    /// semiclassical estimate.
    pub window: Option<f64>,
    pub fit: FitOptions,
}

impl Default for SweepOptions {
    fn default() -> Self {
        Self {
            backend: Backend::Dicke,
            tol: 1e-9,
            samples_per_period: 24,
            window: None,
            fit: FitOptions::default(),
        }
    }
}

/// Fitted window: three expected decay times, at least six periods, at most
/// `30/Γ_S`.
fn auto_window(params: &ModelParams, semiclassical: Option<f64>) -> Result<f64> {
    let rates = params.rates()?;
    let period = std::f64::consts::TAU / params.delta_nu.abs();
    let guess = semiclassical
        .filter(|l| *l > 0.0)
        .unwrap_or(0.5 * rates.gamma_t)
        .max(0.02 * rates.gamma_s);
    Ok((3.0 / guess).min(30.0 / rates.gamma_s).max(6.0 * period))
}

fn run_point(template: &ModelParams, axis: SweepAxis, value: f64, opts: &SweepOptions) -> SweepRow {
    let mut row = SweepRow {
        value,
        lambda_master: None,
        lambda_master_stderr: None,
        lambda_semiclassical: None,
        gamma_s: f64::NAN,
        gamma_c: f64::NAN,
        fit_converged: false,
        error: None,
    };
    let result = (|| -> Result<()> {
        let params = axis.apply(template, value)?;
        params.validate()?;
        let rates = params.rates()?;
        row.gamma_s = rates.gamma_s;
        row.gamma_c = rates.gamma_c;
        row.lambda_semiclassical = lambda_semiclassical(&params).ok();
        if params.delta_nu == 0.0 {
            return Err(Error::InvalidParams("a fringe fit needs a nonzero detuning".into()));
        }
        let cut = opts.fit.transient_cut.unwrap_or_else(|| super::default_transient_cut(&params));
        let window = match opts.window {
            Some(w) => w,
            None => auto_window(&params, row.lambda_semiclassical)?,
        };
        let t_max = cut + window;
        let period = std::f64::consts::TAU / params.delta_nu.abs();
        let n_samples = (t_max / period * opts.samples_per_period as f64).ceil() as usize + 1;
        let ropts = RamseyOptions {
            tol: opts.tol,
            ..RamseyOptions::default()
        };
        let run = run_ramsey_with(&params, opts.backend, t_max, n_samples, &ropts)?;
        let fit = fit_fringe_with(
            &run.series,
            &FitOptions {
                transient_cut: Some(cut),
                ..opts.fit
            },
        )?;
        row.lambda_master = Some(fit.lambda);
        row.lambda_master_stderr = Some(fit.lambda_stderr);
        row.fit_converged = fit.converged;
        Ok(())
    })();
    if let Err(e) = result {
        row.error = Some(e.to_string());
    }
    row
}

pub fn sweep_lambda(template: &ModelParams, axis: SweepAxis, values: &[f64]) -> Result<Vec<SweepRow>> {
    sweep_lambda_with(template, axis, values, &SweepOptions::default())
}

/// Points run concurrently; rows come back in the order of `values`.
/// Failures are recorded per row and do not stop the sweep.
pub fn sweep_lambda_with(
    template: &ModelParams,
    axis: SweepAxis,
    values: &[f64],
    opts: &SweepOptions,
) -> Result<Vec<SweepRow>> {
    if values.is_empty() {
        return Err(Error::InvalidParams("sweep needs at least one value".into()));
    }
    Ok(values.par_iter().map(|&v| run_point(template, axis, v, opts)).collect())
}

fn cell(x: Option<f64>) -> String {
    x.map_or_else(|| "nan".to_string(), fmt_float)
}

pub fn sweep_csv(axis: SweepAxis, rows: &[SweepRow]) -> Csv {
    let axis = axis.to_string();
    let mut csv = Csv::new(&[&axis, "lambda_master", "lambda_semiclassical", "gamma_s", "gamma_c"]);
    for r in rows {
        csv.row(&[
            fmt_float(r.value),
            cell(r.lambda_master),
            cell(r.lambda_semiclassical),
            fmt_float(r.gamma_s),
            fmt_float(r.gamma_c),
        ]);
    }
    csv
}
