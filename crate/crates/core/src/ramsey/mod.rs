//! The Ramsey sequence on every solver backend: quarter turn about `y` from
//! the ground state, free evolution, and readout of `2 Im⟨σ⁺⟩` (or an
//! explicit second quarter turn about `x` followed by `⟨σ_z⟩`).

mod fit;
mod sweep;

use std::f64::consts::FRAC_PI_2;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dense::{self, DenseEvolution, DenseState, Space};
use crate::dicke::{DickeDensityMatrix, DickeEvolver, DickeGenerator, ExpectationSet, Moments, SectorEvolution};
use crate::error::{Error, Result};
use crate::ode::{DormandPrince, ErrorScale};
use crate::output::{fmt_float, Csv};
use crate::params::ModelParams;
use crate::rotation::Axis;
use crate::trajectory::{self, TrajectoryOptions};

pub use fit::{default_transient_cut, envelope_decay, fit_fringe, fit_fringe_with, FitOptions, FitResult};
pub use sweep::{sweep_csv, sweep_lambda, sweep_lambda_with, SweepAxis, SweepOptions, SweepRow};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Backend {
    /// Full `2^N` density matrix, atoms only.
    Dense,
    /// Dense atoms plus a truncated cavity mode.
    Cavity,
    Dicke,
    Cumulant,
    Trajectory,
}

impl FromStr for Backend {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.to_ascii_lowercase().as_str() {
            "dense" => Self::Dense,
            "cavity" => Self::Cavity,
            "dicke" => Self::Dicke,
            "cumulant" => Self::Cumulant,
            "trajectory" => Self::Trajectory,
            other => return Err(Error::InvalidParams(format!("unknown backend `{other}`"))),
        })
    }
}

impl fmt::Display for Backend {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Self::Dense => "dense",
            Self::Cavity => "cavity",
            Self::Dicke => "dicke",
            Self::Cumulant => "cumulant",
            Self::Trajectory => "trajectory",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReadoutMode {
    /// `2 Im⟨σ⁺⟩` of one atom.
    ImSigmaPlus,
    /// Quarter turn about `x` at each sample, then `⟨σ_z⟩`.
    SecondPulse,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RamseyOptions {
    pub tol: f64,
    pub readout: ReadoutMode,
    /// Trajectory backend only.
    pub n_trials: usize,
    pub seed: u64,
    /// Trajectory step; `None` uses the largest admissible step.
    pub dt: Option<f64>,
}

impl Default for RamseyOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            readout: ReadoutMode::ImSigmaPlus,
            n_trials: 200,
            seed: 0,
            dt: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FringeSeries {
    pub times: Vec<f64>,
    pub signal: Vec<f64>,
    pub backend: Backend,
    pub params: ModelParams,
}

impl FringeSeries {
    pub fn new(times: Vec<f64>, signal: Vec<f64>, backend: Backend, params: ModelParams) -> Result<Self> {
        if times.len() != signal.len() || times.len() < 2 {
            return Err(Error::InvalidParams("need at least two samples of matching length".into()));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidParams("times must be strictly increasing".into()));
        }
        Ok(Self {
            times,
            signal,
            backend,
            params,
        })
    }

    pub fn csv(&self) -> Csv {
        let mut csv = Csv::new(&["t", "signal"]);
        for (t, s) in self.times.iter().zip(&self.signal) {
            csv.row(&[fmt_float(*t), fmt_float(*s)]);
        }
        csv
    }
}

/// Per-sample diagnostics alongside the fringe.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExpectationRow {
    pub t: f64,
    pub sz: f64,
    pub spsm_cross: f64,
    pub splus: Complex64,
    pub alpha: Option<Complex64>,
}

impl ExpectationRow {
    fn from_set(t: f64, e: &ExpectationSet) -> Self {
        Self {
            t,
            sz: e.sz,
            spsm_cross: e.spsm_cross,
            splus: e.splus,
            alpha: e.alpha,
        }
    }
}

pub fn expectations_csv(rows: &[ExpectationRow]) -> Csv {
    let mut csv = Csv::new(&["t", "sz", "spsm_cross", "splus_re", "splus_im", "alpha_re", "alpha_im"]);
    for r in rows {
        let (ar, ai) = r.alpha.map_or((f64::NAN, f64::NAN), |a| (a.re, a.im));
        csv.floats(&[r.t, r.sz, r.spsm_cross, r.splus.re, r.splus.im, ar, ai]);
    }
    csv
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RamseyRun {
    pub series: FringeSeries,
    /// Empty for the trajectory backend.
    pub expectations: Vec<ExpectationRow>,
    /// Cavity backend: largest population of the top Fock level seen.
    pub max_top_fock_population: Option<f64>,
}

/// Uniform grid `t_k = t_max·k/(n−1)`.
pub fn sample_times(t_max: f64, n_samples: usize) -> Result<Vec<f64>> {
    if !(t_max > 0.0) || !t_max.is_finite() || n_samples < 2 {
        return Err(Error::InvalidParams("need t_max > 0 and at least two samples".into()));
    }
    let last = (n_samples - 1) as f64;
    Ok((0..n_samples).map(|k| t_max * k as f64 / last).collect())
}

pub fn run_ramsey(params: &ModelParams, backend: Backend, t_max: f64, n_samples: usize) -> Result<FringeSeries> {
    Ok(run_ramsey_with(params, backend, t_max, n_samples, &RamseyOptions::default())?.series)
}

pub fn run_ramsey_with(
    params: &ModelParams,
    backend: Backend,
    t_max: f64,
    n_samples: usize,
    opts: &RamseyOptions,
) -> Result<RamseyRun> {
    params.validate()?;
    let times = sample_times(t_max, n_samples)?;
    if !(opts.tol > 0.0) {
        return Err(Error::InvalidParams("tolerance must be positive".into()));
    }
    let second = opts.readout == ReadoutMode::SecondPulse;
    let (signal, expectations, top) = match backend {
        Backend::Dense | Backend::Cavity => run_dense(params, backend == Backend::Cavity, &times, opts)?,
        Backend::Dicke if second => run_dicke_full(params, &times, opts.tol)?,
        Backend::Dicke => run_dicke_fast(params, &times, opts.tol)?,
        Backend::Cumulant | Backend::Trajectory if second => {
            return Err(Error::Incompatible(format!("{backend} backend only supports the Im σ⁺ readout")))
        }
        Backend::Cumulant => run_cumulant(params, &times, opts.tol)?,
        Backend::Trajectory => return run_trajectory_backend(params, t_max, n_samples, opts),
    };
    if let Some(p) = top {
        if p > 1e-6 {
            return Err(Error::Incompatible(format!(
                "photon cutoff too low: top Fock population reached {p:e}"
            )));
        }
    }
    Ok(RamseyRun {
        series: FringeSeries::new(times, signal, backend, *params)?,
        expectations,
        max_top_fock_population: top,
    })
}

type Samples = (Vec<f64>, Vec<ExpectationRow>, Option<f64>);

fn run_dense(params: &ModelParams, cavity: bool, times: &[f64], opts: &RamseyOptions) -> Result<Samples> {
    let (space, gen) = if cavity {
        let cutoff = params
            .n_photon_max
            .ok_or_else(|| Error::InvalidParams("cavity backend needs n_photon_max".into()))?;
        let space = Space::with_cavity(params.n_atoms, cutoff);
        (space, dense::build_generator_cavity(params)?)
    } else {
        (Space::atoms(params.n_atoms), dense::build_generator_atoms(params)?)
    };
    let n = params.n_atoms;
    let ops = [
        dense::ops::j_z(space),
        dense::ops::j_plus(space),
        dense::Observable::JplusJminus.operator(space),
        dense::Observable::JplusJz.operator(space),
    ];
    let sigma_plus = dense::ops::sigma_plus(space, 0);
    let sigma_z = dense::ops::sigma_z(space, 0);
    let top_proj = cavity.then(|| dense::ops::top_fock_projector(space));
    let start = DenseState::ground(space).to_density().rotate(Axis::Y, -FRAC_PI_2);
    let mut evo = DenseEvolution::new(start, &gen, opts.tol)?;
    let mut signal = Vec::with_capacity(times.len());
    let mut rows = Vec::with_capacity(times.len());
    let mut top: Option<f64> = None;
    for &t in times {
        evo.advance_to(t)?;
        let s = &evo.state;
        let m = Moments {
            jz: dense::expect_operator(s, &ops[0]).re,
            jplus: dense::expect_operator(s, &ops[1]),
            jplusjminus: dense::expect_operator(s, &ops[2]).re,
            jplusjz: dense::expect_operator(s, &ops[3]),
        };
        rows.push(ExpectationRow::from_set(t, &ExpectationSet::from_moments(n, m)));
        let value = match opts.readout {
            ReadoutMode::ImSigmaPlus => 2.0 * dense::expect_operator(s, &sigma_plus).im,
            ReadoutMode::SecondPulse => dense::expect_operator(&s.rotate(Axis::X, FRAC_PI_2), &sigma_z).re,
        };
        signal.push(value);
        if let Some(p) = &top_proj {
            let v = dense::expect_operator(s, p).re;
            top = Some(top.map_or(v, |x: f64| x.max(v)));
        }
    }
    Ok((signal, rows, top))
}

fn post_pulse_dicke(n: usize) -> Result<DickeDensityMatrix> {
    Ok(DickeDensityMatrix::ground_state(n)?.rotate(Axis::Y, -FRAC_PI_2))
}

/// Only the populations and the first coherence order feed the readout, and
/// each order evolves independently under a real generator in the rotating
/// frame, so two real systems suffice.
fn run_dicke_fast(params: &ModelParams, times: &[f64], tol: f64) -> Result<Samples> {
    let n = params.n_atoms;
    let gen = DickeGenerator::new(params)?;
    let q = post_pulse_dicke(n)?.weighted();
    let pops = gen.sector(0);
    let coh = gen.sector(-1);
    let real = |v: Vec<Complex64>| -> Result<Vec<f64>> {
        if v.iter().any(|z| z.im.abs() > 1e-14) {
            return Err(Error::Incompatible("post-pulse state is not real".into()));
        }
        Ok(v.iter().map(|z| z.re).collect())
    };
    let mut pe = SectorEvolution::new(&pops, real(pops.layout.gather(&q))?, tol, ErrorScale::Mixed);
    let mut ce = SectorEvolution::new(&coh, real(coh.layout.gather(&q))?, tol, ErrorScale::RelativeToNorm);
    let mut signal = Vec::with_capacity(times.len());
    let mut rows = Vec::with_capacity(times.len());
    let to_c = |v: &[f64]| -> Vec<Complex64> { v.iter().map(|&x| Complex64::new(x, 0.0)).collect() };
    for &t in times {
        pe.advance_to(t)?;
        ce.advance_to(t)?;
        let (jz, jplusjminus) = Moments::populations(&pops.layout, &to_c(&pe.values));
        let (jp, jpjz) = Moments::coherences(&coh.layout, &to_c(&ce.values));
        // order −1 picks up e^{+iΔν t}
        let phase = Complex64::from_polar(1.0, params.delta_nu * t);
        let m = Moments {
            jz,
            jplus: jp * phase,
            jplusjminus,
            jplusjz: jpjz * phase,
        };
        let e = ExpectationSet::from_moments(n, m);
        signal.push(2.0 * e.splus.im);
        rows.push(ExpectationRow::from_set(t, &e));
    }
    Ok((signal, rows, None))
}

/// Full-state propagation with an explicit second pulse at each sample.
fn run_dicke_full(params: &ModelParams, times: &[f64], tol: f64) -> Result<Samples> {
    let n = params.n_atoms;
    let mut evolver = DickeEvolver::new(DickeGenerator::new(params)?, tol)?;
    let mut state = post_pulse_dicke(n)?;
    let mut now = 0.0;
    let mut signal = Vec::with_capacity(times.len());
    let mut rows = Vec::with_capacity(times.len());
    for &t in times {
        if t > now {
            state = evolver.evolve(&state, t - now)?;
            now = t;
        }
        let e = state.expectations();
        rows.push(ExpectationRow::from_set(t, &e));
        signal.push(state.rotate(Axis::X, FRAC_PI_2).expectations().sz);
    }
    Ok((signal, rows, None))
}

/// Closed pair plus `d⟨σ⁺⟩/dt = [iΔν − Γ_t/2 + (Γ_C/2)(N−1)⟨σ_z⟩]⟨σ⁺⟩`,
/// which is the single-atom coherence equation with `⟨σ_j⁺σ_k^z⟩`
/// factorized.
fn run_cumulant(params: &ModelParams, times: &[f64], tol: f64) -> Result<Samples> {
    let n = params.n_atoms as f64;
    let gc = params.gamma_c();
    let gt = params.rates()?.gamma_t;
    // (sz, spsm, σ⁺ in the rotating frame; real because it starts real)
    let mut y = [0.0, 0.25, 0.5];
    let mut ode = DormandPrince::new(tol, ErrorScale::Mixed);
    let mut now = 0.0;
    let mut signal = Vec::with_capacity(times.len());
    let mut rows = Vec::with_capacity(times.len());
    for &t in times {
        ode.integrate(
            |_, y, dy| {
                let d = crate::semiclassical::cumulant_rhs(
                    crate::semiclassical::CumulantState { sz: y[0], spsm: y[1] },
                    params,
                );
                dy[0] = d.sz;
                dy[1] = d.spsm;
                dy[2] = (-0.5 * gt + 0.5 * gc * (n - 1.0) * y[0]) * y[2];
            },
            now,
            t,
            &mut y,
        )?;
        now = t;
        let splus = Complex64::from_polar(y[2], params.delta_nu * t);
        signal.push(2.0 * splus.im);
        rows.push(ExpectationRow {
            t,
            sz: y[0],
            spsm_cross: y[1],
            splus,
            alpha: Some(Complex64::new(1.0, 0.0)),
        });
    }
    Ok((signal, rows, None))
}

fn run_trajectory_backend(params: &ModelParams, t_max: f64, n_samples: usize, opts: &RamseyOptions) -> Result<RamseyRun> {
    // largest step no bigger than the requested one that divides the sample spacing
    let spacing = t_max / (n_samples - 1) as f64;
    let dt_max = opts.dt.unwrap_or(trajectory::max_dt(params)?);
    let stride = (spacing / dt_max - 1e-9).ceil().max(1.0) as usize;
    let topts = TrajectoryOptions {
        dt: spacing / stride as f64,
        record_every: stride,
    };
    let ens = trajectory::ensemble_run_with(params, t_max, &topts, opts.n_trials, opts.seed)?;
    let times = ens.records[0].times.clone();
    let signal = ens.mean_of(|r| &r.conditional_signal);
    Ok(RamseyRun {
        series: FringeSeries::new(times, signal, Backend::Trajectory, *params)?,
        expectations: Vec::new(),
        max_top_fock_population: None,
    })
}

/// Linearly interpolated sign changes of the signal, ascending. A sample
/// that is exactly zero counts when its neighbours have opposite signs.
pub fn zero_crossings(series: &FringeSeries) -> Vec<f64> {
    let (t, s) = (&series.times, &series.signal);
    let mut out = Vec::new();
    for i in 0..s.len().saturating_sub(1) {
        let (a, b) = (s[i], s[i + 1]);
        if a * b < 0.0 {
            out.push(t[i] + (t[i + 1] - t[i]) * a / (a - b));
        } else if b == 0.0 && i + 2 < s.len() && a * s[i + 2] < 0.0 {
            out.push(t[i + 1]);
        }
    }
    out
}
