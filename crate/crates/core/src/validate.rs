//! Cross-checks between independent solvers, with per-check maximum
//! deviations.

use std::f64::consts::FRAC_PI_2;

use serde::{Deserialize, Serialize};

use crate::dense::{self, DenseEvolution, DenseState, Space};
use crate::dicke::{DickeDensityMatrix, DickeEvolver, DickeGenerator};
use crate::error::{Error, Result};
use crate::params::ModelParams;
use crate::ramsey::{fit_fringe, run_ramsey_with, sample_times, Backend, RamseyOptions};
use crate::rotation::Axis;
use crate::trajectory::{self, TrajectoryOptions};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub max_deviation: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl CheckResult {
    fn new(name: impl Into<String>, max_deviation: f64, tolerance: f64) -> Self {
        Self {
            name: name.into(),
            max_deviation,
            tolerance,
            passed: max_deviation <= tolerance,
        }
    }

    fn failed(name: impl Into<String>, err: &Error) -> Self {
        Self {
            name: format!("{} ({err})", name.into()),
            max_deviation: f64::INFINITY,
            tolerance: 0.0,
            passed: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub checks: Vec<CheckResult>,
    pub all_passed: bool,
}

impl ValidationReport {
    pub fn text(&self) -> String {
        let mut s = String::new();
        for c in &self.checks {
            s.push_str(&format!(
                "{} {} max_deviation={:e} tolerance={:e}\n",
                if c.passed { "PASS" } else { "FAIL" },
                c.name,
                c.max_deviation,
                c.tolerance
            ));
        }
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ValidationOptions {
    /// Scale one Dicke coupling coefficient by this factor before the
    /// equivalence check; the check must then fail.
    pub corrupt_dicke: Option<f64>,
    pub trajectory_trials: usize,
    pub seed: u64,
}

impl Default for ValidationOptions {
    fn default() -> Self {
        Self {
            corrupt_dicke: None,
            trajectory_trials: 200,
            seed: 0,
        }
    }
}

/// Small-N rates with every channel switched on and the collective channel
/// strong enough to matter at a handful of atoms.
pub fn small_system(n_atoms: usize) -> ModelParams {
    ModelParams::new(n_atoms, 10.0, 1.0, 1.0, 0.25 * n_atoms as f64, 0.5)
}

/// `(⟨σ_z⟩, ⟨σ_j⁺σ_k⁻⟩, ⟨J⁺J⁻⟩)` at each time.
pub type PairSeries = Vec<[f64; 3]>;

fn post_pulse_dense(space: Space) -> DenseState {
    DenseState::ground(space).to_density().rotate(Axis::Y, -FRAC_PI_2)
}

fn dense_pairs(params: &ModelParams, cavity: bool, times: &[f64], tol: f64) -> Result<PairSeries> {
    let run = run_ramsey_with(
        params,
        if cavity { Backend::Cavity } else { Backend::Dense },
        times[times.len() - 1],
        times.len(),
        &RamseyOptions {
            tol,
            ..RamseyOptions::default()
        },
    )?;
    let n = params.n_atoms as f64;
    Ok(run
        .expectations
        .iter()
        .map(|e| [e.sz, e.spsm_cross, e.spsm_cross * n * (n - 1.0) + n * (1.0 + e.sz) / 2.0])
        .collect())
}

/// Full-state Dicke propagation through a possibly modified generator.
pub fn dicke_pairs(generator: DickeGenerator, times: &[f64], tol: f64) -> Result<PairSeries> {
    let n = generator.n_atoms;
    let mut evolver = DickeEvolver::new(generator, tol)?;
    let mut state = DickeDensityMatrix::ground_state(n)?.rotate(Axis::Y, -FRAC_PI_2);
    let mut now = 0.0;
    let mut out = Vec::with_capacity(times.len());
    for &t in times {
        if t > now {
            state = evolver.evolve(&state, t - now)?;
            now = t;
        }
        let e = state.expectations();
        out.push([e.sz, e.spsm_cross, e.jplusjminus]);
    }
    Ok(out)
}

fn max_deviation(a: &PairSeries, b: &PairSeries) -> f64 {
    a.iter()
        .zip(b)
        .flat_map(|(x, y)| x.iter().zip(y).map(|(u, v)| (u - v).abs()))
        .fold(0.0, f64::max)
}

/// Largest difference of `⟨σ_z⟩`, `⟨σ_j⁺σ_k⁻⟩` and `⟨J⁺J⁻⟩` between the
/// dense and Dicke solvers on `t ∈ [0, t_end]`.
pub fn dense_dicke_deviation(params: &ModelParams, t_end: f64, samples: usize, corrupt: Option<f64>) -> Result<f64> {
    let times = sample_times(t_end, samples)?;
    let dense = dense_pairs(params, false, &times, 1e-12)?;
    let mut gen = DickeGenerator::new(params)?;
    if let Some(f) = corrupt {
        gen.corrupt_coupling(f);
    }
    let dicke = dicke_pairs(gen, &times, 1e-12)?;
    Ok(max_deviation(&dense, &dicke))
}

/// Atom–cavity parameters with `√N g/κ = ratio` and `g²/κ = Γ_C`.
pub fn cavity_system(n_atoms: usize, ratio: f64, gamma_c: f64, cutoff: usize) -> ModelParams {
    let n = n_atoms as f64;
    // g = ratio κ/√N and g²/κ = Γ_C give κ = Γ_C N / ratio²
    let kappa = gamma_c * n / (ratio * ratio);
    let g = ratio * kappa / n.sqrt();
    ModelParams {
        g: Some(g),
        kappa: Some(kappa),
        n_photon_max: Some(cutoff),
        ..ModelParams::new(n_atoms, 1.0, 1.0, 1.0, 0.5 * n * gamma_c, gamma_c)
    }
}

/// Largest difference of the atomic pair observables between the explicit
/// cavity model and the eliminated one over `t ∈ [0, 2/Γ_S]`, plus the
/// largest top-level photon population seen.
pub fn cavity_elimination_deviation(params: &ModelParams, samples: usize) -> Result<(f64, f64)> {
    let t_end = 2.0 / params.rates()?.gamma_s;
    let times = sample_times(t_end, samples)?;
    let eliminated = params.with_eliminated_cavity()?;
    let full = dense_pairs(params, true, &times, 1e-11)?;
    let reduced = dense_pairs(&eliminated, false, &times, 1e-11)?;
    // the runner already rejects a cutoff that is too low; report the level
    let space = Space::with_cavity(params.n_atoms, params.n_photon_max.unwrap_or(0));
    let gen = dense::build_generator_cavity(params)?;
    let mut evo = DenseEvolution::new(post_pulse_dense(space), &gen, 1e-10)?;
    let proj = dense::ops::top_fock_projector(space);
    let mut top: f64 = 0.0;
    for &t in &times {
        evo.advance_to(t)?;
        top = top.max(dense::expect_operator(&evo.state, &proj).re);
    }
    Ok((max_deviation(&full, &reduced), top))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryConsistency {
    pub times: Vec<f64>,
    pub ensemble_mean: Vec<f64>,
    pub stderr: Vec<f64>,
    pub master: Vec<f64>,
    /// Largest `|mean − master| / stderr`.
    pub max_z: f64,
}

/// Trajectory-averaged `⟨σ_z⟩` against the master equation.
pub fn trajectory_consistency(
    params: &ModelParams,
    t_max: f64,
    samples: usize,
    n_trials: usize,
    seed: u64,
) -> Result<TrajectoryConsistency> {
    let spacing = t_max / (samples - 1) as f64;
    let stride = (spacing / trajectory::max_dt(params)? - 1e-9).ceil().max(1.0) as usize;
    let opts = TrajectoryOptions {
        dt: spacing / stride as f64,
        record_every: stride,
    };
    let ens = trajectory::ensemble_run_with(params, t_max, &opts, n_trials, seed)?;
    let stats = ens.mean_and_stderr(|r| &r.sz);
    let master = run_ramsey_with(params, Backend::Dicke, t_max, samples, &RamseyOptions::default())?;
    let mut out = TrajectoryConsistency {
        times: ens.records[0].times.clone(),
        ensemble_mean: stats.iter().map(|s| s.0).collect(),
        stderr: stats.iter().map(|s| s.1).collect(),
        master: master.expectations.iter().map(|e| e.sz).collect(),
        max_z: 0.0,
    };
    // the first sample is the deterministic initial state
    for k in 1..out.times.len().min(out.master.len()) {
        let z = (out.ensemble_mean[k] - out.master[k]).abs() / out.stderr[k];
        out.max_z = out.max_z.max(z);
    }
    Ok(out)
}

/// Relative error of the fitted decay rate against `Γ_S` without
/// collective coupling or repumping.
pub fn conventional_limit_error(t2: f64) -> Result<f64> {
    let p = ModelParams::new(4, 10.0, 1.0, t2, 0.0, 0.0);
    let gs = p.rates()?.gamma_s;
    let series = run_ramsey_with(&p, Backend::Dicke, 6.0 / gs, 1201, &RamseyOptions::default())?.series;
    Ok((fit_fringe(&series, 0.0)?.lambda - gs).abs() / gs)
}

pub fn run_validation(opts: &ValidationOptions) -> ValidationReport {
    let mut checks = Vec::new();
    for n in 2..=4 {
        let name = format!("dense_vs_dicke N={n}");
        checks.push(match dense_dicke_deviation(&small_system(n), 5.0, 51, opts.corrupt_dicke) {
            Ok(d) => CheckResult::new(name, d, 1e-8),
            Err(e) => CheckResult::failed(name, &e),
        });
    }
    // deep in the bad-cavity regime; the residual scales as (√N g/κ)²
    let cav = cavity_system(2, 0.02, 0.2, 5);
    checks.push(match cavity_elimination_deviation(&cav, 41) {
        Ok((d, top)) => {
            let mut c = CheckResult::new("cavity_elimination N=2", d, 1e-3);
            if top > 1e-6 {
                c.passed = false;
                c.name.push_str(" (photon cutoff too low)");
            }
            c
        }
        Err(e) => CheckResult::failed("cavity_elimination N=2", &e),
    });
    let traj = small_system(4);
    checks.push(match trajectory_consistency(&traj, 3.0, 11, opts.trajectory_trials, opts.seed) {
        Ok(tc) => CheckResult::new("trajectory_mean N=4 (z-score)", tc.max_z, 3.0),
        Err(e) => CheckResult::failed("trajectory_mean N=4", &e),
    });
    for t2 in [0.5, 1.0, 2.0] {
        let name = format!("conventional_limit T2/T1={t2} (relative)");
        checks.push(match conventional_limit_error(t2) {
            Ok(d) => CheckResult::new(name, d, 0.01),
            Err(e) => CheckResult::failed(name, &e),
        });
    }
    let all_passed = checks.iter().all(|c| c.passed);
    ValidationReport { checks, all_passed }
}
