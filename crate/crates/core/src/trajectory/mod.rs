//! Conditional pure-state dynamics under continuous homodyne detection of
//! the collective emission.
//!
//! The collective channel `√Γ_C J⁻` is unravelled diffusively,
//!
//! `dψ = [−½L†L + ½⟨x⟩L − ⅛⟨x⟩²]ψ dt + (L − ½⟨x⟩)ψ dW`, `⟨x⟩ = ⟨L + L†⟩`,
//!
//! and the per-atom channels (`√w σ⁺`, `√(1/T1) σ⁻`, `√(1/(4T2)) σ_z`) as
//! quantum jumps. States are propagated in the frame rotating with the
//! atoms; the detuning enters the recorded signal as the phase `e^{iΔν t}`
//! and the homodyne local oscillator as `e^{−iΔν t}` on the detected
//! operator. Integration is Euler–Maruyama with renormalization after each step.
//!
//! Random numbers come from ChaCha8 seeded with the trial seed; stream 0
//! drives the homodyne noise and stream 1 the jumps.

pub mod stats;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::output::{fmt_float, Csv};
use crate::params::ModelParams;

pub use stats::{crossing_statistics, normality, CrossingReport, CrossingStatistics, NormalityTest};

pub const MAX_TRAJECTORY_ATOMS: usize = 14;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryOptions {
    pub dt: f64,
    /// Record one sample every this many steps.
    pub record_every: usize,
}

/// Largest admissible step, `0.01 / Γ_t`.
pub fn max_dt(params: &ModelParams) -> Result<f64> {
    Ok(0.01 / params.rates()?.gamma_t)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub seed: u64,
    pub times: Vec<f64>,
    /// `2 Im⟨J⁺⟩ / N` in the lab frame.
    pub conditional_signal: Vec<f64>,
    /// Conditional `⟨σ_z⟩` per atom.
    pub sz: Vec<f64>,
    pub crossings: Vec<f64>,
    pub jumps: usize,
    pub final_norm_drift: f64,
}

impl TrajectoryRecord {
    pub fn signal_csv(&self) -> Csv {
        let mut csv = Csv::new(&["t", "conditional_signal"]);
        for (t, s) in self.times.iter().zip(&self.conditional_signal) {
            csv.row(&[fmt_float(*t), fmt_float(*s)]);
        }
        csv
    }
}

/// Bit mask of atom `n` (atom 0 is the most significant bit, 1 = excited).
fn mask(n_atoms: usize, atom: usize) -> usize {
    1 << (n_atoms - 1 - atom)
}

struct Workspace {
    n: usize,
    /// `m = (#excited) − N/2` for every basis index.
    m: Vec<f64>,
    lowered: Vec<Complex64>,
    raised: Vec<Complex64>,
}

impl Workspace {
    fn new(n: usize) -> Self {
        let dim = 1usize << n;
        Self {
            n,
            m: (0..dim).map(|a| a.count_ones() as f64 - n as f64 / 2.0).collect(),
            lowered: vec![Complex64::new(0.0, 0.0); dim],
            raised: vec![Complex64::new(0.0, 0.0); dim],
        }
    }

    fn j_minus(&self, psi: &[Complex64], out: &mut [Complex64]) {
        for (a, o) in out.iter_mut().enumerate() {
            let mut acc = Complex64::new(0.0, 0.0);
            for atom in 0..self.n {
                let mk = mask(self.n, atom);
                if a & mk == 0 {
                    acc += psi[a | mk];
                }
            }
            *o = acc;
        }
    }

    fn j_plus(&self, psi: &[Complex64], out: &mut [Complex64]) {
        for (a, o) in out.iter_mut().enumerate() {
            let mut acc = Complex64::new(0.0, 0.0);
            for atom in 0..self.n {
                let mk = mask(self.n, atom);
                if a & mk != 0 {
                    acc += psi[a & !mk];
                }
            }
            *o = acc;
        }
    }
}

fn inner(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn norm(psi: &[Complex64]) -> f64 {
    psi.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
}

/// Post-pulse product state, every atom along `+x`.
fn equator_state(n: usize) -> Vec<Complex64> {
    let amp = (0.5f64).powf(n as f64 / 2.0);
    vec![Complex64::new(amp, 0.0); 1 << n]
}

/// Collapse bursts of sign changes closer than `min_gap` into single
/// crossings: an odd burst is one crossing at its mean time, an even burst
/// is no net crossing.
pub fn debounce_crossings(raw: &[f64], min_gap: f64) -> Vec<f64> {
    let mut out = Vec::new();
    let mut i = 0;
    while i < raw.len() {
        let mut j = i + 1;
        while j < raw.len() && raw[j] - raw[j - 1] < min_gap {
            j += 1;
        }
        let burst = &raw[i..j];
        if burst.len() % 2 == 1 {
            out.push(burst.iter().sum::<f64>() / burst.len() as f64);
        }
        i = j;
    }
    out
}

/// One conditional run from the post-π/2 product state, recording every
/// step.
pub fn run_trajectory(params: &ModelParams, t_max: f64, dt: f64, seed: u64) -> Result<TrajectoryRecord> {
    run_trajectory_with(params, t_max, &TrajectoryOptions { dt, record_every: 1 }, seed)
}

pub fn run_trajectory_with(
    params: &ModelParams,
    t_max: f64,
    opts: &TrajectoryOptions,
    seed: u64,
) -> Result<TrajectoryRecord> {
    params.validate()?;
    let n = params.n_atoms;
    if n > MAX_TRAJECTORY_ATOMS {
        return Err(Error::TooLarge(format!(
            "trajectories support at most {MAX_TRAJECTORY_ATOMS} atoms, got {n}"
        )));
    }
    let dt = opts.dt;
    let limit = max_dt(params)?;
    if !(dt > 0.0) || dt > limit * (1.0 + 1e-12) {
        return Err(Error::InvalidParams(format!("dt must be in (0, {limit:e}], got {dt:e}")));
    }
    if !(t_max > 0.0) || opts.record_every == 0 {
        return Err(Error::InvalidParams("t_max must be positive and record_every at least 1".into()));
    }
    let nf = n as f64;
    let gc = params.gamma_c();
    let sqrt_gc = gc.sqrt();
    let (w, down, deph) = (params.w, params.decay_rate(), params.dephasing_rate());
    let steps = (t_max / dt - 1e-9).ceil() as usize;

    let mut noise = ChaCha8Rng::seed_from_u64(seed);
    noise.set_stream(0);
    let mut jumps_rng = ChaCha8Rng::seed_from_u64(seed);
    jumps_rng.set_stream(1);

    let mut ws = Workspace::new(n);
    let mut psi = equator_state(n);
    let dim = psi.len();
    let local_rate: Vec<f64> = ws.m.iter().map(|&m| w * (nf / 2.0 - m) + down * (nf / 2.0 + m) + deph * nf).collect();

    let cap = steps / opts.record_every + 2;
    let mut rec = TrajectoryRecord {
        seed,
        times: Vec::with_capacity(cap),
        conditional_signal: Vec::with_capacity(cap),
        sz: Vec::with_capacity(cap),
        crossings: Vec::new(),
        jumps: 0,
        final_norm_drift: 0.0,
    };
    let mut raw_crossings = Vec::new();
    let mut lowered = std::mem::take(&mut ws.lowered);
    let mut raised = std::mem::take(&mut ws.raised);
    let mut next = vec![Complex64::new(0.0, 0.0); dim];

    let observe = |psi: &[Complex64], lowered: &[Complex64], t: f64| -> (f64, f64) {
        // ⟨J⁺⟩ = conj⟨J⁻⟩
        let jm = inner(psi, lowered);
        let jp_lab = jm.conj() * Complex64::from_polar(1.0, params.delta_nu * t);
        let jz: f64 = psi.iter().zip(&ws.m).map(|(v, m)| v.norm_sqr() * m).sum();
        (2.0 * jp_lab.im / nf, 2.0 * jz / nf)
    };

    ws.j_minus(&psi, &mut lowered);
    let (mut prev_signal, sz0) = observe(&psi, &lowered, 0.0);
    rec.times.push(0.0);
    rec.conditional_signal.push(prev_signal);
    rec.sz.push(sz0);

    for step in 1..=steps {
        let t_prev = (step - 1) as f64 * dt;
        // lowered holds J⁻ψ for the current state
        // the local oscillator sits at the reference frequency, so in the
        // atomic frame the detected operator is √Γ_C e^{−iΔν t} J⁻
        let lo = Complex64::from_polar(1.0, -params.delta_nu * t_prev);
        let jm = inner(&psi, &lowered);
        let x = 2.0 * sqrt_gc * (lo * jm).re;
        let p_local: f64 = psi.iter().zip(&local_rate).map(|(v, r)| v.norm_sqr() * r).sum::<f64>() * dt;
        let u: f64 = jumps_rng.random();
        let jumped = u < p_local;
        let dw: f64 = noise.sample::<f64, _>(StandardNormal) * dt.sqrt();
        if jumped {
            apply_local_jump(&mut psi, params, &ws.m, &mut jumps_rng);
            rec.jumps += 1;
            ws.j_minus(&psi, &mut lowered);
            let nrm = norm(&psi);
            psi.iter_mut().for_each(|v| *v /= nrm);
            lowered.iter_mut().for_each(|v| *v /= nrm);
        }
        if gc > 0.0 || !jumped {
            let jm = if jumped { inner(&psi, &lowered) } else { jm };
            let x = if jumped { 2.0 * sqrt_gc * (lo * jm).re } else { x };
            ws.j_plus(&lowered, &mut raised);
            let drift_x = 0.5 * x * sqrt_gc * lo;
            let c0 = -0.125 * x * x;
            for a in 0..dim {
                let local = if jumped { 0.0 } else { -0.5 * local_rate[a] };
                let drift = -0.5 * gc * raised[a] + drift_x * lowered[a] + (c0 + local) * psi[a];
                let diff = sqrt_gc * lo * lowered[a] - 0.5 * x * psi[a];
                next[a] = psi[a] + drift * dt + diff * dw;
            }
            let nrm = norm(&next);
            if !nrm.is_finite() || nrm == 0.0 || (nrm - 1.0).abs() > 0.5 {
                return Err(Error::Trajectory(format!(
                    "norm {nrm:e} before renormalization at t = {t_prev}; reduce dt"
                )));
            }
            for a in 0..dim {
                psi[a] = next[a] / nrm;
            }
        }
        let drift = (norm(&psi) - 1.0).abs();
        if drift > 1e-6 {
            return Err(Error::Trajectory(format!("norm drift {drift:e} at t = {t_prev}")));
        }
        ws.j_minus(&psi, &mut lowered);
        let t = step as f64 * dt;
        let (signal, sz) = observe(&psi, &lowered, t);
        if (prev_signal < 0.0) != (signal < 0.0) && prev_signal != signal {
            raw_crossings.push(t_prev + dt * prev_signal / (prev_signal - signal));
        }
        prev_signal = signal;
        if step % opts.record_every == 0 || step == steps {
            rec.times.push(t);
            rec.conditional_signal.push(signal);
            rec.sz.push(sz);
        }
        rec.final_norm_drift = drift;
    }
    let quarter = if params.delta_nu != 0.0 {
        std::f64::consts::FRAC_PI_2 / params.delta_nu.abs()
    } else {
        0.0
    };
    rec.crossings = debounce_crossings(&raw_crossings, quarter);
    Ok(rec)
}

fn apply_local_jump(psi: &mut [Complex64], params: &ModelParams, m: &[f64], rng: &mut ChaCha8Rng) {
    let n = params.n_atoms;
    let nf = n as f64;
    let jz: f64 = psi.iter().zip(m).map(|(v, m)| v.norm_sqr() * m).sum();
    let weights = [
        params.w * (nf / 2.0 - jz),
        params.decay_rate() * (nf / 2.0 + jz),
        params.dephasing_rate() * nf,
    ];
    let total: f64 = weights.iter().sum();
    let mut u = rng.random::<f64>() * total;
    let mut channel = 2;
    for (c, &wt) in weights.iter().enumerate() {
        if u < wt {
            channel = c;
            break;
        }
        u -= wt;
    }
    // pick the atom in proportion to its own jump probability
    let excited: Vec<f64> = (0..n)
        .map(|atom| {
            let mk = mask(n, atom);
            psi.iter().enumerate().filter(|(a, _)| a & mk != 0).map(|(_, v)| v.norm_sqr()).sum()
        })
        .collect();
    let atom_weight = |atom: usize| match channel {
        0 => 1.0 - excited[atom],
        1 => excited[atom],
        _ => 1.0,
    };
    let total: f64 = (0..n).map(atom_weight).sum();
    let mut u = rng.random::<f64>() * total;
    let mut atom = n - 1;
    for k in 0..n {
        let wt = atom_weight(k);
        if u < wt {
            atom = k;
            break;
        }
        u -= wt;
    }
    let mk = mask(n, atom);
    match channel {
        0 => {
            for a in (0..psi.len()).rev() {
                if a & mk != 0 {
                    psi[a] = psi[a & !mk];
                } else {
                    psi[a] = Complex64::new(0.0, 0.0);
                }
            }
        }
        1 => {
            for a in 0..psi.len() {
                if a & mk == 0 {
                    psi[a] = psi[a | mk];
                } else {
                    psi[a] = Complex64::new(0.0, 0.0);
                }
            }
        }
        _ => {
            for (a, v) in psi.iter_mut().enumerate() {
                if a & mk == 0 {
                    *v = -*v;
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ensemble {
    pub records: Vec<TrajectoryRecord>,
    /// `(seed, message)` of trials that failed.
    pub failures: Vec<(u64, String)>,
}

impl Ensemble {
    /// Trial average of a recorded series on the shared time grid.
    pub fn mean_of(&self, f: impl Fn(&TrajectoryRecord) -> &[f64]) -> Vec<f64> {
        let Some(first) = self.records.first() else { return Vec::new() };
        let mut acc = vec![0.0; f(first).len()];
        for r in &self.records {
            for (a, v) in acc.iter_mut().zip(f(r)) {
                *a += v;
            }
        }
        let m = self.records.len() as f64;
        acc.iter_mut().for_each(|a| *a /= m);
        acc
    }

    /// `(mean, standard error)` per sample of a recorded series.
    pub fn mean_and_stderr(&self, f: impl Fn(&TrajectoryRecord) -> &[f64]) -> Vec<(f64, f64)> {
        let mean = self.mean_of(&f);
        let m = self.records.len() as f64;
        let mut var = vec![0.0; mean.len()];
        for r in &self.records {
            for ((v, x), mu) in var.iter_mut().zip(f(r)).zip(&mean) {
                *v += (x - mu).powi(2);
            }
        }
        mean.iter()
            .zip(var)
            .map(|(&mu, v)| (mu, (v / (m - 1.0).max(1.0) / m).sqrt()))
            .collect()
    }
}

/// `n_trials` independent runs with seeds `base_seed + i`. The result does
/// not depend on how the trials are scheduled across threads.
pub fn ensemble_run(params: &ModelParams, t_max: f64, dt: f64, n_trials: usize, base_seed: u64) -> Result<Ensemble> {
    ensemble_run_with(params, t_max, &TrajectoryOptions { dt, record_every: 1 }, n_trials, base_seed)
}

pub fn ensemble_run_with(
    params: &ModelParams,
    t_max: f64,
    opts: &TrajectoryOptions,
    n_trials: usize,
    base_seed: u64,
) -> Result<Ensemble> {
    if n_trials == 0 {
        return Err(Error::InvalidParams("n_trials must be at least 1".into()));
    }
    // argument errors are not per-trial failures
    params.validate()?;
    if params.n_atoms > MAX_TRAJECTORY_ATOMS {
        return Err(Error::TooLarge(format!("at most {MAX_TRAJECTORY_ATOMS} atoms")));
    }
    let limit = max_dt(params)?;
    if !(opts.dt > 0.0) || opts.dt > limit * (1.0 + 1e-12) || !(t_max > 0.0) || opts.record_every == 0 {
        return Err(Error::InvalidParams(format!(
            "need 0 < dt <= {limit:e}, t_max > 0 and record_every >= 1"
        )));
    }
    let results: Vec<(u64, Result<TrajectoryRecord>)> = (0..n_trials as u64)
        .into_par_iter()
        .map(|i| {
            let seed = base_seed.wrapping_add(i);
            (seed, run_trajectory_with(params, t_max, opts, seed))
        })
        .collect();
    let mut ens = Ensemble {
        records: Vec::new(),
        failures: Vec::new(),
    };
    for (seed, r) in results {
        match r {
            Ok(rec) => ens.records.push(rec),
            Err(e) => ens.failures.push((seed, e.to_string())),
        }
    }
    if ens.failures.len() * 10 > n_trials {
        return Err(Error::Trajectory(format!(
            "{} of {n_trials} trials failed; first: {}",
            ens.failures.len(),
            ens.failures[0].1
        )));
    }
    Ok(ens)
}
