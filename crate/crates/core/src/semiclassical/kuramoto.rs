//! Phase-only reduction: `⟨σ_j⁺⟩ = α_j e^{−iφ_j}` with fixed amplitudes.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::output::{fmt_float, Csv};
use crate::params::ModelParams;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KuramotoEnsemble {
    pub phases: Vec<f64>,
    pub amplitudes: Vec<f64>,
    /// Common `⟨σ_z⟩`.
    pub inversion: f64,
}

impl KuramotoEnsemble {
    pub fn new(phases: Vec<f64>, amplitudes: Vec<f64>, inversion: f64) -> Result<Self> {
        if phases.is_empty() || phases.len() != amplitudes.len() {
            return Err(Error::InvalidParams("phases and amplitudes must be nonempty and equal length".into()));
        }
        if amplitudes.iter().any(|&a| !(a > 0.0)) {
            return Err(Error::InvalidParams("amplitudes must be positive".into()));
        }
        let phases = phases.into_iter().map(|p| p.rem_euclid(std::f64::consts::TAU)).collect();
        Ok(Self {
            phases,
            amplitudes,
            inversion,
        })
    }

    /// `n` atoms with amplitude `alpha`, phases evenly spread over
    /// `(mean − spread/2, mean + spread/2)` at interval midpoints.
    pub fn spread(n: usize, alpha: f64, mean: f64, spread: f64, inversion: f64) -> Result<Self> {
        let phases = (0..n)
            .map(|k| mean - spread / 2.0 + spread * (k as f64 + 0.5) / n as f64)
            .collect();
        Self::new(phases, vec![alpha; n], inversion)
    }

    pub fn len(&self) -> usize {
        self.phases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phases.is_empty()
    }

    /// Largest distance of any phase from the circular mean, in `[0, π]`.
    pub fn phase_spread(&self) -> f64 {
        let (s, c) = self
            .phases
            .iter()
            .fold((0.0, 0.0), |(s, c), &p| (s + p.sin(), c + p.cos()));
        let mean = s.atan2(c);
        self.phases
            .iter()
            .map(|&p| {
                let d = (p - mean).rem_euclid(std::f64::consts::TAU);
                d.min(std::f64::consts::TAU - d)
            })
            .fold(0.0, f64::max)
    }
}

/// `O = Σ_j α_j e^{−iφ_j}`.
pub fn order_parameter(ensemble: &KuramotoEnsemble) -> Complex64 {
    ensemble
        .phases
        .iter()
        .zip(&ensemble.amplitudes)
        .map(|(&p, &a)| Complex64::from_polar(a, -p))
        .sum()
}

/// `|O| / N`, between 0 and the largest amplitude.
pub fn order_per_atom(ensemble: &KuramotoEnsemble) -> f64 {
    order_parameter(ensemble).norm() / ensemble.len() as f64
}

/// One explicit Euler step of
/// `dφ_j/dt = −Δν + (Γ_C/2)(⟨σ_z⟩/α_j) Σ_m α_m sin(φ_m − φ_j)`.
pub fn kuramoto_step(ensemble: &KuramotoEnsemble, params: &ModelParams, dt: f64) -> Result<KuramotoEnsemble> {
    if !(dt > 0.0) {
        return Err(Error::InvalidParams("dt must be positive".into()));
    }
    if ensemble.amplitudes.iter().any(|&a| !(a > 0.0)) {
        return Err(Error::InvalidParams("amplitudes must be positive".into()));
    }
    // Σ_m α_m sin(φ_m − φ_j) = Im(e^{−iφ_j} Z), Z = Σ_m α_m e^{iφ_m}
    let z: Complex64 = ensemble
        .phases
        .iter()
        .zip(&ensemble.amplitudes)
        .map(|(&p, &a)| Complex64::from_polar(a, p))
        .sum();
    let k = 0.5 * params.gamma_c() * ensemble.inversion;
    let phases = ensemble
        .phases
        .iter()
        .zip(&ensemble.amplitudes)
        .map(|(&p, &a)| {
            let coupling = (Complex64::from_polar(1.0, -p) * z).im;
            (p + dt * (-params.delta_nu + k / a * coupling)).rem_euclid(std::f64::consts::TAU)
        })
        .collect();
    Ok(KuramotoEnsemble {
        phases,
        amplitudes: ensemble.amplitudes.clone(),
        inversion: ensemble.inversion,
    })
}

/// `(t, |O|/N, phase spread)` sampled every `every` steps.
pub fn kuramoto_run(
    ensemble: &KuramotoEnsemble,
    params: &ModelParams,
    dt: f64,
    steps: usize,
    every: usize,
) -> Result<(KuramotoEnsemble, Vec<[f64; 3]>)> {
    let mut e = ensemble.clone();
    let every = every.max(1);
    let mut rows = vec![[0.0, order_per_atom(&e), e.phase_spread()]];
    for s in 1..=steps {
        e = kuramoto_step(&e, params, dt)?;
        if s % every == 0 {
            rows.push([s as f64 * dt, order_per_atom(&e), e.phase_spread()]);
        }
    }
    Ok((e, rows))
}

pub fn kuramoto_csv(rows: &[[f64; 3]]) -> Csv {
    let mut csv = Csv::new(&["t", "order_per_atom", "phase_spread"]);
    for r in rows {
        csv.row(&[fmt_float(r[0]), fmt_float(r[1]), fmt_float(r[2])]);
    }
    csv
}
