//! Fit of `A e^{−λt} sin(Δν t + φ)` to a fringe.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{zero_crossings, FringeSeries};
use crate::error::{Error, Result};
use crate::params::ModelParams;

/// `5/w`, or 0 without repumping.
pub fn default_transient_cut(params: &ModelParams) -> f64 {
    if params.w > 0.0 {
        5.0 / params.w
    } else {
        0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    /// `None` uses [`default_transient_cut`].
    pub transient_cut: Option<f64>,
    /// Hold `Δν` at the configured detuning during refinement.
    pub pin_delta_nu: bool,
    pub max_iterations: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            transient_cut: None,
            pin_delta_nu: false,
            max_iterations: 200,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub amplitude: f64,
    pub lambda: f64,
    pub lambda_stderr: f64,
    pub delta_nu_fit: f64,
    pub phase: f64,
    pub rms_residual: f64,
    pub transient_cut: f64,
    pub n_extrema: usize,
    /// False when refinement did not converge and the stage-1 estimate is
    /// reported instead.
    pub converged: bool,
}

struct Window<'a> {
    t: &'a [f64],
    y: &'a [f64],
}

fn window(series: &FringeSeries, cut: f64) -> Window<'_> {
    let start = series.times.partition_point(|&t| t < cut);
    Window {
        t: &series.times[start..],
        y: &series.signal[start..],
    }
}

/// Largest `|y|` between consecutive sign changes, refined by a parabola
/// through the neighbouring samples.
fn extrema(w: &Window<'_>, crossings: &[f64]) -> Vec<(f64, f64)> {
    let mut out = Vec::new();
    for pair in crossings.windows(2) {
        let lo = w.t.partition_point(|&t| t < pair[0]);
        let hi = w.t.partition_point(|&t| t <= pair[1]);
        if hi <= lo {
            continue;
        }
        let k = (lo..hi)
            .max_by(|&a, &b| w.y[a].abs().total_cmp(&w.y[b].abs()))
            .unwrap();
        let (mut tk, mut vk) = (w.t[k], w.y[k].abs());
        if k > 0 && k + 1 < w.t.len() {
            let (a, b, c) = (w.y[k - 1].abs(), w.y[k].abs(), w.y[k + 1].abs());
            let h = w.t[k + 1] - w.t[k];
            let denom = a - 2.0 * b + c;
            if denom < 0.0 && (w.t[k] - w.t[k - 1] - h).abs() < 1e-9 * h {
                let off = 0.5 * (a - c) / denom;
                if off.abs() <= 1.0 {
                    tk += off * h;
                    vk = b - 0.25 * (a - c) * off;
                }
            }
        }
        if vk > 0.0 {
            out.push((tk, vk));
        }
    }
    out
}

/// Slope, intercept and slope standard error of `ln|v|` against `t`.
fn log_linear(points: &[(f64, f64)]) -> (f64, f64, f64) {
    let pts: Vec<(f64, f64)> = points.iter().map(|&(t, v)| (t, v.ln())).collect();
    let (slope, se) = crate::trajectory::stats::linear_slope(&pts);
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    (slope, my - slope * mx, se)
}

struct Stage1 {
    lambda: f64,
    lambda_stderr: f64,
    delta_nu: f64,
    amplitude: f64,
    phase: f64,
    n_extrema: usize,
}

fn stage1(series: &FringeSeries, cut: f64, pinned: Option<f64>) -> Result<Stage1> {
    let w = window(series, cut);
    let sub = FringeSeries {
        times: w.t.to_vec(),
        signal: w.y.to_vec(),
        ..series.clone()
    };
    let crossings = if sub.times.len() >= 2 { zero_crossings(&sub) } else { Vec::new() };
    let ext = extrema(&w, &crossings);
    if ext.len() < 3 {
        return Err(Error::Fit(format!(
            "too few extrema after t = {cut}: found {} (need 3)",
            ext.len()
        )));
    }
    let (slope, _, se) = log_linear(&ext);
    let lambda = -slope;
    let delta_nu = pinned.unwrap_or_else(|| {
        let half = (crossings[crossings.len() - 1] - crossings[0]) / (crossings.len() - 1) as f64;
        std::f64::consts::PI / half
    });
    // amplitude and phase by linear least squares at fixed λ, Δν
    let (mut ss, mut sc, mut cc, mut ys, mut yc) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for (&t, &y) in w.t.iter().zip(w.y) {
        let e = (-lambda * t).exp();
        let (s, c) = ((delta_nu * t).sin() * e, (delta_nu * t).cos() * e);
        ss += s * s;
        sc += s * c;
        cc += c * c;
        ys += y * s;
        yc += y * c;
    }
    let det = ss * cc - sc * sc;
    let (a, b) = if det.abs() > 0.0 {
        ((ys * cc - yc * sc) / det, (yc * ss - ys * sc) / det)
    } else {
        (1.0, 0.0)
    };
    Ok(Stage1 {
        lambda,
        lambda_stderr: se,
        delta_nu,
        amplitude: a.hypot(b),
        phase: b.atan2(a),
        n_extrema: ext.len(),
    })
}

/// Stage-1 estimate only: decay rate of the extrema envelope and its
/// standard error.
pub fn envelope_decay(series: &FringeSeries, transient_cut: f64) -> Result<(f64, f64)> {
    let s = stage1(series, transient_cut, None)?;
    Ok((s.lambda, s.lambda_stderr))
}

pub fn fit_fringe(series: &FringeSeries, transient_cut: f64) -> Result<FitResult> {
    fit_fringe_with(
        series,
        &FitOptions {
            transient_cut: Some(transient_cut),
            ..FitOptions::default()
        },
    )
}

fn model(theta: &[f64; 4], t: f64) -> (f64, [f64; 4]) {
    let [a, lambda, dnu, phi] = *theta;
    let e = (-lambda * t).exp();
    let arg = dnu * t + phi;
    let (s, c) = arg.sin_cos();
    (a * e * s, [e * s, -t * a * e * s, t * a * e * c, a * e * c])
}

fn cost(w: &Window<'_>, theta: &[f64; 4]) -> f64 {
    w.t.iter().zip(w.y).map(|(&t, &y)| (y - model(theta, t).0).powi(2)).sum()
}

pub fn fit_fringe_with(series: &FringeSeries, opts: &FitOptions) -> Result<FitResult> {
    let cut = opts.transient_cut.unwrap_or_else(|| default_transient_cut(&series.params));
    if !(cut >= 0.0) || !cut.is_finite() {
        return Err(Error::Fit(format!("invalid transient cut {cut}")));
    }
    let pinned = opts.pin_delta_nu.then_some(series.params.delta_nu);
    let s1 = stage1(series, cut, pinned)?;
    let w = window(series, cut);
    // free parameters: A, λ, (Δν), φ
    let free: Vec<usize> = if pinned.is_some() { vec![0, 1, 3] } else { vec![0, 1, 2, 3] };
    let p = free.len();
    let mut theta = [s1.amplitude, s1.lambda, s1.delta_nu, s1.phase];
    let mut c = cost(&w, &theta);
    let mut mu = 1e-3;
    let mut converged = false;
    let mut jtj = DMatrix::<f64>::zeros(p, p);
    for _ in 0..opts.max_iterations {
        jtj.fill(0.0);
        let mut jtr = DVector::<f64>::zeros(p);
        for (&t, &y) in w.t.iter().zip(w.y) {
            let (m, g) = model(&theta, t);
            let r = y - m;
            for (i, &fi) in free.iter().enumerate() {
                jtr[i] += g[fi] * r;
                for (k, &fk) in free.iter().enumerate() {
                    jtj[(i, k)] += g[fi] * g[fk];
                }
            }
        }
        let mut improved = false;
        for _ in 0..30 {
            let mut a = jtj.clone();
            for i in 0..p {
                a[(i, i)] *= 1.0 + mu;
            }
            let Some(delta) = a.cholesky().map(|ch| ch.solve(&jtr)) else {
                mu *= 10.0;
                continue;
            };
            let mut trial = theta;
            for (i, &fi) in free.iter().enumerate() {
                trial[fi] += delta[i];
            }
            let ct = cost(&w, &trial);
            if ct.is_finite() && ct <= c {
                let small = free
                    .iter()
                    .enumerate()
                    .all(|(i, &fi)| delta[i].abs() <= 1e-10 * (theta[fi].abs() + 1e-10));
                let flat = c - ct <= 1e-14 * c.max(1e-300);
                theta = trial;
                c = ct;
                mu = (mu / 3.0).max(1e-12);
                improved = true;
                if small || flat {
                    converged = true;
                }
                break;
            }
            mu *= 4.0;
        }
        if !improved {
            // no downhill step at any damping: the gradient is at roundoff
            converged = true;
        }
        if converged {
            break;
        }
    }
    let n = w.t.len();
    let rms = |c: f64| (c / n as f64).sqrt();
    if !converged || !theta.iter().all(|v| v.is_finite()) {
        let th = [s1.amplitude, s1.lambda, s1.delta_nu, s1.phase];
        return Ok(FitResult {
            amplitude: s1.amplitude,
            lambda: s1.lambda,
            lambda_stderr: s1.lambda_stderr,
            delta_nu_fit: s1.delta_nu,
            phase: s1.phase,
            rms_residual: rms(cost(&w, &th)),
            transient_cut: cut,
            n_extrema: s1.n_extrema,
            converged: false,
        });
    }
    let sigma2 = if n > p { c / (n - p) as f64 } else { 0.0 };
    let lambda_stderr = jtj
        .clone()
        .cholesky()
        .map(|ch| (sigma2 * ch.inverse()[(1, 1)]).sqrt())
        .filter(|se| se.is_finite())
        .unwrap_or(s1.lambda_stderr);
    let [mut a, lambda, dnu, mut phi] = theta;
    if a < 0.0 {
        a = -a;
        phi += std::f64::consts::PI;
    }
    phi = (phi + std::f64::consts::PI).rem_euclid(std::f64::consts::TAU) - std::f64::consts::PI;
    Ok(FitResult {
        amplitude: a,
        lambda,
        lambda_stderr,
        delta_nu_fit: dnu,
        phase: phi,
        rms_residual: rms(c),
        transient_cut: cut,
        n_extrema: s1.n_extrema,
        converged: true,
    })
}
