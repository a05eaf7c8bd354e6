//! Second-order cumulant closure for `⟨σ_z⟩` and the pair coherence
//! `⟨σ_j⁺σ_k⁻⟩`, its steady state, and the resulting visibility decay rate.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ode::{DormandPrince, ErrorScale};
use crate::output::{fmt_float, Csv};
use crate::params::ModelParams;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CumulantState {
    pub sz: f64,
    pub spsm: f64,
}

/// `(d sz/dt, d spsm/dt)` of the closed pair.
pub fn cumulant_rhs(state: CumulantState, params: &ModelParams) -> CumulantState {
    let n = params.n_atoms as f64;
    let gc = params.gamma_c();
    let gt = 2.0 * 0.5 * (1.0 / params.t1 + 1.0 / params.t2) + params.w + gc;
    let CumulantState { sz, spsm } = state;
    CumulantState {
        sz: -(gc + params.decay_rate()) * (sz + 1.0) - params.w * (sz - 1.0) - 2.0 * gc * (n - 1.0) * spsm,
        spsm: -gt * spsm + 0.5 * gc * sz * (1.0 + sz) + gc * (n - 2.0) * spsm * sz,
    }
}

/// Integrate the closed pair for `duration`.
pub fn integrate_cumulant(state: CumulantState, params: &ModelParams, duration: f64, tol: f64) -> Result<CumulantState> {
    let mut y = [state.sz, state.spsm];
    DormandPrince::new(tol, ErrorScale::Mixed).integrate(
        |_, y, dy| {
            let d = cumulant_rhs(CumulantState { sz: y[0], spsm: y[1] }, params);
            dy[0] = d.sz;
            dy[1] = d.spsm;
        },
        0.0,
        duration,
        &mut y,
    )?;
    Ok(CumulantState { sz: y[0], spsm: y[1] })
}

fn spsm_given_sz(sz: f64, params: &ModelParams) -> (f64, f64) {
    let n = params.n_atoms as f64;
    let gc = params.gamma_c();
    let gt = 1.0 / params.t1 + 1.0 / params.t2 + params.w + gc;
    let denom = gt - gc * (n - 2.0) * sz;
    (0.5 * gc * sz * (1.0 + sz) / denom, denom)
}

/// Steady state of [`cumulant_rhs`].
///
/// Eliminating `spsm` with the second equation leaves a quadratic in `sz`.
/// The root that stays finite as `Γ_C → 0` (and so connects continuously to
/// the uncoupled value `(w − 1/T1)/(w + 1/T1)`) is preferred; a root is
/// accepted if `|sz| ≤ 1`, the elimination denominator is positive and
/// `spsm ≥ −1/4`.
pub fn cumulant_steady_state(params: &ModelParams) -> Result<CumulantState> {
    params.validate()?;
    let gc = params.gamma_c();
    if !(gc > 0.0) || params.n_atoms < 2 {
        return Err(Error::InvalidParams("cumulant steady state needs Γ_C > 0 and N >= 2".into()));
    }
    let n = params.n_atoms as f64;
    let a = gc + params.decay_rate();
    let w = params.w;
    let gt = 1.0 / params.t1 + 1.0 / params.t2 + w + gc;
    let g = gc * (n - 2.0);
    let k = gc * gc * (n - 1.0);
    let qa = (a + w) * g - k;
    let qb = -(a + w) * gt - (w - a) * g - k;
    let qc = (w - a) * gt;
    let disc = qb * qb - 4.0 * qa * qc;
    if disc < 0.0 {
        return Err(Error::NoPhysicalRoot(format!("negative discriminant {disc:e}")));
    }
    let q = -0.5 * (qb + qb.signum() * disc.sqrt());
    let mut candidates = Vec::new();
    if q != 0.0 {
        candidates.push(qc / q);
    }
    if qa != 0.0 {
        candidates.push(q / qa);
    }
    for x0 in candidates {
        // polish on the quadratic
        let mut x = x0;
        for _ in 0..3 {
            let f = (qa * x + qb) * x + qc;
            let df = 2.0 * qa * x + qb;
            if df == 0.0 {
                break;
            }
            x -= f / df;
        }
        let (spsm, denom) = spsm_given_sz(x, params);
        if x.abs() <= 1.0 + 1e-12 && denom > 0.0 && spsm >= -0.25 {
            return Ok(CumulantState { sz: x, spsm });
        }
    }
    Err(Error::NoPhysicalRoot(format!(
        "no root with |sz| <= 1, positive denominator and spsm >= -1/4 (N = {}, w = {w}, Γ_C = {gc})",
        params.n_atoms
    )))
}

/// Visibility decay rate `½[Γ_t − (N − 1) Γ_C α sz]` for a given inversion.
pub fn lambda_from(params: &ModelParams, sz: f64, alpha: f64) -> f64 {
    let n = params.n_atoms as f64;
    let gc = params.gamma_c();
    let gt = 1.0 / params.t1 + 1.0 / params.t2 + params.w + gc;
    0.5 * (gt - (n - 1.0) * gc * alpha * sz)
}

/// Decay rate with `α = 1` and the cumulant steady-state inversion. Without
/// collective coupling this is `Γ_t / 2`.
pub fn lambda_semiclassical(params: &ModelParams) -> Result<f64> {
    params.validate()?;
    if params.gamma_c() == 0.0 || params.n_atoms < 2 {
        return Ok(lambda_from(params, 0.0, 1.0));
    }
    let ss = cumulant_steady_state(params)?;
    Ok(lambda_from(params, ss.sz, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SemiclassicalPoint {
    pub value: f64,
    pub lambda: f64,
    pub sz_ss: f64,
    pub spsm_ss: f64,
}

pub fn semiclassical_point(params: &ModelParams, value: f64) -> Result<SemiclassicalPoint> {
    let ss = cumulant_steady_state(params)?;
    Ok(SemiclassicalPoint {
        value,
        lambda: lambda_from(params, ss.sz, 1.0),
        sz_ss: ss.sz,
        spsm_ss: ss.spsm,
    })
}

pub fn semiclassical_csv(axis: &str, points: &[SemiclassicalPoint]) -> Csv {
    let mut csv = Csv::new(&[axis, "lambda_semiclassical", "sz_ss", "spsm_ss"]);
    for p in points {
        csv.row(&[fmt_float(p.value), fmt_float(p.lambda), fmt_float(p.sz_ss), fmt_float(p.spsm_ss)]);
    }
    csv
}
