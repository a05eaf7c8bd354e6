//! Model parameters, derived rates and regime diagnostics.
//!
//! Times are measured in units of the excited-state lifetime `t1` by
//! convention (configs normally set `t1 = 1`), but nothing here assumes it:
//! every derived rate is computed from the stored values, so rescaling all
//! times by `s` rescales all rates by `1/s`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

fn default_delta_nu() -> f64 {
    10.0
}

/// Physical parameters of the atom (and optionally cavity) model.
///
/// `g`, `kappa` and `n_photon_max` are only consulted by the explicit
/// atom–cavity oracle; the effective atom-only model needs `cooperativity`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelParams {
    pub n_atoms: usize,
    /// Atom–local-oscillator detuning. Tooling default, not a measured value.
    #[serde(default = "default_delta_nu")]
    pub delta_nu: f64,
    pub t1: f64,
    pub t2: f64,
    /// Incoherent repumping rate.
    pub w: f64,
    pub cooperativity: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub g: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_photon_max: Option<usize>,
}

/// Rates derived from [`ModelParams`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rates {
    /// Collective decay rate through the cavity, `C / T1`.
    pub gamma_c: f64,
    /// Single-atom decoherence rate, `(1/T1 + 1/T2) / 2`.
    pub gamma_s: f64,
    /// Total coherence decay rate, `2 Γ_S + w + Γ_C`.
    pub gamma_t: f64,
}

/// Advisory regime flags. Never used to block a run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegimeReport {
    /// `√N g ≤ κ/10`; `None` when the cavity parameters are not supplied.
    pub bad_cavity: Option<bool>,
    pub sqrt_n_g_over_kappa: Option<f64>,
    /// `w > Γ_S > Γ_C`.
    pub synchronizing: bool,
    pub w_over_gamma_s: f64,
    pub gamma_s_over_gamma_c: f64,
}

impl ModelParams {
    /// Parameters with the cavity fields unset.
    pub fn new(n_atoms: usize, delta_nu: f64, t1: f64, t2: f64, w: f64, cooperativity: f64) -> Self {
        Self {
            n_atoms,
            delta_nu,
            t1,
            t2,
            w,
            cooperativity,
            g: None,
            kappa: None,
            n_photon_max: None,
        }
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let params: Self = serde_json::from_str(text)?;
        params.validate()?;
        Ok(params)
    }

    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_atoms == 0 {
            return Err(Error::InvalidParams("n_atoms must be at least 1".into()));
        }
        if !(self.t1 > 0.0) {
            return Err(Error::InvalidParams(format!("t1 must be positive, got {}", self.t1)));
        }
        if !(self.t2 > 0.0) {
            return Err(Error::InvalidParams(format!("t2 must be positive, got {}", self.t2)));
        }
        if !(self.w >= 0.0) || !self.w.is_finite() {
            return Err(Error::InvalidParams(format!("w must be finite and >= 0, got {}", self.w)));
        }
        if !(self.cooperativity >= 0.0) || !self.cooperativity.is_finite() {
            return Err(Error::InvalidParams(format!(
                "cooperativity must be finite and >= 0, got {}",
                self.cooperativity
            )));
        }
        if !self.delta_nu.is_finite() {
            return Err(Error::InvalidParams("delta_nu must be finite".into()));
        }
        if let Some(kappa) = self.kappa {
            if !(kappa > 0.0) {
                return Err(Error::InvalidParams(format!("kappa must be positive, got {kappa}")));
            }
        }
        if let Some(g) = self.g {
            if !g.is_finite() {
                return Err(Error::InvalidParams("g must be finite".into()));
            }
        }
        Ok(())
    }

    pub fn rates(&self) -> Result<Rates> {
        derive_rates(self)
    }

    /// Single-atom spontaneous decay rate `1/T1`.
    pub fn decay_rate(&self) -> f64 {
        1.0 / self.t1
    }

    /// Coefficient of the per-atom `L[σ_z]` dephasing term, `1/(4 T2)`.
    pub fn dephasing_rate(&self) -> f64 {
        0.25 / self.t2
    }

    pub fn gamma_c(&self) -> f64 {
        self.cooperativity / self.t1
    }

    /// Copy with `cooperativity` replaced by the value obtained from
    /// adiabatically eliminating the cavity, `Γ_C = g²/κ`.
    pub fn with_eliminated_cavity(&self) -> Result<Self> {
        let (g, kappa) = match (self.g, self.kappa) {
            (Some(g), Some(kappa)) => (g, kappa),
            _ => return Err(Error::InvalidParams("cavity elimination needs g and kappa".into())),
        };
        Ok(Self {
            cooperativity: g * g / kappa * self.t1,
            ..*self
        })
    }

    pub fn with_n_atoms(&self, n_atoms: usize) -> Self {
        Self { n_atoms, ..*self }
    }

    pub fn with_w(&self, w: f64) -> Self {
        Self { w, ..*self }
    }
}

pub fn derive_rates(params: &ModelParams) -> Result<Rates> {
    if !(params.t1 > 0.0) || !(params.t2 > 0.0) {
        return Err(Error::InvalidParams(format!(
            "t1 and t2 must be positive (t1 = {}, t2 = {})",
            params.t1, params.t2
        )));
    }
    let gamma_c = params.cooperativity / params.t1;
    let gamma_s = 0.5 * (1.0 / params.t1 + 1.0 / params.t2);
    let gamma_t = 2.0 * gamma_s + params.w + gamma_c;
    Ok(Rates {
        gamma_c,
        gamma_s,
        gamma_t,
    })
}

pub fn validate_regime(params: &ModelParams) -> Result<RegimeReport> {
    let rates = derive_rates(params)?;
    let sqrt_n_g_over_kappa = match (params.g, params.kappa) {
        (Some(g), Some(kappa)) => Some((params.n_atoms as f64).sqrt() * g.abs() / kappa),
        _ => None,
    };
    Ok(RegimeReport {
        bad_cavity: sqrt_n_g_over_kappa.map(|r| r <= 0.1 + 1e-12),
        sqrt_n_g_over_kappa,
        synchronizing: params.w > rates.gamma_s && rates.gamma_s > rates.gamma_c,
        w_over_gamma_s: params.w / rates.gamma_s,
        gamma_s_over_gamma_c: rates.gamma_s / rates.gamma_c,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn figure_two_rates() {
        let p = ModelParams::new(250, 10.0, 1.0, 1.0, 0.0, 0.2);
        let r = derive_rates(&p).unwrap();
        assert!((r.gamma_c - 0.2).abs() < 1e-15);
        assert!((r.gamma_s - 1.0).abs() < 1e-15);
        assert!((r.gamma_t - 2.2).abs() < 1e-15);

        let w = 250.0 * r.gamma_c / 2.0;
        let r = derive_rates(&p.with_w(w)).unwrap();
        assert!((r.gamma_t - 27.2).abs() < 1e-12);
    }

    #[test]
    fn lifetime_only() {
        let p = ModelParams::new(1, 0.0, 1.0, f64::INFINITY, 0.0, 0.0);
        let r = derive_rates(&p).unwrap();
        assert_eq!(r.gamma_s, 0.5);
        assert_eq!(r.gamma_c, 0.0);
        assert_eq!(r.gamma_t, 1.0);
    }

    #[test]
    fn rejects_nonpositive_times() {
        let mut p = ModelParams::new(1, 0.0, 0.0, 1.0, 0.0, 0.0);
        assert!(derive_rates(&p).is_err());
        p.t1 = 1.0;
        p.t2 = -1.0;
        assert!(derive_rates(&p).is_err());
        assert!(p.validate().is_err());
    }

    #[test]
    fn regime_flags() {
        let kappa = 100.0;
        let mut p = ModelParams::new(250, 10.0, 1.0, 1.0, 25.0, 0.2);
        p.kappa = Some(kappa);
        p.g = Some(0.1 * kappa / 250f64.sqrt());
        let report = validate_regime(&p).unwrap();
        assert_eq!(report.bad_cavity, Some(true));
        assert!(report.synchronizing);
        p.g = Some(kappa / 250f64.sqrt());
        assert_eq!(validate_regime(&p).unwrap().bad_cavity, Some(false));

        let conventional = ModelParams::new(250, 10.0, 1.0, 1.0, 0.0, 0.2);
        let report = validate_regime(&conventional).unwrap();
        assert!(!report.synchronizing);
        assert_eq!(report.bad_cavity, None);
    }

    #[test]
    fn json_rejects_unknown_keys() {
        let ok = r#"{"n_atoms": 4, "t1": 1.0, "t2": 1.0, "w": 2.0, "cooperativity": 0.2}"#;
        let p = ModelParams::from_json_str(ok).unwrap();
        assert_eq!(p.delta_nu, 10.0);
        let typo = r#"{"n_atoms": 4, "t1": 1.0, "t2": 1.0, "w": 2.0, "cooperativty": 0.2}"#;
        assert!(ModelParams::from_json_str(typo).is_err());
        let zero = r#"{"n_atoms": 0, "t1": 1.0, "t2": 1.0, "w": 2.0, "cooperativity": 0.2}"#;
        assert!(ModelParams::from_json_str(zero).is_err());
    }

    proptest! {
        #[test]
        fn rates_scale_covariantly(
            t1 in 0.1f64..10.0, t2 in 0.1f64..10.0, w in 0.0f64..50.0,
            c in 0.0f64..2.0, s in 0.1f64..10.0,
        ) {
            let p = ModelParams::new(10, 1.0, t1, t2, w, c);
            let scaled = ModelParams { t1: t1 * s, t2: t2 * s, w: w / s, ..p };
            let a = derive_rates(&p).unwrap();
            let b = derive_rates(&scaled).unwrap();
            for (x, y) in [(a.gamma_c, b.gamma_c), (a.gamma_s, b.gamma_s), (a.gamma_t, b.gamma_t)] {
                prop_assert!((x / s - y).abs() <= 1e-12 * x.abs().max(1.0));
            }
            prop_assert_eq!(a.gamma_t - (2.0 * a.gamma_s + w + a.gamma_c), 0.0);
            prop_assert!(a.gamma_t >= 2.0 * a.gamma_s);
        }
    }
}
