//! Product-state (mean-field) reduction: every atom sees the others only
//! through the order parameter `O = Σ_{m≠j} ⟨σ_m⁺⟩`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::params::ModelParams;

/// Single-atom density matrix in the `(g, e)` basis, row-major.
pub type Qubit = [Complex64; 4];

const G: usize = 0;
const E: usize = 1;

fn idx(r: usize, c: usize) -> usize {
    2 * r + c
}

/// `dρ/dt` of one atom: detuning, local channels with the collective decay
/// folded into spontaneous emission, and the order-parameter coupling
/// `(Γ_C/2)(σ⁻ρ − ρσ⁻) O + (Γ_C/2)(ρσ⁺ − σ⁺ρ) O*`.
pub fn meanfield_rhs(rho: &Qubit, order: Complex64, params: &ModelParams) -> Qubit {
    let i = Complex64::i();
    let gc = params.gamma_c();
    let down = params.decay_rate() + gc;
    let up = params.w;
    let deph = params.dephasing_rate();
    let (pg, pe) = (rho[idx(G, G)], rho[idx(E, E)]);
    let (ge, eg) = (rho[idx(G, E)], rho[idx(E, G)]);
    let mut d = [Complex64::new(0.0, 0.0); 4];
    // populations
    d[idx(E, E)] = up * pg - down * pe;
    d[idx(G, G)] = -up * pg + down * pe;
    // coherences: H = (Δν/2)σ_z gives ρ_ge' = +iΔν ρ_ge; L[σ_z] damps at 2·deph
    let damp = 0.5 * (up + down) + 2.0 * deph;
    d[idx(G, E)] = (i * params.delta_nu - damp) * ge;
    d[idx(E, G)] = (-i * params.delta_nu - damp) * eg;
    // σ⁻ρ − ρσ⁻ with σ⁻ = |g⟩⟨e|
    let mut comm_minus = [Complex64::new(0.0, 0.0); 4];
    for c in 0..2 {
        comm_minus[idx(G, c)] += rho[idx(E, c)];
    }
    for r in 0..2 {
        comm_minus[idx(r, E)] -= rho[idx(r, G)];
    }
    // ρσ⁺ − σ⁺ρ = (σ⁻ρ − ρσ⁻)†
    for r in 0..2 {
        for c in 0..2 {
            d[idx(r, c)] += 0.5 * gc * (comm_minus[idx(r, c)] * order + comm_minus[idx(c, r)].conj() * order.conj());
        }
    }
    d
}

pub fn sigma_z(rho: &Qubit) -> f64 {
    (rho[idx(E, E)] - rho[idx(G, G)]).re
}

/// `⟨σ⁺⟩ = ρ_ge`.
pub fn sigma_plus(rho: &Qubit) -> Complex64 {
    rho[idx(G, E)]
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanFieldSteadyState {
    pub sz: f64,
    /// `|⟨σ⁺⟩|` per atom.
    pub coherence: f64,
    /// `|O| / N`.
    pub order_per_atom: f64,
    pub synchronized: bool,
}

/// Self-consistent steady state for `N` identical atoms, `O = (N−1)⟨σ⁺⟩`.
///
/// A phase-locked solution needs the collective gain to balance the
/// coherence decay, `(N−1) Γ_C sz = Γ_t`, and a positive coherence from the
/// population balance. Otherwise the only solution is the incoherent one.
pub fn meanfield_steady_state(params: &ModelParams) -> MeanFieldSteadyState {
    let n = params.n_atoms as f64;
    let gc = params.gamma_c();
    let down = params.decay_rate() + gc;
    let w = params.w;
    let gt = 1.0 / params.t1 + 1.0 / params.t2 + w + gc;
    let free_sz = (w - down) / (w + down);
    if n >= 2.0 && gc > 0.0 {
        let sz = gt / ((n - 1.0) * gc);
        let c2 = (w * (1.0 - sz) - down * (1.0 + sz)) / (2.0 * gc * (n - 1.0));
        if sz < 1.0 && c2 > 0.0 {
            let c = c2.sqrt();
            return MeanFieldSteadyState {
                sz,
                coherence: c,
                order_per_atom: c * (n - 1.0) / n,
                synchronized: true,
            };
        }
    }
    MeanFieldSteadyState {
        sz: free_sz,
        coherence: 0.0,
        order_per_atom: 0.0,
        synchronized: false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ode::{DormandPrince, ErrorScale};

    fn random_qubit() -> Qubit {
        let c = Complex64::new(0.1, -0.2);
        [0.3.into(), c, c.conj(), 0.7.into()]
    }

    #[test]
    fn zero_order_parameter_is_independent_atom_equation() {
        // compare against the single-atom dense oracle with Γ_C moved into T1
        let p = ModelParams::new(1, 1.7, 1.0, 0.6, 2.0, 0.3);
        let rho = random_qubit();
        let d = meanfield_rhs(&rho, Complex64::new(0.0, 0.0), &p);
        let q = ModelParams { t1: 1.0 / 1.3, cooperativity: 0.0, ..p };
        let g = crate::dense::build_generator_atoms(&q).unwrap();
        let mut out = [Complex64::new(0.0, 0.0); 4];
        g.apply(&rho, &mut out);
        for k in 0..4 {
            assert!((d[k] - out[k]).norm() < 1e-14, "{k}");
        }
    }

    #[test]
    fn derivative_is_traceless() {
        let p = ModelParams::new(5, 3.0, 1.0, 1.0, 4.0, 0.5);
        let d = meanfield_rhs(&random_qubit(), Complex64::new(0.4, 1.1), &p);
        assert!((d[0] + d[3]).norm() < 1e-15);
        assert!((d[1] - d[2].conj()).norm() < 1e-15);
    }

    fn march(p: &ModelParams, t: f64) -> Qubit {
        let n = p.n_atoms as f64;
        let r = std::f64::consts::FRAC_1_SQRT_2;
        let mut y: Vec<Complex64> = vec![0.5.into(), (0.5 * r).into(), (0.5 * r).into(), 0.5.into()];
        DormandPrince::new(1e-10, ErrorScale::Mixed)
            .integrate(
                |_, y, dy| {
                    let rho = [y[0], y[1], y[2], y[3]];
                    let o = (n - 1.0) * sigma_plus(&rho);
                    dy.copy_from_slice(&meanfield_rhs(&rho, o, p));
                },
                0.0,
                t,
                &mut y,
            )
            .unwrap();
        [y[0], y[1], y[2], y[3]]
    }

    #[test]
    fn fixed_point_matches_time_marching() {
        let p = ModelParams::new(200, 0.0, 1.0, 1.0, 20.0, 0.2);
        let ss = meanfield_steady_state(&p);
        assert!(ss.synchronized && ss.sz > 0.0);
        let rho = march(&p, 30.0);
        assert!((sigma_z(&rho) - ss.sz).abs() < 1e-6);
        assert!((sigma_plus(&rho).norm() - ss.coherence).abs() < 1e-6);
    }

    #[test]
    fn order_requires_inversion() {
        for w in [0.5, 1.0, 2.0, 5.0, 10.0, 20.0, 40.0, 80.0, 160.0] {
            let p = ModelParams::new(100, 0.0, 1.0, 1.0, w, 0.2);
            let ss = meanfield_steady_state(&p);
            if ss.synchronized {
                assert!(ss.sz > 0.0 && ss.order_per_atom > 0.0);
            } else {
                assert_eq!(ss.order_per_atom, 0.0);
                let rho = march(&p, 40.0);
                assert!(sigma_plus(&rho).norm() < 1e-4, "w={w}");
            }
        }
        assert!(!meanfield_steady_state(&ModelParams::new(100, 0.0, 1.0, 1.0, 0.5, 0.2)).synchronized);
    }
}
