//! Brute-force solvers on the full Hilbert space, used as ground truth for
//! small ensembles.
//!
//! Two models are provided: the effective atom-only master equation with
//! collective decay `Γ_C L[J₋]`, and the explicit atom–cavity model with
//! Jaynes–Cummings coupling and cavity loss `κ L[a]` that it is derived from.
//! Both share the per-atom channels `w L[σ⁺]`, `(1/T1) L[σ⁻]` and
//! `(1/(4 T2)) L[σ_z]`, where `L[O]ρ = OρO† − ½{O†O, ρ}`.

pub mod ops;

use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::ode::{DormandPrince, ErrorScale};
use crate::params::ModelParams;
use crate::rotation::Axis;
pub use ops::{Op, Space};

/// Largest ensemble accepted by the atom-only oracle.
pub const MAX_ATOMS: usize = 8;
/// Largest ensemble accepted by the atom–cavity oracle.
pub const MAX_CAVITY_ATOMS: usize = 4;
pub const MAX_PHOTON_CUTOFF: usize = 10;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StateKind {
    DensityMatrix,
    PureState,
}

/// A density matrix (row-major `dim × dim`) or a state vector.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseState {
    pub kind: StateKind,
    pub space: Space,
    pub data: Vec<Complex64>,
}

impl DenseState {
    /// All atoms in `|g⟩`, cavity (if any) in vacuum, as a density matrix.
    pub fn ground(space: Space) -> Self {
        let dim = space.dim();
        let mut data = vec![ZERO; dim * dim];
        data[0] = ONE;
        Self {
            kind: StateKind::DensityMatrix,
            space,
            data,
        }
    }

    /// Pure product state with every atom in `amp_g |g⟩ + amp_e |e⟩` and the
    /// cavity in vacuum.
    pub fn product(space: Space, amp_g: Complex64, amp_e: Complex64) -> Self {
        let mut psi = vec![ZERO; space.dim()];
        for a in 0..space.atom_dim() {
            let mut amp = ONE;
            for atom in 0..space.n_atoms {
                amp *= if space.atom_bit(a, atom) == 1 { amp_e } else { amp_g };
            }
            psi[a * space.photon_levels] = amp;
        }
        Self {
            kind: StateKind::PureState,
            space,
            data: psi,
        }
    }

    pub fn from_density(space: Space, data: Vec<Complex64>) -> Result<Self> {
        if data.len() != space.dim() * space.dim() {
            return Err(Error::Incompatible(format!(
                "density matrix has {} entries, space needs {}",
                data.len(),
                space.dim() * space.dim()
            )));
        }
        Ok(Self {
            kind: StateKind::DensityMatrix,
            space,
            data,
        })
    }

    pub fn from_pure(space: Space, psi: Vec<Complex64>) -> Result<Self> {
        if psi.len() != space.dim() {
            return Err(Error::Incompatible(format!(
                "state vector has {} entries, space needs {}",
                psi.len(),
                space.dim()
            )));
        }
        Ok(Self {
            kind: StateKind::PureState,
            space,
            data: psi,
        })
    }

    pub fn dim(&self) -> usize {
        self.space.dim()
    }

    pub fn to_density(&self) -> Self {
        match self.kind {
            StateKind::DensityMatrix => self.clone(),
            StateKind::PureState => {
                let d = self.dim();
                let mut rho = vec![ZERO; d * d];
                for a in 0..d {
                    for b in 0..d {
                        rho[a * d + b] = self.data[a] * self.data[b].conj();
                    }
                }
                Self {
                    kind: StateKind::DensityMatrix,
                    space: self.space,
                    data: rho,
                }
            }
        }
    }

    pub fn trace(&self) -> Complex64 {
        match self.kind {
            StateKind::DensityMatrix => (0..self.dim()).map(|a| self.data[a * self.dim() + a]).sum(),
            StateKind::PureState => self.data.iter().map(|v| v.norm_sqr()).sum::<f64>().into(),
        }
    }

    /// `max |ρ − ρ†|`; zero for pure states.
    pub fn hermiticity_defect(&self) -> f64 {
        if self.kind == StateKind::PureState {
            return 0.0;
        }
        let d = self.dim();
        let mut worst = 0.0f64;
        for a in 0..d {
            for b in a..d {
                worst = worst.max((self.data[a * d + b] - self.data[b * d + a].conj()).norm());
            }
        }
        worst
    }

    pub fn renormalize(&mut self) {
        match self.kind {
            StateKind::DensityMatrix => {
                let tr = self.trace();
                self.data.iter_mut().for_each(|v| *v /= tr);
            }
            StateKind::PureState => {
                let n = self.trace().re.sqrt();
                self.data.iter_mut().for_each(|v| *v /= n);
            }
        }
    }

    /// Smallest eigenvalue of the density matrix.
    pub fn min_eigenvalue(&self) -> f64 {
        let rho = self.to_density();
        let d = rho.dim();
        let m = DMatrix::from_fn(d, d, |a, b| rho.data[a * d + b]);
        // symmetrize against roundoff before the Hermitian solver
        let m = (&m + m.adjoint()) * Complex64::new(0.5, 0.0);
        m.symmetric_eigenvalues().iter().cloned().fold(f64::INFINITY, f64::min)
    }

    /// Exchange the roles of two atoms.
    pub fn swap_atoms(&self, i: usize, j: usize) -> Self {
        let space = self.space;
        let perm = |idx: usize| -> usize {
            let (a, n) = (idx / space.photon_levels, idx % space.photon_levels);
            let bi = space.atom_bit(a, i);
            let bj = space.atom_bit(a, j);
            let mi = 1 << (space.n_atoms - 1 - i);
            let mj = 1 << (space.n_atoms - 1 - j);
            let mut a2 = a & !mi & !mj;
            if bi == 1 {
                a2 |= mj;
            }
            if bj == 1 {
                a2 |= mi;
            }
            a2 * space.photon_levels + n
        };
        let d = self.dim();
        let mut data = vec![ZERO; self.data.len()];
        match self.kind {
            StateKind::PureState => {
                for a in 0..d {
                    data[perm(a)] = self.data[a];
                }
            }
            StateKind::DensityMatrix => {
                for a in 0..d {
                    for b in 0..d {
                        data[perm(a) * d + perm(b)] = self.data[a * d + b];
                    }
                }
            }
        }
        Self { data, ..self.clone() }
    }

    /// Trace out the cavity, leaving the atomic density matrix.
    pub fn atomic_marginal(&self) -> Self {
        let rho = self.to_density();
        let space = rho.space;
        let (da, p) = (space.atom_dim(), space.photon_levels);
        let d = space.dim();
        let mut out = vec![ZERO; da * da];
        for a in 0..da {
            for b in 0..da {
                out[a * da + b] = (0..p).map(|n| rho.data[(a * p + n) * d + b * p + n]).sum();
            }
        }
        Self {
            kind: StateKind::DensityMatrix,
            space: Space::atoms(space.n_atoms),
            data: out,
        }
    }

    /// Collective rotation `exp(−iθ J_axis)`, applied atom by atom.
    pub fn rotate(&self, axis: Axis, angle: f64) -> Self {
        let (c, s) = ((angle / 2.0).cos(), (angle / 2.0).sin());
        // single-atom unitary in the (g, e) basis
        let u: [[Complex64; 2]; 2] = match axis {
            // exp(−iθσ_y/2) = [[c, −s], [s, c]] in (e, g); reorder to (g, e)
            Axis::Y => [[c.into(), (-s).into()], [s.into(), c.into()]],
            Axis::X => [[c.into(), -I * s], [-I * s, c.into()]],
        };
        // (g, e) ordering: u_ge[out][in]
        let u_ge = match axis {
            Axis::Y => [[u[0][0], u[1][0]], [u[0][1], u[1][1]]],
            Axis::X => u,
        };
        let space = self.space;
        let d = self.dim();
        let apply_vec = |v: &mut [Complex64], stride: usize| {
            for atom in 0..space.n_atoms {
                let mask = 1usize << (space.n_atoms - 1 - atom);
                let offset = mask * space.photon_levels;
                for idx in 0..d {
                    if (idx / space.photon_levels) & mask == 0 {
                        let (i0, i1) = (idx, idx + offset);
                        let (g, e) = (v[i0 * stride], v[i1 * stride]);
                        v[i0 * stride] = u_ge[0][0] * g + u_ge[0][1] * e;
                        v[i1 * stride] = u_ge[1][0] * g + u_ge[1][1] * e;
                    }
                }
            }
        };
        let mut out = self.clone();
        match self.kind {
            StateKind::PureState => apply_vec(&mut out.data, 1),
            StateKind::DensityMatrix => {
                // columns: U ρ
                for col in 0..d {
                    apply_vec(&mut out.data[col..], d);
                }
                // rows: (U ρ) U† = conj(U (U ρ)†)... done via conjugated rows
                for row in 0..d {
                    let r = &mut out.data[row * d..(row + 1) * d];
                    r.iter_mut().for_each(|v| *v = v.conj());
                    apply_vec(r, 1);
                    r.iter_mut().for_each(|v| *v = v.conj());
                }
            }
        }
        out
    }

    /// Write as little-endian binary: magic `SRDS`, format version (u32),
    /// kind (u32: 0 density matrix, 1 pure state), rows (u64), cols (u64),
    /// atoms (u64), photon levels (u64), then row-major `(re, im)` f64 pairs.
    pub fn write_binary(&self, path: impl AsRef<Path>) -> Result<()> {
        let d = self.dim() as u64;
        let (rows, cols) = match self.kind {
            StateKind::DensityMatrix => (d, d),
            StateKind::PureState => (d, 1),
        };
        let mut buf = Vec::with_capacity(48 + 16 * self.data.len());
        buf.extend_from_slice(b"SRDS");
        buf.extend_from_slice(&1u32.to_le_bytes());
        let kind: u32 = match self.kind {
            StateKind::DensityMatrix => 0,
            StateKind::PureState => 1,
        };
        buf.extend_from_slice(&kind.to_le_bytes());
        for v in [rows, cols, self.space.n_atoms as u64, self.space.photon_levels as u64] {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        for z in &self.data {
            buf.extend_from_slice(&z.re.to_le_bytes());
            buf.extend_from_slice(&z.im.to_le_bytes());
        }
        std::fs::File::create(path)?.write_all(&buf)?;
        Ok(())
    }

    pub fn read_binary(path: impl AsRef<Path>) -> Result<Self> {
        let mut buf = Vec::new();
        std::fs::File::open(path)?.read_to_end(&mut buf)?;
        let bad = |msg: &str| Error::Incompatible(format!("state dump: {msg}"));
        if buf.len() < 44 || &buf[..4] != b"SRDS" {
            return Err(bad("missing header"));
        }
        let u32_at = |o: usize| u32::from_le_bytes(buf[o..o + 4].try_into().unwrap());
        let u64_at = |o: usize| u64::from_le_bytes(buf[o..o + 8].try_into().unwrap()) as usize;
        if u32_at(4) != 1 {
            return Err(bad("unsupported version"));
        }
        let kind = match u32_at(8) {
            0 => StateKind::DensityMatrix,
            1 => StateKind::PureState,
            _ => return Err(bad("unknown kind")),
        };
        let (rows, cols, n_atoms, photon_levels) = (u64_at(12), u64_at(20), u64_at(28), u64_at(36));
        let space = Space {
            n_atoms,
            photon_levels,
        };
        let body = &buf[44..];
        if body.len() != rows * cols * 16 || rows != space.dim() {
            return Err(bad("size mismatch"));
        }
        let data = body
            .chunks_exact(16)
            .map(|c| {
                Complex64::new(
                    f64::from_le_bytes(c[..8].try_into().unwrap()),
                    f64::from_le_bytes(c[8..].try_into().unwrap()),
                )
            })
            .collect();
        Ok(Self { kind, space, data })
    }
}

/// The Lindblad generator `ρ ↦ dρ/dt`, stored as sparse operators and
/// applied without assembling the Liouville-space matrix:
/// `dρ/dt = −i(H_eff ρ − ρ H_eff†) + Σ_k r_k L_k ρ L_k†` with
/// `H_eff = H − (i/2) Σ_k r_k L_k† L_k`.
#[derive(Debug, Clone)]
pub struct LinearGenerator {
    pub space: Space,
    h_eff: Op,
    h_eff_adj: Op,
    jumps: Vec<(f64, Op, Op)>,
}

impl LinearGenerator {
    pub fn new(space: Space, hamiltonian: Op, channels: Vec<(f64, Op)>) -> Self {
        let mut h_eff = hamiltonian;
        let mut jumps = Vec::new();
        for (rate, l) in channels {
            if rate == 0.0 || l.nnz() == 0 {
                continue;
            }
            let ldag = l.adjoint();
            h_eff = h_eff.add(&ldag.matmul(&l).scale(Complex64::new(0.0, -0.5 * rate)));
            jumps.push((rate, l, ldag));
        }
        let h_eff_adj = h_eff.adjoint();
        Self {
            space,
            h_eff,
            h_eff_adj,
            jumps,
        }
    }

    pub fn zero(space: Space) -> Self {
        Self::new(space, Op::zeros(space.dim(), space.dim()), Vec::new())
    }

    /// `out = L(ρ)` for a row-major density matrix.
    pub fn apply(&self, rho: &[Complex64], out: &mut [Complex64]) {
        let d = self.space.dim();
        out.iter_mut().for_each(|v| *v = ZERO);
        // −i H_eff ρ
        for (r, c, v) in self.h_eff.iter() {
            let f = -I * v;
            let (dst, src) = (r * d, c * d);
            for b in 0..d {
                out[dst + b] += f * rho[src + b];
            }
        }
        // +i ρ H_eff†:  (ρ A)_{ab} = Σ_c ρ_{ac} A_{cb}
        for (c, b, v) in self.h_eff_adj.iter() {
            let f = I * v;
            for a in 0..d {
                out[a * d + b] += f * rho[a * d + c];
            }
        }
        let mut tmp = vec![ZERO; d * d];
        for (rate, l, ldag) in &self.jumps {
            tmp.iter_mut().for_each(|v| *v = ZERO);
            for (r, c, v) in l.iter() {
                for b in 0..d {
                    tmp[r * d + b] += v * rho[c * d + b];
                }
            }
            for (c, b, v) in ldag.iter() {
                let f = v * *rate;
                for a in 0..d {
                    out[a * d + b] += f * tmp[a * d + c];
                }
            }
        }
    }
}

fn local_channels(space: Space, params: &ModelParams) -> Vec<(f64, Op)> {
    let mut channels = Vec::new();
    for k in 0..space.n_atoms {
        channels.push((params.w, ops::sigma_plus(space, k)));
        channels.push((params.decay_rate(), ops::sigma_minus(space, k)));
        channels.push((params.dephasing_rate(), ops::sigma_z(space, k)));
    }
    channels
}

/// Generator of the effective atom-only master equation.
pub fn build_generator_atoms(params: &ModelParams) -> Result<LinearGenerator> {
    params.validate()?;
    if params.n_atoms > MAX_ATOMS {
        return Err(Error::TooLarge(format!(
            "dense oracle supports at most {MAX_ATOMS} atoms, got {}",
            params.n_atoms
        )));
    }
    let space = Space::atoms(params.n_atoms);
    let h = ops::j_z(space).scale(params.delta_nu.into());
    let mut channels = vec![(params.gamma_c(), ops::j_minus(space))];
    channels.extend(local_channels(space, params));
    Ok(LinearGenerator::new(space, h, channels))
}

/// Generator of the explicit atom–cavity model (cavity resonant with the
/// local oscillator, atoms detuned by `Δν`).
pub fn build_generator_cavity(params: &ModelParams) -> Result<LinearGenerator> {
    params.validate()?;
    let (g, kappa, cutoff) = match (params.g, params.kappa, params.n_photon_max) {
        (Some(g), Some(k), Some(n)) => (g, k, n),
        _ => {
            return Err(Error::InvalidParams(
                "cavity model needs g, kappa and n_photon_max".into(),
            ))
        }
    };
    if params.n_atoms > MAX_CAVITY_ATOMS || cutoff > MAX_PHOTON_CUTOFF {
        return Err(Error::TooLarge(format!(
            "cavity oracle supports N <= {MAX_CAVITY_ATOMS} and cutoff <= {MAX_PHOTON_CUTOFF}"
        )));
    }
    let space = Space::with_cavity(params.n_atoms, cutoff);
    let a = ops::annihilate(space);
    let coupling = a.adjoint().matmul(&ops::j_minus(space)).add(&a.matmul(&ops::j_plus(space)));
    let h = ops::j_z(space)
        .scale(params.delta_nu.into())
        .add(&coupling.scale((0.5 * g).into()));
    let mut channels = vec![(kappa, a)];
    channels.extend(local_channels(space, params));
    Ok(LinearGenerator::new(space, h, channels))
}

/// Stateful propagator that keeps the adaptive step size across calls.
pub struct DenseEvolution<'g> {
    generator: &'g LinearGenerator,
    integrator: DormandPrince<Complex64>,
    pub state: DenseState,
    pub time: f64,
}

impl<'g> DenseEvolution<'g> {
    pub fn new(state: DenseState, generator: &'g LinearGenerator, tol: f64) -> Result<Self> {
        if state.kind != StateKind::DensityMatrix {
            return Err(Error::Incompatible("Lindblad evolution needs a density matrix".into()));
        }
        if state.space != generator.space {
            return Err(Error::Incompatible(format!(
                "state space {:?} does not match generator space {:?}",
                state.space, generator.space
            )));
        }
        if !(tol > 0.0) {
            return Err(Error::InvalidParams("tolerance must be positive".into()));
        }
        Ok(Self {
            generator,
            integrator: DormandPrince::new(tol, ErrorScale::Mixed),
            state,
            time: 0.0,
        })
    }

    pub fn advance_to(&mut self, t: f64) -> Result<()> {
        let tr0 = self.state.trace();
        let g = self.generator;
        self.integrator
            .integrate(|_, y, dy| g.apply(y, dy), self.time, t, &mut self.state.data)
            .map_err(|e| match e {
                Error::StepSizeUnderflow { t, h } => Error::StepSizeUnderflow { t, h },
                other => other,
            })?;
        self.time = t;
        let drift = (self.state.trace() - tr0).norm();
        if drift > 1e-10 {
            return Err(Error::Incompatible(format!("trace drifted by {drift:e} by t = {t}")));
        }
        Ok(())
    }
}

/// Propagate a density matrix for `duration` with local error `tol`.
pub fn evolve_dense(
    state: &DenseState,
    generator: &LinearGenerator,
    duration: f64,
    tol: f64,
) -> Result<DenseState> {
    let mut evo = DenseEvolution::new(state.clone(), generator, tol)?;
    evo.advance_to(duration)?;
    Ok(evo.state)
}

/// Observables understood by [`expect_dense`]. "Single" observables refer to
/// the first atom.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Observable {
    SigmaZSingle,
    SigmaPlusSingle,
    Jz,
    Jplus,
    JplusJminus,
    JplusJz,
    PhotonNumber,
}

impl FromStr for Observable {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "sigma_z_single" => Self::SigmaZSingle,
            "sigma_plus_single" => Self::SigmaPlusSingle,
            "Jz" => Self::Jz,
            "Jplus" => Self::Jplus,
            "JplusJminus" => Self::JplusJminus,
            "JplusJz" => Self::JplusJz,
            "photon_number" => Self::PhotonNumber,
            other => return Err(Error::UnknownObservable(other.to_string())),
        })
    }
}

impl Observable {
    pub fn operator(self, space: Space) -> Op {
        match self {
            Self::SigmaZSingle => ops::sigma_z(space, 0),
            Self::SigmaPlusSingle => ops::sigma_plus(space, 0),
            Self::Jz => ops::j_z(space),
            Self::Jplus => ops::j_plus(space),
            Self::JplusJminus => ops::j_plus(space).matmul(&ops::j_minus(space)),
            Self::JplusJz => ops::j_plus(space).matmul(&ops::j_z(space)),
            Self::PhotonNumber => ops::photon_number(space),
        }
    }
}

/// `Tr(O ρ)` or `⟨ψ|O|ψ⟩` for an arbitrary sparse operator.
pub fn expect_operator(state: &DenseState, op: &Op) -> Complex64 {
    let d = state.dim();
    match state.kind {
        StateKind::DensityMatrix => op.iter().map(|(r, c, v)| v * state.data[c * d + r]).sum(),
        StateKind::PureState => op.iter().map(|(r, c, v)| state.data[r].conj() * v * state.data[c]).sum(),
    }
}

pub fn expect_dense(state: &DenseState, observable: Observable) -> Complex64 {
    expect_operator(state, &observable.operator(state.space))
}

/// Parse an observable name and evaluate it.
pub fn expect_named(state: &DenseState, name: &str) -> Result<Complex64> {
    Ok(expect_dense(state, name.parse()?))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rates(n: usize, delta_nu: f64, w: f64, c: f64, t2: f64) -> ModelParams {
        ModelParams::new(n, delta_nu, 1.0, t2, w, c)
    }

    fn equator(space: Space) -> DenseState {
        let r = std::f64::consts::FRAC_1_SQRT_2;
        DenseState::product(space, r.into(), r.into())
    }

    #[test]
    fn ground_state_expectations() {
        let s = DenseState::ground(Space::atoms(3));
        assert_eq!(expect_dense(&s, Observable::SigmaZSingle).re, -1.0);
        assert_eq!(expect_dense(&s, Observable::JplusJminus).norm(), 0.0);
    }

    #[test]
    fn equator_pair_correlation() {
        let space = Space::atoms(2);
        let s = equator(space).to_density();
        let pair = ops::sigma_plus(space, 0).matmul(&ops::sigma_minus(space, 1));
        assert!((expect_operator(&s, &pair) - Complex64::new(0.25, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn unknown_observable_is_rejected() {
        let s = DenseState::ground(Space::atoms(1));
        assert!(matches!(expect_named(&s, "Jq"), Err(Error::UnknownObservable(_))));
        assert!(expect_named(&s, "Jz").is_ok());
    }

    #[test]
    fn single_atom_free_precession() {
        let p = rates(1, 1.0, 0.0, 0.0, f64::INFINITY);
        let p = ModelParams { t1: f64::INFINITY, ..p };
        let g = build_generator_atoms(&p).unwrap();
        let s0 = equator(g.space).to_density();
        let sp0 = expect_dense(&s0, Observable::SigmaPlusSingle);
        let t = 2.3;
        let s = evolve_dense(&s0, &g, t, 1e-12).unwrap();
        let sp = expect_dense(&s, Observable::SigmaPlusSingle);
        assert!((sp - sp0 * Complex64::from_polar(1.0, t)).norm() < 1e-10);
    }

    #[test]
    fn single_atom_decay_closed_form() {
        let p = rates(1, 0.0, 0.0, 0.0, f64::INFINITY);
        let g = build_generator_atoms(&p).unwrap();
        let s0 = equator(g.space).to_density();
        let z0 = expect_dense(&s0, Observable::SigmaZSingle).re;
        let t = 1.7;
        let s = evolve_dense(&s0, &g, t, 1e-12).unwrap();
        let z = expect_dense(&s, Observable::SigmaZSingle).re;
        assert!((z - (-1.0 + (z0 + 1.0) * (-t).exp())).abs() < 1e-10);
    }

    #[test]
    fn single_atom_pumped_steady_state() {
        // rate equation: dz/dt = −(γ↓ + Γ_C)(z + 1) − w(z − 1)
        let (w, c) = (3.0, 0.4);
        let p = rates(1, 0.0, w, c, 2.0);
        let g = build_generator_atoms(&p).unwrap();
        let s = evolve_dense(&DenseState::ground(g.space), &g, 20.0, 1e-11).unwrap();
        let z = expect_dense(&s, Observable::SigmaZSingle).re;
        let down = 1.0 + c;
        assert!((z - (w - down) / (w + down)).abs() < 1e-9);
    }

    #[test]
    fn pure_collective_decay_preserves_trace() {
        let p = rates(2, 0.0, 0.0, 1.0, f64::INFINITY);
        let p = ModelParams { t1: 1e300, ..p };
        let p = ModelParams { cooperativity: 1.0 * p.t1, ..p };
        let g = build_generator_atoms(&p).unwrap();
        let mut s = DenseState::ground(g.space).rotate(Axis::Y, std::f64::consts::PI);
        let mut last = expect_dense(&s, Observable::Jz).re;
        assert!((last - 1.0).abs() < 1e-12);
        for _ in 0..20 {
            s = evolve_dense(&s, &g, 0.1, 1e-11).unwrap();
            let jz = expect_dense(&s, Observable::Jz).re;
            assert!(jz < last);
            assert!((s.trace().re - 1.0).abs() < 1e-10);
            last = jz;
        }
    }

    #[test]
    fn zero_generator_is_identity() {
        let space = Space::atoms(3);
        let g = LinearGenerator::zero(space);
        let s0 = equator(space).to_density().rotate(Axis::X, 0.3);
        let s = evolve_dense(&s0, &g, 5.0, 1e-8).unwrap();
        let diff = s.data.iter().zip(&s0.data).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        assert!(diff < 1e-14);
    }

    #[test]
    fn tolerance_halving_converges() {
        let p = rates(3, 5.0, 2.0, 0.3, 1.0);
        let g = build_generator_atoms(&p).unwrap();
        let s0 = DenseState::ground(g.space).rotate(Axis::Y, -std::f64::consts::FRAC_PI_2);
        let tol = 1e-7;
        let a = evolve_dense(&s0, &g, 2.0, tol).unwrap();
        let b = evolve_dense(&s0, &g, 2.0, tol / 2.0).unwrap();
        let ja = expect_dense(&a, Observable::Jz).re;
        let jb = expect_dense(&b, Observable::Jz).re;
        assert!((ja - jb).abs() <= 10.0 * tol);
    }

    #[test]
    fn evolution_invariants() {
        let p = rates(3, 4.0, 1.5, 0.5, 0.7);
        let g = build_generator_atoms(&p).unwrap();
        let mut evo = DenseEvolution::new(
            DenseState::ground(g.space).rotate(Axis::Y, -std::f64::consts::FRAC_PI_2),
            &g,
            1e-10,
        )
        .unwrap();
        for k in 1..=5 {
            evo.advance_to(0.5 * k as f64).unwrap();
            let s = &evo.state;
            assert!((s.trace().re - 1.0).abs() < 1e-10);
            assert!(s.hermiticity_defect() < 1e-10);
            assert!(s.min_eigenvalue() > -1e-8);
            let swapped = s.swap_atoms(0, 2);
            let diff = s.data.iter().zip(&swapped.data).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
            assert!(diff < 1e-10);
        }
    }

    #[test]
    fn cavity_decoupled_matches_atoms_only() {
        let mut p = rates(2, 3.0, 1.0, 0.0, 1.0);
        p.g = Some(0.0);
        p.kappa = Some(5.0);
        p.n_photon_max = Some(2);
        let gc = build_generator_cavity(&p).unwrap();
        let ga = build_generator_atoms(&p).unwrap();
        let sa = DenseState::ground(ga.space).rotate(Axis::Y, -1.1);
        let sc = DenseState::ground(gc.space).rotate(Axis::Y, -1.1);
        let a = evolve_dense(&sa, &ga, 1.5, 1e-12).unwrap();
        let c = evolve_dense(&sc, &gc, 1.5, 1e-12).unwrap().atomic_marginal();
        let diff = a.data.iter().zip(&c.data).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max);
        assert!(diff < 1e-12, "{diff}");
    }

    #[test]
    fn cavity_requires_parameters_and_guards_size() {
        let p = rates(2, 0.0, 0.0, 0.0, 1.0);
        assert!(matches!(build_generator_cavity(&p), Err(Error::InvalidParams(_))));
        let mut big = rates(5, 0.0, 0.0, 0.0, 1.0);
        big.g = Some(1.0);
        big.kappa = Some(1.0);
        big.n_photon_max = Some(2);
        assert!(matches!(build_generator_cavity(&big), Err(Error::TooLarge(_))));
        assert!(matches!(build_generator_atoms(&rates(9, 0.0, 0.0, 0.0, 1.0)), Err(Error::TooLarge(_))));
    }

    #[test]
    fn rotation_conventions() {
        let space = Space::atoms(1);
        let g = DenseState::ground(space);
        // exp(−i(π/2)J_y) takes −z to −x
        let s = g.rotate(Axis::Y, std::f64::consts::FRAC_PI_2);
        let sx = expect_operator(&s, &ops::sigma_x(space, 0)).re;
        assert!((sx + 1.0).abs() < 1e-14);
        // exp(−i(π/2)J_x) takes +y to +z
        let plus_y = DenseState::product(
            space,
            Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0),
            Complex64::new(0.0, -std::f64::consts::FRAC_1_SQRT_2),
        );
        assert!((expect_operator(&plus_y, &ops::sigma_y(space, 0)).re - 1.0).abs() < 1e-14);
        let r = plus_y.rotate(Axis::X, std::f64::consts::FRAC_PI_2);
        assert!((expect_operator(&r, &ops::sigma_z(space, 0)).re - 1.0).abs() < 1e-14);
        // density-matrix and pure-state rotations agree
        let rho = plus_y.to_density().rotate(Axis::X, 0.77);
        let psi = plus_y.rotate(Axis::X, 0.77).to_density();
        let diff = rho.data.iter().zip(&psi.data).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        assert!(diff < 1e-15);
    }

    #[test]
    fn binary_dump_round_trip() {
        let dir = std::env::temp_dir().join(format!("srds-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("state.bin");
        let s = equator(Space::with_cavity(2, 1)).to_density().rotate(Axis::X, 0.4);
        s.write_binary(&path).unwrap();
        let back = DenseState::read_binary(&path).unwrap();
        assert_eq!(s, back);
        std::fs::remove_dir_all(dir).ok();
    }
}
