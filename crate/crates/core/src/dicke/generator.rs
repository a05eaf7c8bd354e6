//! The effective master equation in the Dicke basis.
//!
//! Coefficients act on the weighted blocks `q_j = d_N(j) p_j`, whose entries
//! are all of order one even when the multiplicities are astronomically
//! large. Every term of the generator maps an entry `(j, m, m')` to an entry
//! `(j', m + s, m' + s)` with the same shift `s` on both indices, so the
//! coherence order `k = m − m'` is conserved and each order evolves on its
//! own. The detuning contributes the uniform factor `exp(−iΔν k t)` to order
//! `k`, which lets the remaining real generator be integrated in a rotating
//! frame.
//!
//! For a per-atom jump operator `O`, `Σ_n O_n ρ O_n†` is evaluated by
//! coupling the last atom to the multiplets `j1` of the other `N − 1`: the
//! source block `j` reaches `j' = j1 ± 1/2` with weight
//! `N d_{N−1}(j1) / d_N(j)` times a product of Clebsch–Gordan coefficients.

use std::collections::HashMap;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::ode::{DormandPrince, ErrorScale, OdeScalar};
use crate::params::ModelParams;
use crate::sparse::{CsrMatrix, Zero};
use crate::spin::{cg_add_half, ladder_down, parent_weight};

use super::{block_dim, two_j_of, DickeDensityMatrix, MAX_DICKE_ATOMS};

/// `scale · coef[i] · coef[i']` times source entry `(i, i')` is added to
/// target entry `(i + offset, i' + offset)` of block `target`.
#[derive(Debug, Clone)]
pub struct Transfer {
    pub target: usize,
    pub offset: i64,
    pub scale: f64,
    pub coef: Vec<f64>,
}

#[derive(Debug, Clone)]
struct BlockTerms {
    /// Entry `(i, i')` decays at `diag[i] + diag[i']` (rotating frame).
    diag: Vec<f64>,
    transfers: Vec<Transfer>,
}

#[derive(Debug, Clone, Copy)]
enum Local {
    Raise,
    Lower,
    Dephase,
}

/// Transition amplitude of the last atom's operator between `|j m⟩` and
/// `|j' m + s⟩`, both coupled from the same `(N−1)`-atom multiplet `j1`.
fn local_amplitude(kind: Local, two_j1: i64, two_jp: i64, two_j: i64, two_m: i64) -> f64 {
    match kind {
        Local::Raise => cg_add_half(two_j1, two_jp, two_m + 2, 1) * cg_add_half(two_j1, two_j, two_m, -1),
        Local::Lower => cg_add_half(two_j1, two_jp, two_m - 2, -1) * cg_add_half(two_j1, two_j, two_m, 1),
        Local::Dephase => {
            cg_add_half(two_j1, two_jp, two_m, 1) * cg_add_half(two_j1, two_j, two_m, 1)
                - cg_add_half(two_j1, two_jp, two_m, -1) * cg_add_half(two_j1, two_j, two_m, -1)
        }
    }
}

/// The Dicke-basis generator for one parameter set.
#[derive(Debug, Clone)]
pub struct DickeGenerator {
    pub n_atoms: usize,
    pub delta_nu: f64,
    blocks: Vec<BlockTerms>,
}

impl DickeGenerator {
    pub fn new(params: &ModelParams) -> Result<Self> {
        params.validate()?;
        let n = params.n_atoms;
        if n > MAX_DICKE_ATOMS {
            return Err(Error::TooLarge(format!(
                "Dicke solver supports at most {MAX_DICKE_ATOMS} atoms, got {n}"
            )));
        }
        let nf = n as f64;
        let (w, down, deph, gc) = (params.w, params.decay_rate(), params.dephasing_rate(), params.gamma_c());
        let n_blocks = n / 2 + 1;
        let mut blocks = Vec::with_capacity(n_blocks);
        for b in 0..n_blocks {
            let two_j = two_j_of(n, b);
            let dim = block_dim(two_j);
            let j = two_j as f64 / 2.0;
            let diag = (0..dim)
                .map(|i| {
                    let m = i as f64 - j;
                    -0.5 * w * (nf / 2.0 - m) - 0.5 * down * (nf / 2.0 + m) - 0.5 * deph * nf
                        - 0.5 * gc * (j + m) * (j - m + 1.0)
                })
                .collect();
            let mut transfers = Vec::new();
            if gc > 0.0 {
                let coef: Vec<f64> = (0..dim).map(|i| ladder_down(two_j, 2 * i as i64 - two_j)).collect();
                transfers.push(Transfer {
                    target: b,
                    offset: -1,
                    scale: gc,
                    coef,
                });
            }
            for (kind, rate, shift) in [(Local::Raise, w, 1i64), (Local::Lower, down, -1), (Local::Dephase, deph, 0)] {
                if rate == 0.0 {
                    continue;
                }
                for two_j1 in [two_j - 1, two_j + 1] {
                    if two_j1 < 0 || two_j1 > n as i64 - 1 {
                        continue;
                    }
                    let weight = parent_weight(n, two_j, two_j1);
                    if weight == 0.0 {
                        continue;
                    }
                    for two_jp in [two_j1 - 1, two_j1 + 1] {
                        if two_jp < 0 || two_jp > n as i64 {
                            continue;
                        }
                        let coef: Vec<f64> = (0..dim)
                            .map(|i| local_amplitude(kind, two_j1, two_jp, two_j, 2 * i as i64 - two_j))
                            .collect();
                        if coef.iter().all(|&c| c == 0.0) {
                            continue;
                        }
                        transfers.push(Transfer {
                            target: (n as i64 - two_jp) as usize / 2,
                            offset: shift + (two_jp - two_j) / 2,
                            scale: rate * weight,
                            coef,
                        });
                    }
                }
            }
            blocks.push(BlockTerms { diag, transfers });
        }
        Ok(Self {
            n_atoms: n,
            delta_nu: params.delta_nu,
            blocks,
        })
    }

    pub fn n_blocks(&self) -> usize {
        self.blocks.len()
    }

    /// Number of transfer terms across all blocks.
    pub fn transfer_count(&self) -> usize {
        self.blocks.iter().map(|b| b.transfers.len()).sum()
    }

    /// Scale one coefficient that couples the top block to its neighbour.
    /// Exists so that oracle checks can demonstrate they detect a wrong
    /// coupling table.
    pub fn corrupt_coupling(&mut self, factor: f64) {
        if let Some(t) = self.blocks[0].transfers.iter_mut().find(|t| t.target != 0) {
            let i = t.coef.iter().position(|&c| c != 0.0).unwrap_or(0);
            t.coef[i] *= factor;
        }
    }

    /// `out = L(q)` on weighted blocks, including the detuning.
    pub fn apply_weighted(&self, q: &[Vec<Complex64>], out: &mut [Vec<Complex64>]) {
        let n = self.n_atoms;
        for o in out.iter_mut() {
            o.iter_mut().for_each(|v| *v = Complex64::new(0.0, 0.0));
        }
        for (b, terms) in self.blocks.iter().enumerate() {
            let dim = block_dim(two_j_of(n, b));
            let src = &q[b];
            {
                let dst = &mut out[b];
                for i in 0..dim {
                    for ip in 0..dim {
                        let rate = Complex64::new(
                            terms.diag[i] + terms.diag[ip],
                            -self.delta_nu * (i as f64 - ip as f64),
                        );
                        dst[i * dim + ip] += rate * src[i * dim + ip];
                    }
                }
            }
            for t in &terms.transfers {
                let tdim = block_dim(two_j_of(n, t.target));
                let dst = &mut out[t.target];
                for i in 0..dim {
                    let ci = t.coef[i];
                    if ci == 0.0 {
                        continue;
                    }
                    let ti = i as i64 + t.offset;
                    debug_assert!(ti >= 0 && (ti as usize) < tdim);
                    let ti = ti as usize;
                    for ip in 0..dim {
                        let cip = t.coef[ip];
                        if cip == 0.0 {
                            continue;
                        }
                        let tip = (ip as i64 + t.offset) as usize;
                        dst[ti * tdim + tip] += src[i * dim + ip] * (t.scale * ci * cip);
                    }
                }
            }
        }
    }

    /// Time derivative of a state, returned in the unweighted (`p`) form.
    pub fn apply(&self, state: &DickeDensityMatrix) -> Result<DickeDensityMatrix> {
        if state.n_atoms != self.n_atoms {
            return Err(Error::Incompatible(format!(
                "state has {} atoms, generator {}",
                state.n_atoms, self.n_atoms
            )));
        }
        let q = state.weighted();
        let mut out: Vec<Vec<Complex64>> = q.iter().map(|b| vec![Complex64::new(0.0, 0.0); b.len()]).collect();
        self.apply_weighted(&q, &mut out);
        Ok(DickeDensityMatrix::from_weighted(self.n_atoms, out))
    }

    /// The real rotating-frame generator restricted to coherence order `k`.
    pub fn sector(&self, k: i64) -> Sector {
        let n = self.n_atoms;
        let layout = SectorLayout::new(n, k);
        let mut triplets = Vec::new();
        for (b, terms) in self.blocks.iter().enumerate() {
            let Some(src) = layout.block(b) else { continue };
            for i in src.first..src.first + src.len {
                let ip = (i as i64 - k) as usize;
                let col = src.offset + i - src.first;
                triplets.push((col, col, terms.diag[i] + terms.diag[ip]));
                for t in &terms.transfers {
                    let v = t.scale * t.coef[i] * t.coef[ip];
                    if v == 0.0 {
                        continue;
                    }
                    let dst = layout.block(t.target).expect("transfer into an empty sector block");
                    let ti = (i as i64 + t.offset) as usize;
                    triplets.push((dst.offset + ti - dst.first, col, v));
                }
            }
        }
        let size = layout.size;
        Sector {
            k,
            layout,
            matrix: CsrMatrix::from_triplets(size, size, triplets),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SectorBlock {
    /// Row index `i` of the first entry `(i, i − k)`.
    pub first: usize,
    pub len: usize,
    pub offset: usize,
}

/// Position of every entry of coherence order `k` in a flat vector.
#[derive(Debug, Clone)]
pub struct SectorLayout {
    pub n_atoms: usize,
    pub k: i64,
    pub blocks: Vec<Option<SectorBlock>>,
    pub size: usize,
}

impl SectorLayout {
    pub fn new(n_atoms: usize, k: i64) -> Self {
        let mut size = 0;
        let blocks = (0..n_atoms / 2 + 1)
            .map(|b| {
                let dim = block_dim(two_j_of(n_atoms, b)) as i64;
                let len = dim - k.abs();
                if len <= 0 {
                    return None;
                }
                let blk = SectorBlock {
                    first: k.max(0) as usize,
                    len: len as usize,
                    offset: size,
                };
                size += len as usize;
                Some(blk)
            })
            .collect();
        Self {
            n_atoms,
            k,
            blocks,
            size,
        }
    }

    pub fn block(&self, b: usize) -> Option<SectorBlock> {
        self.blocks.get(b).copied().flatten()
    }

    /// Copy the order-`k` entries of weighted blocks into a flat vector.
    pub fn gather(&self, q: &[Vec<Complex64>]) -> Vec<Complex64> {
        let mut out = vec![Complex64::new(0.0, 0.0); self.size];
        for (b, blk) in self.blocks.iter().enumerate() {
            let Some(blk) = blk else { continue };
            let dim = block_dim(two_j_of(self.n_atoms, b));
            for r in 0..blk.len {
                let i = blk.first + r;
                out[blk.offset + r] = q[b][i * dim + (i as i64 - self.k) as usize];
            }
        }
        out
    }

    pub fn scatter(&self, v: &[Complex64], q: &mut [Vec<Complex64>]) {
        for (b, blk) in self.blocks.iter().enumerate() {
            let Some(blk) = blk else { continue };
            let dim = block_dim(two_j_of(self.n_atoms, b));
            for r in 0..blk.len {
                let i = blk.first + r;
                q[b][i * dim + (i as i64 - self.k) as usize] = v[blk.offset + r];
            }
        }
    }

    /// Iterate `(block, two_j, two_m, position)` over the sector entries,
    /// where `two_m` labels the row index.
    pub fn entries(&self) -> impl Iterator<Item = (usize, i64, i64, usize)> + '_ {
        self.blocks.iter().enumerate().flat_map(move |(b, blk)| {
            let two_j = two_j_of(self.n_atoms, b);
            blk.iter().flat_map(move |blk| {
                (0..blk.len).map(move |r| (b, two_j, 2 * (blk.first + r) as i64 - two_j, blk.offset + r))
            })
        })
    }
}

/// Real rotating-frame generator of one coherence order.
#[derive(Debug, Clone)]
pub struct Sector {
    pub k: i64,
    pub layout: SectorLayout,
    pub matrix: CsrMatrix<f64>,
}

/// Integrates one coherence order, keeping the adaptive step between calls.
pub struct SectorEvolution<'a, S: OdeScalar> {
    sector: &'a Sector,
    integrator: DormandPrince<S>,
    pub values: Vec<S>,
    pub time: f64,
}

impl<'a, S> SectorEvolution<'a, S>
where
    S: OdeScalar + Zero + std::ops::AddAssign,
{
    pub fn new(sector: &'a Sector, values: Vec<S>, tol: f64, scale: ErrorScale) -> Self {
        assert_eq!(values.len(), sector.layout.size);
        Self {
            sector,
            integrator: DormandPrince::new(tol, scale),
            values,
            time: 0.0,
        }
    }

    pub fn advance_to(&mut self, t: f64) -> Result<()> {
        let m = &self.sector.matrix;
        self.integrator
            .integrate(|_, y, dy| m.mul_vec_into(y, dy), self.time, t, &mut self.values)?;
        self.time = t;
        Ok(())
    }
}

/// Propagates full Dicke states, caching the per-order generators.
pub struct DickeEvolver {
    pub generator: DickeGenerator,
    sectors: HashMap<i64, Sector>,
    tol: f64,
}

impl DickeEvolver {
    pub fn new(generator: DickeGenerator, tol: f64) -> Result<Self> {
        if !(tol > 0.0) {
            return Err(Error::InvalidParams("tolerance must be positive".into()));
        }
        Ok(Self {
            generator,
            sectors: HashMap::new(),
            tol,
        })
    }

    pub fn sector(&mut self, k: i64) -> &Sector {
        let g = &self.generator;
        self.sectors.entry(k).or_insert_with(|| g.sector(k))
    }

    /// Evolve `state` for `duration`. Orders whose entries are all zero are
    /// skipped, since every order evolves independently.
    pub fn evolve(&mut self, state: &DickeDensityMatrix, duration: f64) -> Result<DickeDensityMatrix> {
        let n = self.generator.n_atoms;
        if state.n_atoms != n {
            return Err(Error::Incompatible(format!("state has {} atoms, generator {n}", state.n_atoms)));
        }
        let mut q = state.weighted();
        let trace0 = super::weighted_trace(&q);
        let tol = self.tol;
        let delta_nu = self.generator.delta_nu;
        for k in -(n as i64)..=(n as i64) {
            let layout = SectorLayout::new(n, k);
            let v = layout.gather(&q);
            if v.iter().all(|z| z.re == 0.0 && z.im == 0.0) {
                continue;
            }
            let sector = self.sector(k);
            let mut evo = SectorEvolution::new(sector, v, tol, ErrorScale::Mixed);
            evo.advance_to(duration)?;
            let phase = Complex64::from_polar(1.0, -delta_nu * k as f64 * duration);
            let v: Vec<Complex64> = evo.values.iter().map(|z| z * phase).collect();
            layout.scatter(&v, &mut q);
        }
        let drift = (super::weighted_trace(&q) - trace0).norm();
        if drift > 1e-9 * duration.max(1.0) {
            return Err(Error::Incompatible(format!("trace drifted by {drift:e}")));
        }
        Ok(DickeDensityMatrix::from_weighted(n, q))
    }
}

/// Propagate a Dicke state for `duration` with local error `tol`.
pub fn evolve_dicke(
    state: &DickeDensityMatrix,
    params: &ModelParams,
    duration: f64,
    tol: f64,
) -> Result<DickeDensityMatrix> {
    DickeEvolver::new(DickeGenerator::new(params)?, tol)?.evolve(state, duration)
}

/// Time derivative of `state` under the effective master equation.
pub fn apply_generator(state: &DickeDensityMatrix, params: &ModelParams) -> Result<DickeDensityMatrix> {
    DickeGenerator::new(params)?.apply(state)
}
