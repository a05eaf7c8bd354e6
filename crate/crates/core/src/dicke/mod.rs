//! Permutation-invariant density matrices in the Dicke basis.
//!
//! A permutation-invariant state of `N` spin-1/2 atoms is block diagonal in
//! total spin, `ρ = ⊕_j p_j ⊗ 1_{d_N(j)}`, so it is fully described by one
//! `(2j+1) × (2j+1)` matrix per `j`, i.e. O(N³) numbers in total.
//!
//! Blocks are indexed by `b = N/2 − j` (block 0 is the fully symmetric
//! multiplet). Inside a block, row/column index `i = m + j` runs from the
//! ground state `m = −j` upwards.

pub mod basis;
pub mod generator;

use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rotation::Axis;
use crate::spin::{ladder_up, multiplet_count, WignerSmallD};

pub use generator::{
    apply_generator, evolve_dicke, DickeEvolver, DickeGenerator, Sector, SectorEvolution, SectorLayout,
};

/// Past this size the multiplicities overflow double precision.
pub const MAX_DICKE_ATOMS: usize = 1000;

pub(crate) fn two_j_of(n: usize, block: usize) -> i64 {
    n as i64 - 2 * block as i64
}

pub(crate) fn block_dim(two_j: i64) -> usize {
    (two_j + 1) as usize
}

/// `Σ_j (2j+1)²`, the number of stored coefficients for `n` atoms.
pub fn coefficient_count(n: usize) -> usize {
    (0..=n / 2).map(|b| block_dim(two_j_of(n, b)).pow(2)).sum()
}

pub(crate) fn weighted_trace(q: &[Vec<Complex64>]) -> Complex64 {
    q.iter()
        .map(|blk| {
            let dim = (blk.len() as f64).sqrt().round() as usize;
            (0..dim).map(|i| blk[i * dim + i]).sum::<Complex64>()
        })
        .sum()
}

#[derive(Debug, Clone, PartialEq)]
pub struct DickeDensityMatrix {
    pub n_atoms: usize,
    /// `p[j]`, row-major, one entry per block.
    pub blocks: Vec<Vec<Complex64>>,
    /// `d_N(j)` per block.
    pub degeneracy: Vec<f64>,
}

impl DickeDensityMatrix {
    fn zeros(n_atoms: usize) -> Self {
        let n_blocks = n_atoms / 2 + 1;
        Self {
            n_atoms,
            blocks: (0..n_blocks)
                .map(|b| vec![Complex64::new(0.0, 0.0); block_dim(two_j_of(n_atoms, b)).pow(2)])
                .collect(),
            degeneracy: (0..n_blocks).map(|b| multiplet_count(n_atoms, two_j_of(n_atoms, b))).collect(),
        }
    }

    /// All atoms in the ground state.
    pub fn ground_state(n_atoms: usize) -> Result<Self> {
        if n_atoms == 0 {
            return Err(Error::InvalidParams("n_atoms must be at least 1".into()));
        }
        if n_atoms > MAX_DICKE_ATOMS {
            return Err(Error::TooLarge(format!("at most {MAX_DICKE_ATOMS} atoms")));
        }
        let mut s = Self::zeros(n_atoms);
        s.blocks[0][0] = Complex64::new(1.0, 0.0);
        Ok(s)
    }

    /// Build from weighted blocks `q_j = d_N(j) p_j`.
    pub fn from_weighted(n_atoms: usize, q: Vec<Vec<Complex64>>) -> Self {
        let mut s = Self::zeros(n_atoms);
        for (b, blk) in q.into_iter().enumerate() {
            let d = s.degeneracy[b];
            s.blocks[b] = blk.into_iter().map(|v| v / d).collect();
        }
        s
    }

    pub fn weighted(&self) -> Vec<Vec<Complex64>> {
        self.blocks
            .iter()
            .zip(&self.degeneracy)
            .map(|(blk, &d)| blk.iter().map(|v| v * d).collect())
            .collect()
    }

    pub fn n_blocks(&self) -> usize {
        self.blocks.len()
    }

    /// `2j` of block `b`.
    pub fn two_j(&self, b: usize) -> i64 {
        two_j_of(self.n_atoms, b)
    }

    /// `p[j][m][m']`, quantum numbers doubled.
    pub fn coefficient(&self, two_j: i64, two_m: i64, two_mp: i64) -> Complex64 {
        let b = ((self.n_atoms as i64 - two_j) / 2) as usize;
        let dim = block_dim(two_j);
        let i = ((two_m + two_j) / 2) as usize;
        let ip = ((two_mp + two_j) / 2) as usize;
        self.blocks[b][i * dim + ip]
    }

    pub fn coefficient_count(&self) -> usize {
        self.blocks.iter().map(Vec::len).sum()
    }

    pub fn trace(&self) -> Complex64 {
        weighted_trace(&self.weighted())
    }

    /// Total probability in each block, `d_N(j) Σ_m p[j][m][m]`.
    pub fn block_weights(&self) -> Vec<f64> {
        self.weighted()
            .iter()
            .map(|blk| {
                let dim = (blk.len() as f64).sqrt().round() as usize;
                (0..dim).map(|i| blk[i * dim + i].re).sum()
            })
            .collect()
    }

    pub fn hermiticity_defect(&self) -> f64 {
        let mut worst = 0.0f64;
        for blk in &self.blocks {
            let dim = (blk.len() as f64).sqrt().round() as usize;
            for i in 0..dim {
                for ip in i..dim {
                    worst = worst.max((blk[i * dim + ip] - blk[ip * dim + i].conj()).norm());
                }
            }
        }
        worst
    }

    /// `exp(−iθ J_axis) ρ exp(iθ J_axis)`, block by block.
    pub fn rotate(&self, axis: Axis, angle: f64) -> Self {
        let wigner = WignerSmallD::new(self.n_atoms as i64, angle);
        let mut out = self.clone();
        for (b, blk) in out.blocks.iter_mut().enumerate() {
            let two_j = self.two_j(b);
            let dim = block_dim(two_j);
            let d = wigner.matrix(two_j);
            // U = D d D*, with D = diag(e^{iπm/2}) for the x axis
            let phase = |i: usize| match axis {
                Axis::Y => Complex64::new(1.0, 0.0),
                Axis::X => Complex64::from_polar(1.0, std::f64::consts::FRAC_PI_2 * (i as f64 - two_j as f64 / 2.0)),
            };
            let u: Vec<Complex64> = (0..dim * dim)
                .map(|idx| {
                    let (r, c) = (idx / dim, idx % dim);
                    phase(r) * d[idx] * phase(c).conj()
                })
                .collect();
            let src = blk.clone();
            let mut tmp = vec![Complex64::new(0.0, 0.0); dim * dim];
            for r in 0..dim {
                for k in 0..dim {
                    let urk = u[r * dim + k];
                    if urk.norm_sqr() == 0.0 {
                        continue;
                    }
                    for c in 0..dim {
                        tmp[r * dim + c] += urk * src[k * dim + c];
                    }
                }
            }
            for r in 0..dim {
                for c in 0..dim {
                    blk[r * dim + c] = (0..dim).map(|k| tmp[r * dim + k] * u[c * dim + k].conj()).sum();
                }
            }
        }
        out
    }

    pub fn expectations(&self) -> ExpectationSet {
        ExpectationSet::from_moments(self.n_atoms, Moments::of_weighted(self.n_atoms, &self.weighted()))
    }

    pub fn to_snapshot(&self) -> Snapshot {
        Snapshot {
            n_atoms: self.n_atoms,
            blocks: self
                .blocks
                .iter()
                .enumerate()
                .map(|(b, blk)| {
                    let dim = block_dim(self.two_j(b));
                    let rows = |f: fn(&Complex64) -> f64| -> Vec<Vec<f64>> {
                        blk.chunks(dim).map(|row| row.iter().map(f).collect()).collect()
                    };
                    BlockSnapshot {
                        j: self.two_j(b) as f64 / 2.0,
                        matrix_real: rows(|z| z.re),
                        matrix_imag: rows(|z| z.im),
                    }
                })
                .collect(),
        }
    }

    pub fn from_snapshot(snap: &Snapshot) -> Result<Self> {
        let mut s = Self::ground_state(snap.n_atoms)?;
        if snap.blocks.len() != s.n_blocks() {
            return Err(Error::Incompatible("snapshot has the wrong number of blocks".into()));
        }
        for (b, blk) in snap.blocks.iter().enumerate() {
            let dim = block_dim(s.two_j(b));
            let ok = (blk.j * 2.0).round() as i64 == s.two_j(b)
                && blk.matrix_real.len() == dim
                && blk.matrix_imag.len() == dim
                && blk.matrix_real.iter().chain(&blk.matrix_imag).all(|r| r.len() == dim);
            if !ok {
                return Err(Error::Incompatible(format!("snapshot block {b} has the wrong shape")));
            }
            for i in 0..dim {
                for ip in 0..dim {
                    s.blocks[b][i * dim + ip] = Complex64::new(blk.matrix_real[i][ip], blk.matrix_imag[i][ip]);
                }
            }
        }
        Ok(s)
    }

    pub fn write_json(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, serde_json::to_string(&self.to_snapshot())?)?;
        Ok(())
    }

    pub fn read_json(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_snapshot(&serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }
}

/// JSON form of a [`DickeDensityMatrix`] (unweighted coefficients).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub n_atoms: usize,
    pub blocks: Vec<BlockSnapshot>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockSnapshot {
    pub j: f64,
    pub matrix_real: Vec<Vec<f64>>,
    pub matrix_imag: Vec<Vec<f64>>,
}

/// Collective moments `⟨J_z⟩, ⟨J⁺⟩, ⟨J⁺J⁻⟩, ⟨J⁺J_z⟩`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Moments {
    pub jz: f64,
    pub jplus: Complex64,
    pub jplusjminus: f64,
    pub jplusjz: Complex64,
}

impl Moments {
    pub fn of_weighted(n_atoms: usize, q: &[Vec<Complex64>]) -> Self {
        let pops = SectorLayout::new(n_atoms, 0);
        let coh = SectorLayout::new(n_atoms, -1);
        let (jz, jplusjminus) = Self::populations(&pops, &pops.gather(q));
        let (jplus, jplusjz) = Self::coherences(&coh, &coh.gather(q));
        Self {
            jz,
            jplus,
            jplusjminus,
            jplusjz,
        }
    }

    /// `(⟨J_z⟩, ⟨J⁺J⁻⟩)` from the diagonal entries.
    pub fn populations(layout: &SectorLayout, v: &[Complex64]) -> (f64, f64) {
        debug_assert_eq!(layout.k, 0);
        let (mut jz, mut jpjm) = (0.0, 0.0);
        for (_, two_j, two_m, pos) in layout.entries() {
            let (j, m) = (two_j as f64 / 2.0, two_m as f64 / 2.0);
            jz += m * v[pos].re;
            jpjm += (j + m) * (j - m + 1.0) * v[pos].re;
        }
        (jz, jpjm)
    }

    /// `(⟨J⁺⟩, ⟨J⁺J_z⟩)` from the entries `(m, m + 1)`.
    pub fn coherences(layout: &SectorLayout, v: &[Complex64]) -> (Complex64, Complex64) {
        debug_assert_eq!(layout.k, -1);
        let (mut jp, mut jpjz) = (Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0));
        for (_, two_j, two_m, pos) in layout.entries() {
            let c = ladder_up(two_j, two_m);
            jp += v[pos] * c;
            jpjz += v[pos] * (c * two_m as f64 / 2.0);
        }
        (jp, jpjz)
    }
}

/// Per-atom and pair expectation values of a permutation-invariant state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExpectationSet {
    pub sz: f64,
    pub splus: Complex64,
    pub spsm_cross: f64,
    pub spsz_cross: Complex64,
    pub jz: f64,
    pub jplus: Complex64,
    pub jplusjminus: f64,
    pub jplusjz: Complex64,
    /// `⟨σ_j⁺σ_k^z⟩ / (⟨σ⁺⟩⟨σ_z⟩)`; `None` when the denominator is below
    /// `1e-12` in magnitude.
    pub alpha: Option<Complex64>,
}

impl ExpectationSet {
    pub fn from_moments(n_atoms: usize, m: Moments) -> Self {
        let n = n_atoms as f64;
        let sz = 2.0 * m.jz / n;
        let splus = m.jplus / n;
        let (spsm_cross, spsz_cross) = if n_atoms >= 2 {
            let pairs = n * (n - 1.0);
            (
                (m.jplusjminus - n * (1.0 + sz) / 2.0) / pairs,
                // Σ_{j≠k} σ_j⁺σ_k^z = 2 J⁺J_z − Σ_j σ_j⁺σ_j^z and σ⁺σ_z = −σ⁺
                (m.jplusjz * 2.0 + m.jplus) / pairs,
            )
        } else {
            (0.0, Complex64::new(0.0, 0.0))
        };
        let denom = splus * sz;
        let alpha = (denom.norm() >= 1e-12).then(|| spsz_cross / denom);
        Self {
            sz,
            splus,
            spsm_cross,
            spsz_cross,
            jz: m.jz,
            jplus: m.jplus,
            jplusjminus: m.jplusjminus,
            jplusjz: m.jplusjz,
            alpha,
        }
    }
}

pub fn ground_state(n_atoms: usize) -> Result<DickeDensityMatrix> {
    DickeDensityMatrix::ground_state(n_atoms)
}

pub fn collective_rotation(state: &DickeDensityMatrix, axis: Axis, angle: f64) -> DickeDensityMatrix {
    state.rotate(axis, angle)
}

pub fn expectations(state: &DickeDensityMatrix) -> ExpectationSet {
    state.expectations()
}

#[cfg(test)]
mod tests;
