//! Embedding of Dicke-basis states into the full `2^N` space, for checking
//! the reduced solver against the dense one.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::dense::{ops, DenseState, Space, StateKind, MAX_ATOMS};
use crate::error::{Error, Result};
use crate::spin::ladder_up;

use super::{block_dim, two_j_of, DickeDensityMatrix};

type Mat = DMatrix<Complex64>;

fn to_mat(op: &ops::Op) -> Mat {
    let mut m = Mat::zeros(op.nrows(), op.ncols());
    for (r, c, v) in op.iter() {
        m[(r, c)] += v;
    }
    m
}

/// The operators `E_j^{m m'} = Σ_α |j m α⟩⟨j m' α|` for one ensemble size.
pub struct DickeBasis {
    pub n_atoms: usize,
    /// `ops[b][i * dim + i']`.
    ops: Vec<Vec<Mat>>,
}

impl DickeBasis {
    pub fn new(n_atoms: usize) -> Result<Self> {
        if n_atoms == 0 || n_atoms > MAX_ATOMS {
            return Err(Error::TooLarge(format!("embedding supports 1..={MAX_ATOMS} atoms")));
        }
        let space = Space::atoms(n_atoms);
        let jp = to_mat(&ops::j_plus(space));
        let jm = to_mat(&ops::j_minus(space));
        let jz = to_mat(&ops::j_z(space));
        let casimir = &jp * &jm + &jz * &jz - &jz;
        let dim = space.dim();
        let ident = Mat::identity(dim, dim);
        let n_blocks = n_atoms / 2 + 1;
        let c = |two_j: i64| {
            let j = two_j as f64 / 2.0;
            j * (j + 1.0)
        };
        let mut all = Vec::with_capacity(n_blocks);
        for b in 0..n_blocks {
            let two_j = two_j_of(n_atoms, b);
            // projector onto total spin j
            let mut proj = ident.clone();
            for b2 in 0..n_blocks {
                if b2 == b {
                    continue;
                }
                let other = c(two_j_of(n_atoms, b2));
                proj = proj * (&casimir - &ident * Complex64::from(other)) / Complex64::from(c(two_j) - other);
            }
            // restrict to the lowest weight m = −j
            let lowest = Mat::from_fn(dim, dim, |r, col| {
                if r == col && (jz[(r, r)].re + two_j as f64 / 2.0).abs() < 1e-9 {
                    Complex64::new(1.0, 0.0)
                } else {
                    Complex64::new(0.0, 0.0)
                }
            });
            let bottom = &proj * lowest;
            let bd = block_dim(two_j);
            // raised[i] = (J⁺)^i / norm applied to the lowest-weight projector
            let mut raised = Vec::with_capacity(bd);
            let mut cur = bottom.clone();
            for i in 0..bd {
                if i > 0 {
                    let norm = ladder_up(two_j, 2 * (i as i64 - 1) - two_j);
                    cur = &jp * cur / Complex64::from(norm);
                }
                raised.push(cur.clone());
            }
            let mut block_ops = Vec::with_capacity(bd * bd);
            for i in 0..bd {
                for ip in 0..bd {
                    block_ops.push(&raised[i] * raised[ip].adjoint());
                }
            }
            all.push(block_ops);
        }
        Ok(Self { n_atoms, ops: all })
    }

    pub fn to_dense(&self, state: &DickeDensityMatrix) -> DenseState {
        let space = Space::atoms(self.n_atoms);
        let d = space.dim();
        let mut rho = Mat::zeros(d, d);
        for (b, blk) in state.blocks.iter().enumerate() {
            for (idx, &v) in blk.iter().enumerate() {
                if v.norm_sqr() != 0.0 {
                    rho += &self.ops[b][idx] * v;
                }
            }
        }
        DenseState {
            kind: StateKind::DensityMatrix,
            space,
            data: (0..d * d).map(|k| rho[(k / d, k % d)]).collect(),
        }
    }

    /// Project a dense state onto the permutation-invariant blocks.
    pub fn from_dense(&self, state: &DenseState) -> Result<DickeDensityMatrix> {
        if state.space != Space::atoms(self.n_atoms) {
            return Err(Error::Incompatible("embedding needs an atom-only state".into()));
        }
        let rho = state.to_density();
        let d = rho.dim();
        let mut out = DickeDensityMatrix::ground_state(self.n_atoms)?;
        for b in 0..out.n_blocks() {
            let bd = block_dim(out.two_j(b));
            let deg = out.degeneracy[b];
            for i in 0..bd {
                for ip in 0..bd {
                    // Tr(ρ E^{m' m}) = d_j p[m][m']
                    let e = &self.ops[b][ip * bd + i];
                    let mut tr = Complex64::new(0.0, 0.0);
                    for r in 0..d {
                        for c in 0..d {
                            let v = e[(r, c)];
                            if v.norm_sqr() != 0.0 {
                                tr += v * rho.data[c * d + r];
                            }
                        }
                    }
                    out.blocks[b][i * bd + ip] = tr / deg;
                }
            }
        }
        Ok(out)
    }
}
