//! Sparse operators on `(C²)^⊗N ⊗ C^{n_photon}`.
//!
//! Basis ordering: atom 1 is the most significant factor, the photon factor
//! (if any) is last. Each atom uses `0 = |g⟩`, `1 = |e⟩`.

use num_complex::Complex64;

use crate::sparse::CsrMatrix;

pub type Op = CsrMatrix<Complex64>;

/// Layout of the composite Hilbert space.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Space {
    pub n_atoms: usize,
    /// Number of Fock levels kept (cutoff + 1); 1 means no cavity.
    pub photon_levels: usize,
}

impl Space {
    pub fn atoms(n_atoms: usize) -> Self {
        Self {
            n_atoms,
            photon_levels: 1,
        }
    }

    pub fn with_cavity(n_atoms: usize, n_photon_max: usize) -> Self {
        Self {
            n_atoms,
            photon_levels: n_photon_max + 1,
        }
    }

    pub fn atom_dim(&self) -> usize {
        1 << self.n_atoms
    }

    pub fn dim(&self) -> usize {
        self.atom_dim() * self.photon_levels
    }

    /// Bit of `atom` (0-based) in atom-space index `a`.
    pub fn atom_bit(&self, a: usize, atom: usize) -> usize {
        (a >> (self.n_atoms - 1 - atom)) & 1
    }

    fn split(&self, idx: usize) -> (usize, usize) {
        (idx / self.photon_levels, idx % self.photon_levels)
    }

    fn join(&self, a: usize, n: usize) -> usize {
        a * self.photon_levels + n
    }
}

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

fn build(space: Space, mut f: impl FnMut(usize, usize) -> Option<(usize, usize, Complex64)>) -> Op {
    let dim = space.dim();
    let mut triplets = Vec::new();
    for idx in 0..dim {
        let (a, n) = space.split(idx);
        if let Some((a2, n2, v)) = f(a, n) {
            triplets.push((space.join(a2, n2), idx, v));
        }
    }
    CsrMatrix::from_triplets(dim, dim, triplets)
}

pub fn identity(space: Space) -> Op {
    build(space, |a, n| Some((a, n, c(1.0))))
}

/// `σ⁺ = |e⟩⟨g|` on one atom.
pub fn sigma_plus(space: Space, atom: usize) -> Op {
    let mask = 1 << (space.n_atoms - 1 - atom);
    build(space, |a, n| (a & mask == 0).then(|| (a | mask, n, c(1.0))))
}

pub fn sigma_minus(space: Space, atom: usize) -> Op {
    let mask = 1 << (space.n_atoms - 1 - atom);
    build(space, |a, n| (a & mask != 0).then(|| (a & !mask, n, c(1.0))))
}

pub fn sigma_z(space: Space, atom: usize) -> Op {
    build(space, |a, n| {
        let s = if space.atom_bit(a, atom) == 1 { 1.0 } else { -1.0 };
        Some((a, n, c(s)))
    })
}

pub fn sigma_x(space: Space, atom: usize) -> Op {
    sigma_plus(space, atom).add(&sigma_minus(space, atom))
}

pub fn sigma_y(space: Space, atom: usize) -> Op {
    // σ_y = −i(σ⁺ − σ⁻)
    sigma_plus(space, atom)
        .add(&sigma_minus(space, atom).scale(c(-1.0)))
        .scale(Complex64::new(0.0, -1.0))
}

fn collective(space: Space, single: impl Fn(Space, usize) -> Op) -> Op {
    (0..space.n_atoms).fold(Op::zeros(space.dim(), space.dim()), |acc, k| acc.add(&single(space, k)))
}

pub fn j_minus(space: Space) -> Op {
    collective(space, sigma_minus)
}

pub fn j_plus(space: Space) -> Op {
    collective(space, sigma_plus)
}

/// `J_z = Σ σ_z / 2`.
pub fn j_z(space: Space) -> Op {
    collective(space, sigma_z).scale(c(0.5))
}

pub fn j_x(space: Space) -> Op {
    collective(space, sigma_x).scale(c(0.5))
}

pub fn j_y(space: Space) -> Op {
    collective(space, sigma_y).scale(c(0.5))
}

/// Cavity annihilation operator.
pub fn annihilate(space: Space) -> Op {
    build(space, |a, n| (n > 0).then(|| (a, n - 1, c((n as f64).sqrt()))))
}

pub fn photon_number(space: Space) -> Op {
    build(space, |a, n| (n > 0).then(|| (a, n, c(n as f64))))
}

/// Projector onto the highest kept Fock level.
pub fn top_fock_projector(space: Space) -> Op {
    let top = space.photon_levels - 1;
    build(space, |a, n| (n == top).then(|| (a, n, c(1.0))))
}
