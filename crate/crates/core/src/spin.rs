//! Angular-momentum helpers for ensembles of spin-1/2 particles.
//!
//! Half-integer quantum numbers are passed doubled (`two_j = 2j`,
//! `two_m = 2m`) so that all bookkeeping stays in integers.

/// Clebsch–Gordan coefficient `⟨j1, m − s; 1/2, s | j, m⟩` for coupling one
/// extra spin-1/2 onto `j1`, with `j = j1 ± 1/2` (Condon–Shortley phases).
/// Returns 0 for any combination outside the allowed ranges.
pub fn cg_add_half(two_j1: i64, two_j: i64, two_m: i64, two_s: i64) -> f64 {
    debug_assert!(two_s == 1 || two_s == -1);
    if two_j1 < 0 || two_j < 0 || two_m.abs() > two_j || (two_m - two_s).abs() > two_j1 {
        return 0.0;
    }
    let denom = 2.0 * (two_j1 + 1) as f64;
    let plus = (two_j1 + two_m + 1) as f64 / denom;
    let minus = (two_j1 - two_m + 1) as f64 / denom;
    if two_j == two_j1 + 1 {
        if two_s == 1 {
            plus.sqrt()
        } else {
            minus.sqrt()
        }
    } else if two_j == two_j1 - 1 {
        if two_s == 1 {
            -minus.sqrt()
        } else {
            plus.sqrt()
        }
    } else {
        0.0
    }
}

/// Number of spin-`j` multiplets in the decomposition of `n` spin-1/2s,
/// `d_n(j) = (2j+1) n! / ((n/2+j+1)! (n/2−j)!)`.
///
/// Evaluated in floating point; exact for small `n` and accurate to a few
/// ulps up to `n ≈ 1000`, past which it overflows.
pub fn multiplet_count(n: usize, two_j: i64) -> f64 {
    let n = n as i64;
    if two_j < 0 || two_j > n || (n - two_j) % 2 != 0 {
        return 0.0;
    }
    let k = (n - two_j) / 2; // n/2 − j
    // (2j+1)/(n/2+j+1) · C(n, k)
    let mut binom = 1.0f64;
    for i in 0..k {
        binom *= (n - i) as f64 / (i + 1) as f64;
    }
    binom * (two_j + 1) as f64 / (n - k + 1) as f64
}

/// `n · d_{n−1}(j1) / d_n(j)` for `j1 = j ± 1/2`, in closed form.
///
/// This is the multiplicity weight with which the last spin of an
/// `n`-spin multiplet `j` descends from an `(n−1)`-spin multiplet `j1`.
pub fn parent_weight(n: usize, two_j: i64, two_j1: i64) -> f64 {
    let n = n as f64;
    let j = two_j as f64 / 2.0;
    if two_j1 == two_j - 1 {
        if two_j == 0 {
            return 0.0;
        }
        2.0 * j * (n / 2.0 + j + 1.0) / (2.0 * j + 1.0)
    } else if two_j1 == two_j + 1 {
        (2.0 * j + 2.0) * (n / 2.0 - j) / (2.0 * j + 1.0)
    } else {
        0.0
    }
}

/// Coefficient of `J₊|j, m⟩ = c₊ |j, m+1⟩`.
pub fn ladder_up(two_j: i64, two_m: i64) -> f64 {
    let j = two_j as f64 / 2.0;
    let m = two_m as f64 / 2.0;
    (j * (j + 1.0) - m * (m + 1.0)).max(0.0).sqrt()
}

/// Coefficient of `J₋|j, m⟩ = c₋ |j, m−1⟩`.
pub fn ladder_down(two_j: i64, two_m: i64) -> f64 {
    let j = two_j as f64 / 2.0;
    let m = two_m as f64 / 2.0;
    (j * (j + 1.0) - m * (m - 1.0)).max(0.0).sqrt()
}

/// Wigner small-d matrices `d^j_{m m'}(θ) = ⟨j m| exp(−iθ J_y) |j m'⟩` for
/// every `j` from 0 up to a maximum, in steps of 1/2.
///
/// Built by recursively coupling one spin-1/2 at a time:
/// `d^j = Σ C·C · d^{j−1/2} ⊗ d^{1/2}`, which involves only bounded
/// Clebsch–Gordan factors and never forms factorials.
#[derive(Debug, Clone)]
pub struct WignerSmallD {
    /// Indexed by `two_j`; each matrix is `(2j+1)²`, row-major, index `m + j`
    /// ascending.
    mats: Vec<Vec<f64>>,
}

impl WignerSmallD {
    pub fn new(two_j_max: i64, theta: f64) -> Self {
        let (c, s) = ((theta / 2.0).cos(), (theta / 2.0).sin());
        // d^{1/2}, rows/cols ordered m = −1/2, +1/2
        let half = vec![c, s, -s, c];
        let mut mats = vec![vec![1.0]];
        if two_j_max >= 1 {
            mats.push(half.clone());
        }
        for two_j in 2..=two_j_max {
            let prev = &mats[(two_j - 1) as usize];
            let two_j1 = two_j - 1;
            let dim = (two_j + 1) as usize;
            let dim1 = two_j as usize;
            let mut d = vec![0.0; dim * dim];
            for a in 0..dim {
                let two_m = 2 * a as i64 - two_j;
                for b in 0..dim {
                    let two_mp = 2 * b as i64 - two_j;
                    let mut acc = 0.0;
                    for (si, two_s) in [(0usize, -1i64), (1, 1)] {
                        let cg_a = cg_add_half(two_j1, two_j, two_m, two_s);
                        if cg_a == 0.0 {
                            continue;
                        }
                        let ia = ((two_m - two_s + two_j1) / 2) as usize;
                        for (spi, two_sp) in [(0usize, -1i64), (1, 1)] {
                            let cg_b = cg_add_half(two_j1, two_j, two_mp, two_sp);
                            if cg_b == 0.0 {
                                continue;
                            }
                            let ib = ((two_mp - two_sp + two_j1) / 2) as usize;
                            acc += cg_a * cg_b * prev[ia * dim1 + ib] * half[si * 2 + spi];
                        }
                    }
                    d[a * dim + b] = acc;
                }
            }
            mats.push(d);
        }
        Self { mats }
    }

    pub fn matrix(&self, two_j: i64) -> &[f64] {
        &self.mats[two_j as usize]
    }

    /// `max |d dᵀ − I|` over every stored `j`.
    pub fn orthogonality_defect(&self) -> f64 {
        let mut worst = 0.0f64;
        for d in &self.mats {
            let dim = (d.len() as f64).sqrt().round() as usize;
            for a in 0..dim {
                for b in 0..dim {
                    let dot: f64 = (0..dim).map(|k| d[a * dim + k] * d[b * dim + k]).sum();
                    let target = if a == b { 1.0 } else { 0.0 };
                    worst = worst.max((dot - target).abs());
                }
            }
        }
        worst
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn multiplet_counts_small() {
        // two spins: one triplet, one singlet
        assert_eq!(multiplet_count(2, 2), 1.0);
        assert_eq!(multiplet_count(2, 0), 1.0);
        // three spins: one quartet, two doublets
        assert_eq!(multiplet_count(3, 3), 1.0);
        assert_eq!(multiplet_count(3, 1), 2.0);
        // four spins: 1 quintet, 3 triplets, 2 singlets
        assert_eq!(multiplet_count(4, 4), 1.0);
        assert_eq!(multiplet_count(4, 2), 3.0);
        assert_eq!(multiplet_count(4, 0), 2.0);
        assert_eq!(multiplet_count(4, 1), 0.0);
    }

    #[test]
    fn multiplet_dimensions_sum_to_hilbert_space() {
        for n in 1..=20usize {
            let total: f64 = (0..=n as i64)
                .map(|two_j| multiplet_count(n, two_j) * (two_j + 1) as f64)
                .sum();
            assert!((total - 2f64.powi(n as i32)).abs() < 1e-6 * total);
        }
    }

    #[test]
    fn parent_weight_matches_ratio_of_counts() {
        for n in 2..=16usize {
            for two_j in (n as i64 % 2..=n as i64).step_by(2) {
                for two_j1 in [two_j - 1, two_j + 1] {
                    let direct = if two_j1 < 0 {
                        0.0
                    } else {
                        n as f64 * multiplet_count(n - 1, two_j1) / multiplet_count(n, two_j)
                    };
                    let closed = parent_weight(n, two_j, two_j1);
                    assert!((direct - closed).abs() < 1e-10, "n={n} 2j={two_j} 2j1={two_j1}");
                }
            }
        }
    }

    #[test]
    fn cg_columns_are_normalized() {
        for two_j1 in 0..8i64 {
            for two_j in [two_j1 - 1, two_j1 + 1] {
                if two_j < 0 {
                    continue;
                }
                for two_m in (-two_j..=two_j).step_by(2) {
                    let norm: f64 = [-1, 1].iter().map(|&s| cg_add_half(two_j1, two_j, two_m, s).powi(2)).sum();
                    assert!((norm - 1.0).abs() < 1e-14);
                }
            }
        }
    }

    #[test]
    fn spin_half_rotation() {
        let d = WignerSmallD::new(1, std::f64::consts::FRAC_PI_2);
        let r = std::f64::consts::FRAC_1_SQRT_2;
        // d^{1/2}_{1/2,−1/2} = −sin(θ/2); row index 1 is m = +1/2
        let m = d.matrix(1);
        assert!((m[2] + r).abs() < 1e-15);
        assert!((m[1] - r).abs() < 1e-15);
    }

    #[test]
    fn spin_one_closed_form() {
        let theta = 0.7f64;
        let d = WignerSmallD::new(2, theta);
        let m = d.matrix(2);
        let (c, s) = (theta.cos(), theta.sin());
        // rows/cols m = −1, 0, 1
        let expected = [
            (1.0 + c) / 2.0, s / 2f64.sqrt(), (1.0 - c) / 2.0,
            -s / 2f64.sqrt(), c, s / 2f64.sqrt(),
            (1.0 - c) / 2.0, -s / 2f64.sqrt(), (1.0 + c) / 2.0,
        ];
        for (a, b) in m.iter().zip(expected) {
            assert!((a - b).abs() < 1e-14, "{m:?}");
        }
    }

    #[test]
    fn large_j_stays_orthogonal() {
        let d = WignerSmallD::new(120, 1.234);
        assert!(d.orthogonality_defect() < 1e-10);
    }
}
