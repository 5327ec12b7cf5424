//! Householder QR with column pivoting and early rank cutoff.
//!
//! `A P = Q R` where `P` orders columns by decreasing residual norm. The
//! factorization stops once the largest remaining column norm falls below
//! `rank_tol · |R₀₀|`, so only the first `rank` reflectors exist and `Q` is
//! kept implicit until asked for.

use nalgebra::DMatrix;

pub const DEFAULT_RANK_TOL: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct PivotedQr {
    // R in the upper triangle, reflector tails below the diagonal.
    packed: DMatrix<f64>,
    tau: Vec<f64>,
    perm: Vec<usize>,
    rank: usize,
}

impl PivotedQr {
    pub fn new(a: DMatrix<f64>) -> Self {
        Self::with_tolerance(a, DEFAULT_RANK_TOL)
    }

    pub fn with_tolerance(mut a: DMatrix<f64>, rank_tol: f64) -> Self {
        let (m, n) = a.shape();
        let kmax = m.min(n);
        let mut perm: Vec<usize> = (0..n).collect();
        let mut norms: Vec<f64> = a.column_iter().map(|c| c.norm()).collect();
        let mut ref_norms = norms.clone();
        let mut tau = Vec::with_capacity(kmax);
        let mut r00 = 0.0;
        let mut rank = 0;

        for k in 0..kmax {
            let (piv, &best) = norms[k..]
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.total_cmp(b.1))
                .map(|(i, v)| (i + k, v))
                .unwrap();
            if k == 0 {
                r00 = best;
            }
            if best <= rank_tol * r00 || best == 0.0 {
                break;
            }
            if piv != k {
                a.swap_columns(k, piv);
                perm.swap(k, piv);
                norms.swap(k, piv);
                ref_norms.swap(k, piv);
            }

            // Reflector H = I − τ v vᵀ with v₀ = 1 mapping a[k.., k] to βe₁.
            let x0 = a[(k, k)];
            let tail_sq: f64 = a.view((k + 1, k), (m - k - 1, 1)).norm_squared();
            let alpha = (x0 * x0 + tail_sq).sqrt();
            let beta = if x0 >= 0.0 { -alpha } else { alpha };
            let t = if tail_sq == 0.0 && x0 >= 0.0 {
                0.0
            } else {
                (beta - x0) / beta
            };
            if t != 0.0 {
                let scale = 1.0 / (x0 - beta);
                for i in (k + 1)..m {
                    a[(i, k)] *= scale;
                }
                a[(k, k)] = beta;
            }
            tau.push(t);

            if t != 0.0 {
                let data = a.as_mut_slice();
                let (head, tail) = data.split_at_mut((k + 1) * m);
                let v = &head[k * m + k + 1..(k + 1) * m];
                for col in tail.chunks_exact_mut(m) {
                    let (top, below) = col[k..].split_first_mut().unwrap();
                    let f = t * (*top + dot(v, below));
                    *top -= f;
                    axpy(-f, v, below);
                }
            }

            // Downdate the remaining column norms, recomputing on cancellation.
            for j in (k + 1)..n {
                if norms[j] == 0.0 {
                    continue;
                }
                let ratio = a[(k, j)].abs() / norms[j];
                let factor = (1.0 - ratio * ratio).max(0.0);
                let updated = norms[j] * factor.sqrt();
                if updated <= 1e-7 * ref_norms[j] {
                    let fresh = a.view((k + 1, j), (m - k - 1, 1)).norm();
                    norms[j] = fresh;
                    ref_norms[j] = fresh;
                } else {
                    norms[j] = updated;
                }
            }
            rank = k + 1;
        }

        Self {
            packed: a,
            tau,
            perm,
            rank,
        }
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    /// Column permutation: column `j` of `A P` is column `perm[j]` of `A`.
    pub fn permutation(&self) -> &[usize] {
        &self.perm
    }

    /// The leading `rank × n` block of `R`, columns in pivoted order.
    pub fn r(&self) -> DMatrix<f64> {
        let n = self.packed.ncols();
        DMatrix::from_fn(
            self.rank,
            n,
            |i, j| if i <= j { self.packed[(i, j)] } else { 0.0 },
        )
    }

    /// `R Pᵀ`: the triangular factor with columns returned to the original
    /// order, so that `A ≈ Q · r_unpermuted()`.
    pub fn r_unpermuted(&self) -> DMatrix<f64> {
        let r = self.r();
        let mut out = DMatrix::zeros(r.nrows(), r.ncols());
        for (j, &orig) in self.perm.iter().enumerate() {
            out.set_column(orig, &r.column(j));
        }
        out
    }

    /// `Q · small` for a `rank × c` matrix, padded with zero rows to `m × c`.
    pub fn q_mul(&self, small: &DMatrix<f64>) -> DMatrix<f64> {
        assert_eq!(small.nrows(), self.rank, "q_mul expects rank rows");
        let m = self.packed.nrows();
        let mut out = DMatrix::zeros(m, small.ncols());
        out.rows_mut(0, self.rank).copy_from(small);
        for k in (0..self.rank).rev() {
            self.apply_reflector(k, &mut out);
        }
        out
    }

    /// Thin `Q` (m × rank).
    pub fn q(&self) -> DMatrix<f64> {
        self.q_mul(&DMatrix::identity(self.rank, self.rank))
    }

    fn apply_reflector(&self, k: usize, target: &mut DMatrix<f64>) {
        let t = self.tau[k];
        if t == 0.0 {
            return;
        }
        let m = self.packed.nrows();
        let v = &self.packed.as_slice()[k * m + k + 1..(k + 1) * m];
        for col in target.as_mut_slice().chunks_exact_mut(m) {
            let (top, below) = col[k..].split_first_mut().unwrap();
            let f = t * (*top + dot(v, below));
            *top -= f;
            axpy(-f, v, below);
        }
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0f64; 4];
    let mut ca = a.chunks_exact(4);
    let mut cb = b.chunks_exact(4);
    for (x, y) in (&mut ca).zip(&mut cb) {
        acc[0] += x[0] * y[0];
        acc[1] += x[1] * y[1];
        acc[2] += x[2] * y[2];
        acc[3] += x[3] * y[3];
    }
    let rest: f64 = ca
        .remainder()
        .iter()
        .zip(cb.remainder())
        .map(|(x, y)| x * y)
        .sum();
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + rest
}

#[inline]
fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn reconstruct(qr: &PivotedQr) -> DMatrix<f64> {
        qr.q() * qr.r_unpermuted()
    }

    #[test]
    fn full_rank_reconstruction() {
        let a = DMatrix::from_row_slice(
            4,
            3,
            &[1.0, 2.0, 0.5, -1.0, 0.3, 2.0, 0.0, 4.0, 1.0, 2.5, -1.0, 0.7],
        );
        let qr = PivotedQr::new(a.clone());
        assert_eq!(qr.rank(), 3);
        assert!((reconstruct(&qr) - &a).amax() < 1e-13);
        let q = qr.q();
        assert!((q.transpose() * &q - DMatrix::identity(3, 3)).amax() < 1e-14);
    }

    #[test]
    fn diagonal_of_r_is_non_increasing() {
        let a = DMatrix::from_row_slice(3, 3, &[0.1, 5.0, 1.0, 0.0, 1.0, 3.0, 0.2, 0.0, 1.0]);
        let r = PivotedQr::new(a).r();
        assert!(r[(0, 0)].abs() >= r[(1, 1)].abs());
        assert!(r[(1, 1)].abs() >= r[(2, 2)].abs());
    }

    #[test]
    fn detects_rank_deficiency() {
        // third column = first + second
        let a = DMatrix::from_row_slice(
            4,
            3,
            &[1.0, 0.0, 1.0, 2.0, 1.0, 3.0, 0.0, 4.0, 4.0, 1.0, 1.0, 2.0],
        );
        let qr = PivotedQr::new(a.clone());
        assert_eq!(qr.rank(), 2);
        assert!((reconstruct(&qr) - &a).amax() < 1e-12);
    }

    #[test]
    fn zero_matrix_has_rank_zero() {
        let qr = PivotedQr::new(DMatrix::zeros(5, 2));
        assert_eq!(qr.rank(), 0);
        assert_eq!(qr.q().shape(), (5, 0));
    }

    #[test]
    fn wide_matrix() {
        let a = DMatrix::from_row_slice(2, 4, &[1.0, 2.0, 3.0, 4.0, 0.5, -1.0, 2.0, 0.0]);
        let qr = PivotedQr::new(a.clone());
        assert_eq!(qr.rank(), 2);
        assert!((reconstruct(&qr) - &a).amax() < 1e-13);
    }

    proptest! {
        #[test]
        fn reconstructs_random_matrices(
            m in 1usize..12,
            n in 1usize..8,
            seed in any::<u64>(),
        ) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let a = DMatrix::from_fn(m, n, |_, _| rng.gen_range(-1.0..1.0));
            let qr = PivotedQr::new(a.clone());
            prop_assert!(qr.rank() <= m.min(n));
            prop_assert!((reconstruct(&qr) - &a).amax() < 1e-12);
        }
    }
}
