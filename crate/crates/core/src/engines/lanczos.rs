//! Lanczos with full reorthogonalization for the algebraically largest
//! eigenpairs of a large dense symmetric matrix.

use nalgebra::{DMatrix, DVector};

use crate::linalg::decomp::symmetric_eigen;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SEED: u64 = 0x5eed_1a2c;

pub(crate) struct LanczosResult {
    pub values: Vec<f64>,
    pub vectors: DMatrix<f64>,
}

/// Returns `None` when the Krylov basis reaches `max_dim` without the top
/// `k` Ritz pairs meeting `‖C y − θ y‖ ≤ tol · max|θ|`.
pub(crate) fn top_eigenpairs<F>(
    mut apply: F,
    p: usize,
    k: usize,
    tol: f64,
    max_dim: usize,
) -> Option<LanczosResult>
where
    F: FnMut(&DVector<f64>) -> DVector<f64>,
{
    let max_dim = max_dim.min(p).max(k);
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mut basis = DMatrix::<f64>::zeros(p, max_dim);
    let mut alpha: Vec<f64> = Vec::with_capacity(max_dim);
    let mut beta: Vec<f64> = Vec::with_capacity(max_dim);

    let start = random_unit(&mut rng, p, &basis, 0)?;
    basis.set_column(0, &start);

    let mut next_check = k.max(8);
    let mut scale = 0.0f64;

    for j in 0..max_dim {
        let vj = basis.column(j).into_owned();
        let mut w = apply(&vj);
        let a = vj.dot(&w);
        w.axpy(-a, &vj, 1.0);
        if j > 0 {
            let prev = basis.column(j - 1);
            w.axpy(-beta[j - 1], &prev, 1.0);
        }
        reorthogonalize(&basis, j + 1, &mut w);
        alpha.push(a);
        let b = w.norm();
        let m = j + 1;

        scale = scale.max(a.abs()).max(b);
        let breakdown = b <= 1e-13 * scale.max(f64::MIN_POSITIVE);
        let at_end = m == max_dim;

        if m >= k && (m >= next_check || breakdown || at_end) {
            next_check = m + if m < 60 { 8 } else { 16 };
            let (theta, y) = tridiagonal_eigen(&alpha, &beta);
            let norm = theta.iter().fold(0.0f64, |acc, t| acc.max(t.abs()));
            let converged = (0..k).all(|i| (b * y[(m - 1, i)]).abs() <= tol * norm.max(1e-300));
            if converged {
                let vectors = basis.columns(0, m) * y.columns(0, k);
                return Some(LanczosResult {
                    values: theta[..k].to_vec(),
                    vectors,
                });
            }
        }

        if at_end {
            return None;
        }
        if breakdown {
            // Invariant subspace found; continue in its complement.
            let fresh = random_unit(&mut rng, p, &basis, m)?;
            basis.set_column(m, &fresh);
            beta.push(0.0);
        } else {
            basis.set_column(m, &(w / b));
            beta.push(b);
        }
    }
    None
}

fn reorthogonalize(basis: &DMatrix<f64>, cols: usize, w: &mut DVector<f64>) {
    let v = basis.columns(0, cols);
    for _ in 0..2 {
        let h = v.tr_mul(w);
        w.gemv(-1.0, &v, &h, 1.0);
    }
}

fn random_unit(
    rng: &mut ChaCha8Rng,
    p: usize,
    basis: &DMatrix<f64>,
    cols: usize,
) -> Option<DVector<f64>> {
    for _ in 0..8 {
        let mut v = DVector::from_fn(p, |_, _| rng.gen_range(-1.0..1.0));
        if cols > 0 {
            reorthogonalize(basis, cols, &mut v);
        }
        let n = v.norm();
        if n > 1e-8 {
            return Some(v / n);
        }
    }
    None
}

/// Eigenpairs of the Lanczos tridiagonal, sorted descending.
fn tridiagonal_eigen(alpha: &[f64], beta: &[f64]) -> (Vec<f64>, DMatrix<f64>) {
    let m = alpha.len();
    let mut t = DMatrix::zeros(m, m);
    for i in 0..m {
        t[(i, i)] = alpha[i];
        if i + 1 < m {
            t[(i, i + 1)] = beta[i];
            t[(i + 1, i)] = beta[i];
        }
    }
    let eig = symmetric_eigen(&t);
    (eig.values, eig.vectors)
}
