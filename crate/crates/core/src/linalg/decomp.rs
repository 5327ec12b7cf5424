//! Symmetric eigendecomposition and thin SVD on nalgebra matrices, computed
//! by `faer`.

use faer::{Mat, Side};
use nalgebra::DMatrix;

fn to_faer(m: &DMatrix<f64>) -> Mat<f64> {
    Mat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

/// Eigenpairs of a symmetric matrix, eigenvalues descending. Only the lower
/// triangle is read.
#[derive(Debug, Clone)]
pub struct SymmetricDecomposition {
    pub values: Vec<f64>,
    pub vectors: DMatrix<f64>,
}

pub fn symmetric_eigen(m: &DMatrix<f64>) -> SymmetricDecomposition {
    let n = m.nrows();
    let eig = to_faer(m).selfadjoint_eigendecomposition(Side::Lower);
    let s = eig.s().column_vector();
    let u = eig.u();
    // faer returns ascending order.
    SymmetricDecomposition {
        values: (0..n).rev().map(|i| s[i]).collect(),
        vectors: DMatrix::from_fn(n, n, |i, j| u[(i, n - 1 - j)]),
    }
}

/// Eigenvalues of a symmetric matrix, descending.
pub fn symmetric_eigenvalues(m: &DMatrix<f64>) -> Vec<f64> {
    let mut v = to_faer(m).selfadjoint_eigenvalues(Side::Lower);
    v.sort_by(|a, b| b.total_cmp(a));
    v
}

/// Thin SVD `m = U diag(s) Vᵀ`; returns `U` and `s` (descending).
pub fn thin_svd_left(m: &DMatrix<f64>) -> (DMatrix<f64>, Vec<f64>) {
    let svd = to_faer(m).thin_svd();
    let s = svd.s_diagonal();
    let u = svd.u();
    let k = s.nrows();
    (
        DMatrix::from_fn(u.nrows(), k, |i, j| u[(i, j)]),
        (0..k).map(|i| s[i]).collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eigen_residuals_are_small() {
        let m = DMatrix::from_fn(12, 12, |i, j| {
            ((i * 7 + j * 3) % 11) as f64 + ((i + j) % 5) as f64
        });
        let m = (&m + m.transpose()) * 0.5;
        let d = symmetric_eigen(&m);
        for j in 0..12 {
            let v = d.vectors.column(j);
            assert!((&m * v - v * d.values[j]).norm() < 1e-12 * d.values[0].abs());
        }
        for w in d.values.windows(2) {
            assert!(w[0] >= w[1]);
        }
    }

    #[test]
    fn svd_reconstructs_left_side() {
        let m = DMatrix::from_fn(6, 4, |i, j| ((i * 5 + j * 2) % 7) as f64 - 3.0);
        let (u, s) = thin_svd_left(&m);
        assert_eq!(u.shape(), (6, 4));
        // UᵀM has rows s_i v_iᵀ, so ‖UᵀM‖_F² = Σ s_i² = ‖M‖_F².
        let proj = u.transpose() * &m;
        let fro: f64 = s.iter().map(|x| x * x).sum();
        assert!((proj.norm_squared() - fro).abs() < 1e-10 * fro);
        assert!((m.norm_squared() - fro).abs() < 1e-10 * fro);
    }
}
