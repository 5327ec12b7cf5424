//! Dense backend: assemble `A − Σ λ_j B_j` and decompose it directly.

use nalgebra::{DMatrix, DVector};

use super::{
    check_k, lanczos, normalize_columns, spectrum_floor, EigenSolution, PreparedOperator,
    SpectralEngine,
};
use crate::error::{Result, UcaError};
use crate::linalg::decomp::symmetric_eigen;
use crate::linalg::{assemble_dense, max_asymmetry, CovarianceMatrix, DataSource};

/// Largest dimension handled by a full symmetric decomposition; above it the
/// dense backend switches to Lanczos.
pub const FULL_DECOMPOSITION_LIMIT: usize = 512;

const LANCZOS_TOL: f64 = 1e-11;

/// Top-k algebraically largest eigenpairs of a dense symmetric matrix.
pub fn top_eigenpairs_dense(c: &DMatrix<f64>, k: usize) -> Result<EigenSolution> {
    if !c.is_square() {
        return Err(UcaError::InvalidInput(format!(
            "expected a square matrix, got {}x{}",
            c.nrows(),
            c.ncols()
        )));
    }
    let p = c.nrows();
    check_k(k, p)?;
    let asym = max_asymmetry(c);
    if asym > 1e-10 * c.amax().max(1.0) {
        return Err(UcaError::NotSymmetric(asym));
    }

    let (eigenvalues, mut eigenvectors) = if p <= FULL_DECOMPOSITION_LIMIT {
        full_top(c, k)
    } else {
        let max_dim = (4 * k + 400).min(p);
        match lanczos::top_eigenpairs(|v| c * v, p, k, LANCZOS_TOL, max_dim) {
            Some(res) => (res.values, res.vectors),
            None => {
                log::warn!("Lanczos did not converge for p = {p}; using a full decomposition");
                full_top(c, k)
            }
        }
    };

    normalize_columns(&mut eigenvectors);
    let residual_norms = (0..k)
        .map(|i| {
            let v = eigenvectors.column(i);
            (c * v - v * eigenvalues[i]).norm()
        })
        .collect();
    Ok(EigenSolution {
        eigenvalues,
        eigenvectors,
        backend: DenseEngine::NAME,
        residual_norms,
    })
}

fn full_top(c: &DMatrix<f64>, k: usize) -> (Vec<f64>, DMatrix<f64>) {
    let eig = symmetric_eigen(c);
    (
        eig.values[..k].to_vec(),
        eig.vectors.columns(0, k).into_owned(),
    )
}

/// Eigendecomposition of the assembled p×p contrastive matrix.
#[derive(Debug, Clone, Copy, Default)]
pub struct DenseEngine;

impl DenseEngine {
    pub const NAME: &'static str = "dense";
}

impl SpectralEngine for DenseEngine {
    fn name(&self) -> &'static str {
        Self::NAME
    }

    fn supports(&self, _target: &DataSource, _backgrounds: &[DataSource]) -> bool {
        true
    }

    fn prepare(
        &self,
        target: &DataSource,
        backgrounds: &[DataSource],
    ) -> Result<Box<dyn PreparedOperator>> {
        let p = target.dim();
        for (j, b) in backgrounds.iter().enumerate() {
            if b.dim() != p {
                return Err(UcaError::mismatch(
                    p,
                    b.dim(),
                    format!("background {j} features"),
                ));
            }
        }
        Ok(Box::new(DenseOperator {
            target: target.covariance(),
            backgrounds: backgrounds.iter().map(|b| b.covariance()).collect(),
            floors: backgrounds.iter().map(spectrum_floor).collect(),
        }))
    }
}

struct DenseOperator {
    target: CovarianceMatrix,
    backgrounds: Vec<CovarianceMatrix>,
    floors: Vec<f64>,
}

impl PreparedOperator for DenseOperator {
    fn engine(&self) -> &'static str {
        DenseEngine::NAME
    }

    fn dim(&self) -> usize {
        self.target.dim()
    }

    fn n_backgrounds(&self) -> usize {
        self.backgrounds.len()
    }

    fn max_pairs(&self) -> usize {
        self.dim()
    }

    fn top_eigenpairs(&mut self, lambdas: &[f64], k: usize) -> Result<EigenSolution> {
        let c = assemble_dense(&self.target, &self.backgrounds, lambdas)?;
        top_eigenpairs_dense(&c, k)
    }

    fn apply(&self, lambdas: &[f64], v: &DVector<f64>) -> DVector<f64> {
        let mut out = self.target.values() * v;
        for (b, &l) in self.backgrounds.iter().zip(lambdas) {
            if l != 0.0 {
                out.gemv(-l, b.values(), v, 1.0);
            }
        }
        out
    }

    fn target_form(&self, v: &DVector<f64>) -> f64 {
        self.target.quadratic_form(v)
    }

    fn background_form(&self, j: usize, v: &DVector<f64>) -> f64 {
        self.backgrounds[j].quadratic_form(v)
    }

    fn background_floor(&self, j: usize) -> f64 {
        self.floors[j]
    }
}
