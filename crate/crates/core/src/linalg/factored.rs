use std::ops::Range;

use nalgebra::{DMatrix, DVector};

use super::{check_lambdas, StandardizedMatrix};
use crate::error::{Result, UcaError};

/// `C_λ = left · right` with
///
/// ```text
/// left  = [ Yᵀ/√n_y, −λ_1 X_1ᵀ/√n_1, …, −λ_m X_mᵀ/√n_m ]   (p × N)
/// right = [ Y/√n_y ; X_1/√n_1 ; … ; X_m/√n_m ]             (N × p)
/// ```
///
/// `right` never carries a multiplier, so it can be factored once and reused
/// while the multipliers change.
#[derive(Debug, Clone)]
pub struct FactoredOperator {
    left: DMatrix<f64>,
    right: DMatrix<f64>,
    block_offsets: Vec<Range<usize>>,
    lambdas: Vec<f64>,
}

/// Builds the factor pair from standardized target and backgrounds.
pub fn assemble_factored(
    target: &StandardizedMatrix,
    backgrounds: &[StandardizedMatrix],
    lambdas: &[f64],
) -> Result<FactoredOperator> {
    if lambdas.len() != backgrounds.len() {
        return Err(UcaError::mismatch(
            backgrounds.len(),
            lambdas.len(),
            "multipliers",
        ));
    }
    check_lambdas(lambdas)?;
    let p = target.ncols();
    for (j, b) in backgrounds.iter().enumerate() {
        if b.ncols() != p {
            return Err(UcaError::mismatch(
                p,
                b.ncols(),
                format!("background {j} features"),
            ));
        }
    }

    let blocks: Vec<&DMatrix<f64>> = std::iter::once(target.values())
        .chain(backgrounds.iter().map(|b| b.values()))
        .collect();
    let n_total: usize = blocks.iter().map(|b| b.nrows()).sum();

    let mut right = DMatrix::zeros(n_total, p);
    let mut block_offsets = Vec::with_capacity(blocks.len());
    let mut start = 0;
    for block in &blocks {
        let n = block.nrows();
        let scale = 1.0 / (n as f64).sqrt();
        right.rows_mut(start, n).copy_from(&(*block * scale));
        block_offsets.push(start..start + n);
        start += n;
    }

    let mut op = FactoredOperator {
        left: right.transpose(),
        right,
        block_offsets,
        // NaN differs bitwise from every valid multiplier, so every block is written.
        lambdas: vec![f64::NAN; backgrounds.len()],
    };
    op.set_lambdas(lambdas)?;
    Ok(op)
}

impl FactoredOperator {
    pub fn left(&self) -> &DMatrix<f64> {
        &self.left
    }

    pub fn right(&self) -> &DMatrix<f64> {
        &self.right
    }

    pub fn block_offsets(&self) -> &[Range<usize>] {
        &self.block_offsets
    }

    pub fn lambdas(&self) -> &[f64] {
        &self.lambdas
    }

    pub fn dim(&self) -> usize {
        self.right.ncols()
    }

    /// Total sample count N, an upper bound on the rank of `C_λ`.
    pub fn n_total(&self) -> usize {
        self.right.nrows()
    }

    pub fn n_backgrounds(&self) -> usize {
        self.lambdas.len()
    }

    /// Rewrites the left block of background `j` as `−λ·(right block)ᵀ`.
    /// Only that block of `left` is touched.
    pub fn set_lambda(&mut self, j: usize, lambda: f64) -> Result<()> {
        if j >= self.lambdas.len() {
            return Err(UcaError::mismatch(
                self.lambdas.len(),
                j + 1,
                "background index",
            ));
        }
        check_lambdas(&[lambda])?;
        let range = self.block_offsets[j + 1].clone();
        let block = self.right.rows(range.start, range.len());
        let mut dst = self.left.columns_mut(range.start, range.len());
        for (mut c, r) in dst.column_iter_mut().zip(block.row_iter()) {
            for (d, &s) in c.iter_mut().zip(r.iter()) {
                *d = -lambda * s;
            }
        }
        self.lambdas[j] = lambda;
        Ok(())
    }

    pub fn set_lambdas(&mut self, lambdas: &[f64]) -> Result<()> {
        if lambdas.len() != self.lambdas.len() {
            return Err(UcaError::mismatch(
                self.lambdas.len(),
                lambdas.len(),
                "multipliers",
            ));
        }
        check_lambdas(lambdas)?;
        for (j, &l) in lambdas.iter().enumerate() {
            if self.lambdas[j].to_bits() != l.to_bits() {
                self.set_lambda(j, l)?;
            }
        }
        Ok(())
    }

    /// `C_λ v` without forming `C_λ`.
    pub fn apply(&self, v: &DVector<f64>) -> DVector<f64> {
        &self.left * (&self.right * v)
    }

    /// `‖X_block v‖² / n_block` for block `b` (0 is the target).
    pub fn block_quadratic_form(&self, b: usize, v: &DVector<f64>) -> f64 {
        let range = self.block_offsets[b].clone();
        let block = self.right.rows(range.start, range.len());
        (block * v).norm_squared()
    }

    /// Dense `left · right`; for checks on small instances only.
    pub fn to_dense(&self) -> DMatrix<f64> {
        &self.left * &self.right
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{assemble_dense, covariance, standardize, RawMatrix, ZeroVariancePolicy};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_std(rng: &mut ChaCha8Rng, n: usize, p: usize) -> StandardizedMatrix {
        let data: Vec<f64> = (0..n * p).map(|_| rng.gen_range(-2.0..2.0)).collect();
        standardize(
            &RawMatrix::from_row_slice(n, p, &data).unwrap(),
            ZeroVariancePolicy::Error,
        )
        .unwrap()
    }

    #[test]
    fn zero_lambda_reduces_to_target_covariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let y = random_std(&mut rng, 6, 4);
        let x = random_std(&mut rng, 5, 4);
        let op = assemble_factored(&y, &[x], &[0.0]).unwrap();
        let a = covariance(&y);
        assert!((op.to_dense() - a.values()).amax() < 1e-12);
    }

    #[test]
    fn matches_dense_assembly() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let y = random_std(&mut rng, 5, 8);
        let x1 = random_std(&mut rng, 5, 8);
        let x2 = random_std(&mut rng, 5, 8);
        let lambdas = [0.4, 1.3];
        let op = assemble_factored(&y, &[x1.clone(), x2.clone()], &lambdas).unwrap();
        let dense = assemble_dense(
            &covariance(&y),
            &[covariance(&x1), covariance(&x2)],
            &lambdas,
        )
        .unwrap();
        let rel = (op.to_dense() - &dense).norm() / dense.norm();
        assert!(rel < 1e-10, "relative Frobenius error {rel}");
    }

    #[test]
    fn lambda_update_touches_only_its_block() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let y = random_std(&mut rng, 4, 3);
        let x = random_std(&mut rng, 6, 3);
        let mut op = assemble_factored(&y, &[x], &[1.0]).unwrap();
        let right_before = op.right().clone();
        let left_before = op.left().clone();
        op.set_lambda(0, 2.0).unwrap();

        assert_eq!(op.right(), &right_before);
        let bg = op.block_offsets()[1].clone();
        for c in 0..op.n_total() {
            for r in 0..op.dim() {
                let before = left_before[(r, c)];
                let after = op.left()[(r, c)];
                if bg.contains(&c) {
                    assert_eq!(after, 2.0 * before);
                } else {
                    assert_eq!(after.to_bits(), before.to_bits());
                }
            }
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let y = random_std(&mut rng, 4, 3);
        let x = random_std(&mut rng, 4, 2);
        assert!(assemble_factored(&y, &[x], &[1.0]).is_err());
        let x = random_std(&mut rng, 4, 3);
        assert!(matches!(
            assemble_factored(&y, &[x], &[-0.5]),
            Err(UcaError::NegativeLambda { .. })
        ));
    }
}
