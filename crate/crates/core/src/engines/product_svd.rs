//! Product-SVD backend: eigenpairs of `C = L·R` without ever forming the
//! p×p matrix. Every intermediate is at most p×N.

use std::cell::Cell;

use nalgebra::{DMatrix, DVector};

use super::{
    check_k, normalize_columns, spectrum_floor, EigenSolution, PreparedOperator, SpectralEngine,
};
use crate::error::{Result, UcaError};
use crate::linalg::decomp::{symmetric_eigen, thin_svd_left};
use crate::linalg::qr::{PivotedQr, DEFAULT_RANK_TOL};
use crate::linalg::{assemble_factored, DataSource, FactoredOperator, StandardizedMatrix};

thread_local! {
    static LARGEST_BUFFER: Cell<usize> = const { Cell::new(0) };
}

/// Element count of the largest matrix allocated by the most recent
/// product-SVD call on this thread (the factored operator itself excluded).
pub fn product_svd_largest_buffer() -> usize {
    LARGEST_BUFFER.with(|c| c.get())
}

struct BufferMeter(usize);

impl BufferMeter {
    fn see<R: nalgebra::Dim, C: nalgebra::Dim, S: nalgebra::RawStorage<f64, R, C>>(
        &mut self,
        m: &nalgebra::Matrix<f64, R, C, S>,
    ) {
        self.0 = self.0.max(m.nrows() * m.ncols());
    }
}

impl Drop for BufferMeter {
    fn drop(&mut self) {
        LARGEST_BUFFER.with(|c| c.set(self.0));
    }
}

/// Left singular vectors and singular values of the right factor `R`
/// (N × p). Independent of the multipliers, so computed once per dataset.
#[derive(Debug, Clone)]
pub struct RightFactorSvd {
    u: DMatrix<f64>,
    s: Vec<f64>,
    n_total: usize,
    dim: usize,
}

impl RightFactorSvd {
    pub fn from_right(right: &DMatrix<f64>) -> Self {
        let (n_total, dim) = right.shape();
        // R = (T Pᵀ)ᵀ Qᵀ from a pivoted QR of Rᵀ, so the left singular
        // pairs of R are those of the small N × rank matrix (T Pᵀ)ᵀ.
        let qr = PivotedQr::new(right.transpose());
        if qr.rank() == 0 {
            return RightFactorSvd {
                u: DMatrix::zeros(n_total, 0),
                s: Vec::new(),
                n_total,
                dim,
            };
        }
        let small = qr.r_unpermuted().transpose();
        let (u_all, sv) = thin_svd_left(&small);
        let smax = sv.iter().cloned().fold(0.0, f64::max);
        let keep: Vec<usize> = (0..sv.len())
            .filter(|&i| sv[i] > DEFAULT_RANK_TOL * smax)
            .collect();
        let mut u = DMatrix::zeros(n_total, keep.len());
        for (dst, &src) in keep.iter().enumerate() {
            u.set_column(dst, &u_all.column(src));
        }
        RightFactorSvd {
            u,
            s: keep.iter().map(|&i| sv[i]).collect(),
            n_total,
            dim,
        }
    }

    pub fn rank(&self) -> usize {
        self.s.len()
    }

    pub fn singular_values(&self) -> &[f64] {
        &self.s
    }

    pub fn left_vectors(&self) -> &DMatrix<f64> {
        &self.u
    }
}

/// Factors the stacked, scaled sample matrices once.
pub fn precompute_right(
    target: &StandardizedMatrix,
    backgrounds: &[StandardizedMatrix],
) -> Result<RightFactorSvd> {
    let op = assemble_factored(target, backgrounds, &vec![0.0; backgrounds.len()])?;
    Ok(RightFactorSvd::from_right(op.right()))
}

/// Top-k eigenpairs of `op.left() · op.right()`, `k ≤ min(p, N)`.
///
/// The range of `C` lies in the span of `L·U_R`, which is therefore an
/// invariant subspace; a Rayleigh–Ritz step on an orthonormal basis of it
/// yields exact eigenpairs. Whatever is left of the spectrum is zero, and is
/// filled with unit vectors orthogonal to that basis.
pub fn top_eigenpairs_product_svd(
    op: &FactoredOperator,
    k: usize,
    cached: Option<&RightFactorSvd>,
) -> Result<EigenSolution> {
    let p = op.dim();
    check_k(k, p.min(op.n_total()))?;
    let owned;
    let right_svd = match cached {
        Some(c) => {
            if c.n_total != op.n_total() || c.dim != p {
                return Err(UcaError::mismatch(
                    op.n_total(),
                    c.n_total,
                    "cached right-factor rows",
                ));
            }
            c
        }
        None => {
            owned = RightFactorSvd::from_right(op.right());
            &owned
        }
    };

    let mut meter = BufferMeter(0);
    let left = op.left();

    // L U_R (p × r1), then its pivoted QR.
    let lu = left * &right_svd.u;
    meter.see(&lu);
    let qr = PivotedQr::new(lu);
    let r2 = qr.rank();

    let (ritz_values, basis) = if r2 == 0 {
        (Vec::new(), DMatrix::zeros(p, 0))
    } else {
        // SVD of R_qr S_R orients the basis along the singular directions of C.
        let mut rs = qr.r_unpermuted();
        for (j, &s) in right_svd.s.iter().enumerate() {
            rs.column_mut(j).scale_mut(s);
        }
        let (e, _) = thin_svd_left(&rs);
        let u = qr.q_mul(&e);
        meter.see(&u);

        // H = Uᵀ L (R U), in factored form.
        let lt_u = left.tr_mul(&u);
        let r_u = op.right() * &u;
        meter.see(&lt_u);
        meter.see(&r_u);
        let mut h = lt_u.tr_mul(&r_u);
        h = (&h + h.transpose()) * 0.5;
        let eig = symmetric_eigen(&h);
        let z = eig.vectors;
        let vals = eig.values;
        let take = k.min(r2);
        let vecs = &u * z.columns(0, take);
        let mut basis = DMatrix::zeros(p, r2);
        basis.columns_mut(0, take).copy_from(&vecs);
        // Columns past `take` are only needed as the span to complete
        // against; keep U itself there.
        if take < r2 {
            let rest = &u * z.columns(take, r2 - take);
            basis.columns_mut(take, r2 - take).copy_from(&rest);
        }
        meter.see(&basis);
        (vals, basis)
    };

    // Merge Ritz values with the p − r2 zero eigenvalues.
    let n_zero = p - r2;
    let mut picks: Vec<Option<usize>> = Vec::with_capacity(k);
    let (mut i, mut zeros_used) = (0usize, 0usize);
    while picks.len() < k {
        let ritz_next = ritz_values.get(i).copied();
        let use_zero = zeros_used < n_zero && ritz_next.map_or(true, |v| v < 0.0);
        if use_zero {
            picks.push(None);
            zeros_used += 1;
        } else {
            picks.push(Some(i));
            i += 1;
        }
    }

    let completion = complete_basis(&basis, zeros_used);
    let mut eigenvectors = DMatrix::zeros(p, k);
    let mut eigenvalues = Vec::with_capacity(k);
    let mut z_idx = 0;
    for (col, pick) in picks.iter().enumerate() {
        match pick {
            Some(idx) => {
                eigenvectors.set_column(col, &basis.column(*idx));
                eigenvalues.push(ritz_values[*idx]);
            }
            None => {
                eigenvectors.set_column(col, &completion.column(z_idx));
                eigenvalues.push(0.0);
                z_idx += 1;
            }
        }
    }
    meter.see(&eigenvectors);
    normalize_columns(&mut eigenvectors);

    let rv = op.right() * &eigenvectors;
    let cv = left * rv;
    let residual_norms = (0..k)
        .map(|c| (cv.column(c) - eigenvectors.column(c) * eigenvalues[c]).norm())
        .collect();

    Ok(EigenSolution {
        eigenvalues,
        eigenvectors,
        backend: ProductSvdEngine::NAME,
        residual_norms,
    })
}

/// `count` orthonormal vectors orthogonal to the columns of `basis`, built
/// from coordinate vectors in a fixed order.
fn complete_basis(basis: &DMatrix<f64>, count: usize) -> DMatrix<f64> {
    let p = basis.nrows();
    let mut out = DMatrix::zeros(p, count);
    let mut found = 0;
    let mut e = 0;
    while found < count && e < p {
        let mut v = DVector::zeros(p);
        v[e] = 1.0;
        e += 1;
        for _ in 0..2 {
            if basis.ncols() > 0 {
                let h = basis.tr_mul(&v);
                v.gemv(-1.0, basis, &h, 1.0);
            }
            if found > 0 {
                let prev = out.columns(0, found);
                let h = prev.tr_mul(&v);
                v.gemv(-1.0, &prev, &h, 1.0);
            }
        }
        let n = v.norm();
        if n > 1e-6 {
            out.set_column(found, &(v / n));
            found += 1;
        }
    }
    out
}

/// Factored backend for sample inputs.
#[derive(Debug, Clone, Copy, Default)]
pub struct ProductSvdEngine;

impl ProductSvdEngine {
    pub const NAME: &'static str = "product-svd";
}

impl SpectralEngine for ProductSvdEngine {
    fn name(&self) -> &'static str {
        Self::NAME
    }

    fn supports(&self, target: &DataSource, backgrounds: &[DataSource]) -> bool {
        target.samples().is_some() && backgrounds.iter().all(|b| b.samples().is_some())
    }

    fn prepare(
        &self,
        target: &DataSource,
        backgrounds: &[DataSource],
    ) -> Result<Box<dyn PreparedOperator>> {
        let need = || UcaError::InvalidInput("product-svd needs sample matrices".into());
        let y = target.samples().ok_or_else(need)?;
        let xs: Vec<StandardizedMatrix> = backgrounds
            .iter()
            .map(|b| b.samples().cloned().ok_or_else(need))
            .collect::<Result<_>>()?;
        let op = assemble_factored(y, &xs, &vec![0.0; xs.len()])?;
        let cached = RightFactorSvd::from_right(op.right());
        Ok(Box::new(ProductSvdOperator {
            op,
            cached,
            floors: backgrounds.iter().map(spectrum_floor).collect(),
        }))
    }
}

struct ProductSvdOperator {
    op: FactoredOperator,
    cached: RightFactorSvd,
    floors: Vec<f64>,
}

impl PreparedOperator for ProductSvdOperator {
    fn engine(&self) -> &'static str {
        ProductSvdEngine::NAME
    }

    fn dim(&self) -> usize {
        self.op.dim()
    }

    fn n_backgrounds(&self) -> usize {
        self.op.n_backgrounds()
    }

    fn max_pairs(&self) -> usize {
        self.op.dim().min(self.op.n_total())
    }

    fn top_eigenpairs(&mut self, lambdas: &[f64], k: usize) -> Result<EigenSolution> {
        self.op.set_lambdas(lambdas)?;
        top_eigenpairs_product_svd(&self.op, k, Some(&self.cached))
    }

    fn apply(&self, lambdas: &[f64], v: &DVector<f64>) -> DVector<f64> {
        let right = self.op.right();
        let w = right * v;
        let mut out = DVector::zeros(self.op.dim());
        for (b, range) in self.op.block_offsets().iter().enumerate() {
            let coef = if b == 0 { 1.0 } else { -lambdas[b - 1] };
            if coef == 0.0 {
                continue;
            }
            let block = right.rows(range.start, range.len());
            out.gemv_tr(coef, &block, &w.rows(range.start, range.len()), 1.0);
        }
        out
    }

    fn target_form(&self, v: &DVector<f64>) -> f64 {
        self.op.block_quadratic_form(0, v)
    }

    fn background_form(&self, j: usize, v: &DVector<f64>) -> f64 {
        self.op.block_quadratic_form(j + 1, v)
    }

    fn background_floor(&self, j: usize) -> f64 {
        self.floors[j]
    }
}
