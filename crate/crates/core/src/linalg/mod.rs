//! Data standardization, covariance under the 1/n convention, and assembly
//! of the contrastive operator `C_λ = A − Σ λ_j B_j` in dense and factored form.

pub mod decomp;
mod factored;
pub mod qr;

pub use factored::{assemble_factored, FactoredOperator};

use nalgebra::{DMatrix, DVector};

use crate::error::{Result, UcaError};

/// An n×p sample matrix (rows are samples) with optional feature labels.
#[derive(Debug, Clone, PartialEq)]
pub struct RawMatrix {
    values: DMatrix<f64>,
    feature_names: Option<Vec<String>>,
}

impl RawMatrix {
    pub fn new(values: DMatrix<f64>) -> Result<Self> {
        if values.nrows() == 0 || values.ncols() == 0 {
            return Err(UcaError::InvalidInput(format!(
                "data matrix must be non-empty, got {}x{}",
                values.nrows(),
                values.ncols()
            )));
        }
        if let Some(pos) = values.iter().position(|x| !x.is_finite()) {
            let n = values.nrows();
            return Err(UcaError::InvalidInput(format!(
                "non-finite entry at row {}, column {}",
                pos % n,
                pos / n
            )));
        }
        Ok(Self {
            values,
            feature_names: None,
        })
    }

    pub fn from_row_slice(nrows: usize, ncols: usize, data: &[f64]) -> Result<Self> {
        if data.len() != nrows * ncols {
            return Err(UcaError::mismatch(
                nrows * ncols,
                data.len(),
                "row-major data length",
            ));
        }
        Self::new(DMatrix::from_row_slice(nrows, ncols, data))
    }

    pub fn with_feature_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.values.ncols() {
            return Err(UcaError::mismatch(
                self.values.ncols(),
                names.len(),
                "feature names",
            ));
        }
        self.feature_names = Some(names);
        Ok(self)
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn feature_names(&self) -> Option<&[String]> {
        self.feature_names.as_deref()
    }

    pub fn nrows(&self) -> usize {
        self.values.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.values.ncols()
    }
}

/// What to do with a feature whose population variance is zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ZeroVariancePolicy {
    #[default]
    Error,
    ZeroFill,
}

impl std::str::FromStr for ZeroVariancePolicy {
    type Err = UcaError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "error" => Ok(Self::Error),
            "zero-fill" => Ok(Self::ZeroFill),
            other => Err(UcaError::UnknownStrategy {
                kind: "zero-variance policy",
                name: other.to_string(),
            }),
        }
    }
}

/// Per-feature centering and scaling, in original units.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardization {
    pub means: Vec<f64>,
    pub scales: Vec<f64>,
    pub zero_variance_mask: Vec<bool>,
}

impl Standardization {
    pub fn dim(&self) -> usize {
        self.means.len()
    }

    /// Centers and scales `values` (n×p) with the stored parameters. Masked
    /// features map to zero.
    pub fn apply(&self, values: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if values.ncols() != self.dim() {
            return Err(UcaError::mismatch(
                self.dim(),
                values.ncols(),
                "feature count",
            ));
        }
        let mut out = values.clone();
        for (j, mut col) in out.column_iter_mut().enumerate() {
            if self.zero_variance_mask[j] {
                col.fill(0.0);
            } else {
                let (mean, scale) = (self.means[j], self.scales[j]);
                col.apply(|x| *x = (*x - mean) / scale);
            }
        }
        Ok(out)
    }
}

/// A data matrix whose retained columns have zero mean and unit population
/// variance.
#[derive(Debug, Clone, PartialEq)]
pub struct StandardizedMatrix {
    values: DMatrix<f64>,
    standardization: Standardization,
    feature_names: Option<Vec<String>>,
}

impl StandardizedMatrix {
    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn standardization(&self) -> &Standardization {
        &self.standardization
    }

    pub fn means(&self) -> &[f64] {
        &self.standardization.means
    }

    pub fn scales(&self) -> &[f64] {
        &self.standardization.scales
    }

    pub fn zero_variance_mask(&self) -> &[bool] {
        &self.standardization.zero_variance_mask
    }

    pub fn feature_names(&self) -> Option<&[String]> {
        self.feature_names.as_deref()
    }

    pub fn nrows(&self) -> usize {
        self.values.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.values.ncols()
    }
}

/// Centers every column and divides by its population standard deviation
/// (1/n divisor, the same convention as [`covariance`]).
pub fn standardize(data: &RawMatrix, policy: ZeroVariancePolicy) -> Result<StandardizedMatrix> {
    let x = data.values();
    let (n, p) = x.shape();
    if n < 2 {
        return Err(UcaError::InvalidInput(format!(
            "standardization needs at least 2 samples, got {n}"
        )));
    }
    let nf = n as f64;
    let mut values = x.clone();
    let mut means = Vec::with_capacity(p);
    let mut scales = Vec::with_capacity(p);
    let mut mask = Vec::with_capacity(p);

    for (j, mut col) in values.column_iter_mut().enumerate() {
        let mean = col.iter().sum::<f64>() / nf;
        let var = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / nf;
        let sd = var.sqrt();
        let degenerate = sd <= 1e-12 * mean.abs().max(1.0);
        if degenerate {
            if policy == ZeroVariancePolicy::Error {
                let column = data
                    .feature_names()
                    .map(|names| names[j].clone())
                    .unwrap_or_else(|| format!("#{j}"));
                return Err(UcaError::ZeroVariance { column });
            }
            col.fill(0.0);
            means.push(mean);
            scales.push(1.0);
            mask.push(true);
        } else {
            col.apply(|v| *v = (*v - mean) / sd);
            means.push(mean);
            scales.push(sd);
            mask.push(false);
        }
    }

    Ok(StandardizedMatrix {
        values,
        standardization: Standardization {
            means,
            scales,
            zero_variance_mask: mask,
        },
        feature_names: data.feature_names.clone(),
    })
}

/// A symmetric positive semidefinite p×p matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceMatrix {
    values: DMatrix<f64>,
    n_source: usize,
}

impl CovarianceMatrix {
    /// Wraps a user-supplied matrix after checking symmetry (1e-12, relative
    /// to the largest entry) and positive semidefiniteness.
    pub fn new(values: DMatrix<f64>, n_source: usize) -> Result<Self> {
        if !values.is_square() || values.nrows() == 0 {
            return Err(UcaError::InvalidInput(format!(
                "covariance must be a non-empty square matrix, got {}x{}",
                values.nrows(),
                values.ncols()
            )));
        }
        if values.iter().any(|x| !x.is_finite()) {
            return Err(UcaError::InvalidInput(
                "covariance has non-finite entries".into(),
            ));
        }
        let asym = max_asymmetry(&values);
        let scale = values.amax().max(1.0);
        if asym > 1e-12 * scale {
            return Err(UcaError::NotSymmetric(asym));
        }
        let eig = decomp::symmetric_eigenvalues(&values);
        let largest = eig[0];
        let smallest = eig[eig.len() - 1];
        if smallest < -1e-8 * largest.abs().max(f64::MIN_POSITIVE) {
            return Err(UcaError::InvalidInput(format!(
                "covariance is not positive semidefinite (smallest eigenvalue {smallest:e})"
            )));
        }
        Ok(Self { values, n_source })
    }

    pub fn identity(p: usize) -> Self {
        Self {
            values: DMatrix::identity(p, p),
            n_source: 0,
        }
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn n_source(&self) -> usize {
        self.n_source
    }

    pub fn dim(&self) -> usize {
        self.values.nrows()
    }

    pub fn quadratic_form(&self, v: &DVector<f64>) -> f64 {
        v.dot(&(&self.values * v))
    }
}

pub(crate) fn max_asymmetry(m: &DMatrix<f64>) -> f64 {
    let p = m.nrows();
    let mut worst = 0.0f64;
    for j in 0..p {
        for i in (j + 1)..p {
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    worst
}

/// Copies the upper triangle onto the lower one.
pub(crate) fn mirror_upper(m: &mut DMatrix<f64>) {
    let p = m.nrows();
    for j in 0..p {
        for i in (j + 1)..p {
            m[(i, j)] = m[(j, i)];
        }
    }
}

/// `(1/n) XᵀX` for a standardized matrix.
pub fn covariance(data: &StandardizedMatrix) -> CovarianceMatrix {
    let x = data.values();
    let n = x.nrows();
    let mut values = x.tr_mul(x) / n as f64;
    mirror_upper(&mut values);
    CovarianceMatrix {
        values,
        n_source: n,
    }
}

/// Dense `A − Σ λ_j B_j`.
pub fn assemble_dense(
    target: &CovarianceMatrix,
    backgrounds: &[CovarianceMatrix],
    lambdas: &[f64],
) -> Result<DMatrix<f64>> {
    if lambdas.len() != backgrounds.len() {
        return Err(UcaError::mismatch(
            backgrounds.len(),
            lambdas.len(),
            "multipliers",
        ));
    }
    let p = target.dim();
    let mut out = target.values.clone();
    for (j, (b, &lambda)) in backgrounds.iter().zip(lambdas).enumerate() {
        if b.dim() != p {
            return Err(UcaError::mismatch(
                p,
                b.dim(),
                format!("background {j} dimension"),
            ));
        }
        if lambda != 0.0 {
            out.zip_apply(&b.values, |c, bij| *c -= lambda * bij);
        }
    }
    Ok(out)
}

pub(crate) fn check_lambdas(lambdas: &[f64]) -> Result<()> {
    for (index, &value) in lambdas.iter().enumerate() {
        if !(value >= 0.0) || !value.is_finite() {
            return Err(UcaError::NegativeLambda { index, value });
        }
    }
    Ok(())
}

/// Either standardized samples or a bare covariance matrix. Product-SVD
/// backends need samples; the dense backend accepts both.
#[derive(Debug, Clone)]
pub enum DataSource {
    Samples(StandardizedMatrix),
    Covariance(CovarianceMatrix),
}

impl DataSource {
    pub fn dim(&self) -> usize {
        match self {
            DataSource::Samples(s) => s.ncols(),
            DataSource::Covariance(c) => c.dim(),
        }
    }

    pub fn covariance(&self) -> CovarianceMatrix {
        match self {
            DataSource::Samples(s) => covariance(s),
            DataSource::Covariance(c) => c.clone(),
        }
    }

    pub fn samples(&self) -> Option<&StandardizedMatrix> {
        match self {
            DataSource::Samples(s) => Some(s),
            DataSource::Covariance(_) => None,
        }
    }

    pub fn n_samples(&self) -> Option<usize> {
        self.samples().map(|s| s.nrows())
    }

    pub fn standardization(&self) -> Option<&Standardization> {
        self.samples().map(|s| s.standardization())
    }

    pub fn feature_names(&self) -> Option<&[String]> {
        self.samples().and_then(|s| s.feature_names())
    }
}

impl From<StandardizedMatrix> for DataSource {
    fn from(s: StandardizedMatrix) -> Self {
        DataSource::Samples(s)
    }
}

impl From<CovarianceMatrix> for DataSource {
    fn from(c: CovarianceMatrix) -> Self {
        DataSource::Covariance(c)
    }
}
