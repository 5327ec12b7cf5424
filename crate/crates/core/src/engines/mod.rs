//! Spectral backends for the contrastive operator.
//!
//! Every backend answers the same question (top-k signed eigenpairs of
//! `A − Σ λ_j B_j`) and is selected by name at runtime. A backend first
//! *prepares* an operator from the datasets (covariances for `dense`, the
//! cached right-factor SVD for `product-svd`) and the solver then queries
//! the prepared operator at as many multiplier vectors as it needs.

mod dense;
mod lanczos;
mod product_svd;

use std::fmt;
use std::str::FromStr;
use std::sync::{Arc, OnceLock};

use nalgebra::{DMatrix, DVector};

pub use dense::{top_eigenpairs_dense, DenseEngine, FULL_DECOMPOSITION_LIMIT};
pub use product_svd::{
    precompute_right, product_svd_largest_buffer, top_eigenpairs_product_svd, ProductSvdEngine,
    RightFactorSvd,
};

use crate::error::{Result, UcaError};
use crate::linalg::decomp::symmetric_eigenvalues;
use crate::linalg::DataSource;

/// Top-k eigenpairs of a symmetric operator, eigenvalues in descending
/// (signed) order.
#[derive(Debug, Clone)]
pub struct EigenSolution {
    pub eigenvalues: Vec<f64>,
    /// p × k, unit columns, largest-magnitude entry of each column positive.
    pub eigenvectors: DMatrix<f64>,
    pub backend: &'static str,
    pub residual_norms: Vec<f64>,
}

impl EigenSolution {
    pub fn k(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn vector(&self, i: usize) -> DVector<f64> {
        self.eigenvectors.column(i).into_owned()
    }

    /// Gap between the first and second eigenvalue, infinite when only one
    /// pair is available.
    pub fn top_gap(&self) -> f64 {
        match self.eigenvalues.as_slice() {
            [a, b, ..] => a - b,
            _ => f64::INFINITY,
        }
    }
}

/// Flips `v` so that its largest-magnitude entry is positive. Entries within
/// a relative 1e-8 of the maximum count as ties and the first one wins, so
/// both backends agree on vectors like (1, −1)/√2.
pub fn normalize_sign(v: &mut [f64]) {
    let max = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if max == 0.0 {
        return;
    }
    let lead = v
        .iter()
        .position(|x| x.abs() >= max * (1.0 - 1e-8))
        .unwrap_or(0);
    if v[lead] < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

pub(crate) fn normalize_columns(m: &mut DMatrix<f64>) {
    let p = m.nrows();
    if p == 0 {
        return;
    }
    for col in m.as_mut_slice().chunks_exact_mut(p) {
        normalize_sign(col);
    }
}

pub(crate) fn check_k(k: usize, available: usize) -> Result<()> {
    if k == 0 || k > available {
        return Err(UcaError::RankOutOfRange {
            requested: k,
            available,
        });
    }
    Ok(())
}

/// A contrastive operator bound to concrete datasets, queried at varying
/// multipliers.
pub trait PreparedOperator: Send {
    fn engine(&self) -> &'static str;

    fn dim(&self) -> usize;

    fn n_backgrounds(&self) -> usize;

    /// Largest `k` accepted by [`PreparedOperator::top_eigenpairs`].
    fn max_pairs(&self) -> usize;

    fn top_eigenpairs(&mut self, lambdas: &[f64], k: usize) -> Result<EigenSolution>;

    /// `C_λ v`.
    fn apply(&self, lambdas: &[f64], v: &DVector<f64>) -> DVector<f64>;

    /// `vᵀ A v`.
    fn target_form(&self, v: &DVector<f64>) -> f64;

    /// `vᵀ B_j v`.
    fn background_form(&self, j: usize, v: &DVector<f64>) -> f64;

    /// Smallest positive eigenvalue of `B_j` (relative cutoff 1e-12), or 0
    /// when `B_j` vanishes.
    fn background_floor(&self, j: usize) -> f64;
}

/// A named spectral backend.
pub trait SpectralEngine: Send + Sync {
    fn name(&self) -> &'static str;

    /// Whether this backend can work from the given datasets.
    fn supports(&self, target: &DataSource, backgrounds: &[DataSource]) -> bool;

    fn prepare(
        &self,
        target: &DataSource,
        backgrounds: &[DataSource],
    ) -> Result<Box<dyn PreparedOperator>>;
}

/// Backend choice as given by a user: a registered name or `auto`.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub enum BackendSelection {
    #[default]
    Auto,
    Named(String),
}

impl BackendSelection {
    pub fn dense() -> Self {
        BackendSelection::Named(DenseEngine::NAME.to_string())
    }

    pub fn product_svd() -> Self {
        BackendSelection::Named(ProductSvdEngine::NAME.to_string())
    }
}

impl FromStr for BackendSelection {
    type Err = UcaError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "" => Err(UcaError::InvalidInput("empty backend name".into())),
            "auto" => Ok(BackendSelection::Auto),
            name => Ok(BackendSelection::Named(name.to_ascii_lowercase())),
        }
    }
}

impl fmt::Display for BackendSelection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BackendSelection::Auto => f.write_str("auto"),
            BackendSelection::Named(n) => f.write_str(n),
        }
    }
}

/// Name-keyed collection of spectral backends.
#[derive(Clone, Default)]
pub struct EngineRegistry {
    engines: Vec<Arc<dyn SpectralEngine>>,
}

impl fmt::Debug for EngineRegistry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.names()).finish()
    }
}

impl EngineRegistry {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn with_builtin() -> Self {
        let mut r = Self::empty();
        r.register(Arc::new(DenseEngine));
        r.register(Arc::new(ProductSvdEngine));
        r
    }

    /// Process-wide registry holding the built-in backends.
    pub fn builtin() -> &'static EngineRegistry {
        static REGISTRY: OnceLock<EngineRegistry> = OnceLock::new();
        REGISTRY.get_or_init(EngineRegistry::with_builtin)
    }

    /// Adds a backend, replacing any existing one with the same name.
    pub fn register(&mut self, engine: Arc<dyn SpectralEngine>) {
        self.engines.retain(|e| e.name() != engine.name());
        self.engines.push(engine);
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.engines.iter().map(|e| e.name()).collect()
    }

    pub fn get(&self, name: &str) -> Result<Arc<dyn SpectralEngine>> {
        self.engines
            .iter()
            .find(|e| e.name() == name)
            .cloned()
            .ok_or_else(|| UcaError::UnknownStrategy {
                kind: "backend",
                name: name.to_string(),
            })
    }

    /// Resolves a selection against concrete datasets. `auto` picks
    /// `product-svd` when every dataset carries samples and p exceeds the
    /// total sample count, `dense` otherwise.
    pub fn resolve(
        &self,
        selection: &BackendSelection,
        target: &DataSource,
        backgrounds: &[DataSource],
    ) -> Result<Arc<dyn SpectralEngine>> {
        let engine = match selection {
            BackendSelection::Named(name) => self.get(name)?,
            BackendSelection::Auto => {
                let n_total: Option<usize> = std::iter::once(target)
                    .chain(backgrounds)
                    .map(|d| d.n_samples())
                    .sum();
                match n_total {
                    Some(n) if target.dim() > n => self.get(ProductSvdEngine::NAME)?,
                    _ => self.get(DenseEngine::NAME)?,
                }
            }
        };
        if !engine.supports(target, backgrounds) {
            return Err(UcaError::InvalidInput(format!(
                "backend `{}` cannot run on these inputs (product-svd needs sample matrices)",
                engine.name()
            )));
        }
        Ok(engine)
    }
}

/// Smallest eigenvalue of a PSD spectrum that exceeds `1e-12 · max`.
pub(crate) fn smallest_positive(values: impl IntoIterator<Item = f64>) -> f64 {
    let vals: Vec<f64> = values.into_iter().collect();
    let max = vals.iter().cloned().fold(0.0f64, f64::max);
    if max <= 0.0 {
        return 0.0;
    }
    vals.into_iter()
        .filter(|&v| v > 1e-12 * max)
        .fold(f64::INFINITY, f64::min)
}

/// Positive-spectrum floor of a dataset's covariance. Uses the n×n Gram
/// matrix when samples are available.
pub(crate) fn spectrum_floor(source: &DataSource) -> f64 {
    match source {
        DataSource::Samples(s) => {
            let x = s.values();
            let gram = (x * x.transpose()) / x.nrows() as f64;
            smallest_positive(symmetric_eigenvalues(&gram))
        }
        DataSource::Covariance(c) => smallest_positive(symmetric_eigenvalues(c.values())),
    }
}
