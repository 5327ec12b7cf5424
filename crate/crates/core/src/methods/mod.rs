//! PCA, cPCA, cPCA++ and UCA behind one fit/transform contract.

mod fit;

use std::fmt;
use std::sync::{Arc, OnceLock};

use nalgebra::DMatrix;

pub use fit::{fit_cpca, fit_cpcapp, fit_pca, fit_uca, DEGENERATE_PAIR_GAP};

use crate::dual::{KktReport, SolverOptions};
use crate::engines::BackendSelection;
use crate::error::{Result, UcaError};
use crate::linalg::{DataSource, RawMatrix, Standardization};

/// Solver outcome attached to a UCA model.
#[derive(Debug, Clone)]
pub struct UcaDiagnostics {
    pub converged: bool,
    pub dual_value: f64,
    pub evaluations: usize,
    pub sweeps: usize,
    pub eigenvector_resolved: bool,
    pub kkt: KktReport,
}

#[derive(Debug, Clone)]
pub struct FittedModel {
    pub method: String,
    /// p × k, one component per column.
    pub components: DMatrix<f64>,
    pub eigenvalues: Vec<f64>,
    /// Multipliers: empty for pca and cpcapp, given for cpca, solved for uca.
    pub lambdas: Vec<f64>,
    pub feature_names: Option<Vec<String>>,
    /// Target standardization, reused by [`transform`].
    pub standardization: Option<Standardization>,
    pub background_standardizations: Vec<Option<Standardization>>,
    /// `constraint_values[i][j] = v_iᵀ B_j v_i`.
    pub constraint_values: Vec<Vec<f64>>,
    pub diagnostics: Option<UcaDiagnostics>,
    pub backend: String,
    pub warnings: Vec<String>,
    /// Adjacent component pairs `(i, i+1)` with (near-)equal eigenvalues.
    pub degenerate_pairs: Vec<(usize, usize)>,
}

impl FittedModel {
    pub fn k(&self) -> usize {
        self.components.ncols()
    }

    pub fn dim(&self) -> usize {
        self.components.nrows()
    }

    pub fn converged(&self) -> bool {
        self.diagnostics.as_ref().map_or(true, |d| d.converged)
    }

    /// Scores of already standardized rows.
    pub fn project(&self, standardized: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if standardized.ncols() != self.dim() {
            return Err(UcaError::mismatch(
                self.dim(),
                standardized.ncols(),
                "features",
            ));
        }
        Ok(standardized * &self.components)
    }
}

/// Applies the model's stored standardization, then projects.
pub fn transform(model: &FittedModel, data: &RawMatrix) -> Result<DMatrix<f64>> {
    if data.ncols() != model.dim() {
        return Err(UcaError::mismatch(model.dim(), data.ncols(), "features"));
    }
    match &model.standardization {
        Some(s) => model.project(&s.apply(data.values())?),
        None => model.project(data.values()),
    }
}

/// Datasets for a fit.
#[derive(Debug, Clone)]
pub struct FitData {
    pub target: DataSource,
    pub backgrounds: Vec<DataSource>,
}

impl FitData {
    pub fn new(target: impl Into<DataSource>, backgrounds: Vec<DataSource>) -> Self {
        FitData {
            target: target.into(),
            backgrounds,
        }
    }

    fn single_background(&self, method: &str) -> Result<&DataSource> {
        match self.backgrounds.as_slice() {
            [b] => Ok(b),
            other => Err(UcaError::InvalidInput(format!(
                "{method} takes exactly one background, got {}",
                other.len()
            ))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct FitConfig {
    pub k: usize,
    /// cPCA contrast parameters, one model per value.
    pub lambdas: Vec<f64>,
    pub backend: BackendSelection,
    pub solver: SolverOptions,
    /// Relative eigenvalue cutoff for the cPCA++ whitening.
    pub rank_tolerance: f64,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            k: 2,
            lambdas: Vec::new(),
            backend: BackendSelection::Auto,
            solver: SolverOptions::default(),
            rank_tolerance: 1e-10,
        }
    }
}

/// A named fitting method. Returns one model, except cPCA which returns
/// one per contrast parameter.
pub trait Method: Send + Sync {
    fn name(&self) -> &'static str;

    fn fit(&self, data: &FitData, config: &FitConfig) -> Result<Vec<FittedModel>>;
}

struct Pca;
struct Cpca;
struct CpcaPlusPlus;
struct Uca;

impl Method for Pca {
    fn name(&self) -> &'static str {
        "pca"
    }

    fn fit(&self, data: &FitData, config: &FitConfig) -> Result<Vec<FittedModel>> {
        Ok(vec![fit_pca(&data.target, config.k, &config.backend)?])
    }
}

impl Method for Cpca {
    fn name(&self) -> &'static str {
        "cpca"
    }

    fn fit(&self, data: &FitData, config: &FitConfig) -> Result<Vec<FittedModel>> {
        let b = data.single_background("cpca")?;
        if config.lambdas.is_empty() {
            return Err(UcaError::InvalidInput(
                "cpca needs at least one lambda".into(),
            ));
        }
        fit_cpca(&data.target, b, &config.lambdas, config.k, &config.backend)
    }
}

impl Method for CpcaPlusPlus {
    fn name(&self) -> &'static str {
        "cpcapp"
    }

    fn fit(&self, data: &FitData, config: &FitConfig) -> Result<Vec<FittedModel>> {
        let b = data.single_background("cpcapp")?;
        Ok(vec![fit_cpcapp(
            &data.target,
            b,
            config.k,
            config.rank_tolerance,
        )?])
    }
}

impl Method for Uca {
    fn name(&self) -> &'static str {
        "uca"
    }

    fn fit(&self, data: &FitData, config: &FitConfig) -> Result<Vec<FittedModel>> {
        Ok(vec![fit_uca(
            &data.target,
            &data.backgrounds,
            config.k,
            &config.backend,
            &config.solver,
        )?])
    }
}

/// Name-keyed collection of fitting methods.
#[derive(Clone, Default)]
pub struct MethodRegistry {
    methods: Vec<Arc<dyn Method>>,
}

impl fmt::Debug for MethodRegistry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.names()).finish()
    }
}

impl MethodRegistry {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn with_builtin() -> Self {
        let mut r = Self::empty();
        r.register(Arc::new(Pca));
        r.register(Arc::new(Cpca));
        r.register(Arc::new(CpcaPlusPlus));
        r.register(Arc::new(Uca));
        r
    }

    pub fn builtin() -> &'static MethodRegistry {
        static REGISTRY: OnceLock<MethodRegistry> = OnceLock::new();
        REGISTRY.get_or_init(MethodRegistry::with_builtin)
    }

    pub fn register(&mut self, method: Arc<dyn Method>) {
        self.methods.retain(|m| m.name() != method.name());
        self.methods.push(method);
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.methods.iter().map(|m| m.name()).collect()
    }

    pub fn get(&self, name: &str) -> Result<Arc<dyn Method>> {
        let key = name.trim().to_ascii_lowercase();
        self.methods
            .iter()
            .find(|m| m.name() == key)
            .cloned()
            .ok_or_else(|| UcaError::UnknownStrategy {
                kind: "method",
                name: name.to_string(),
            })
    }
}
