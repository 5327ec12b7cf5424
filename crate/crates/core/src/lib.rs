//! Unique component analysis (UCA) and contrastive PCA baselines.
//!
//! UCA looks for directions that carry a lot of variance in a target dataset
//! while explaining at most unit variance in each of one or more standardized
//! background datasets. The Lagrange multipliers of those ceilings are solved
//! for automatically through the dual function
//! `g(λ) = λ_max(A − Σ λ_j B_j) + Σ λ_j`, so no contrast parameter has to be tuned.
//!
//! The crate is organised in layers:
//!
//! * [`linalg`]: standardization, covariance, dense and factored assembly of
//!   the contrastive operator `C_λ = A − Σ λ_j B_j`.
//! * [`engines`]: interchangeable spectral backends (dense eigendecomposition
//!   and the covariance-free product SVD) behind the [`engines::SpectralEngine`]
//!   trait, selected by name through an [`engines::EngineRegistry`].
//! * [`dual`]: the dual function, its gradient, the single- and
//!   multi-background solvers and KKT diagnostics.
//! * [`methods`]: PCA, cPCA, cPCA++ and UCA behind a common [`methods::Method`]
//!   trait with a uniform components-and-scores contract.

pub mod dual;
pub mod engines;
pub mod error;
pub mod linalg;
pub mod methods;

pub use dual::{ContrastiveProblem, DualSolution, KktReport, SolverOptions};
pub use engines::{BackendSelection, EigenSolution, EngineRegistry, SpectralEngine};
pub use error::{Result, UcaError};
pub use linalg::{
    CovarianceMatrix, DataSource, FactoredOperator, RawMatrix, Standardization, StandardizedMatrix,
    ZeroVariancePolicy,
};
pub use methods::{FitConfig, FitData, FittedModel, Method, MethodRegistry};
