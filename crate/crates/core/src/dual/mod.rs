//! The UCA dual: `g(λ) = λ_max(A − Σ λ_j B_j) + Σ λ_j`, minimized over
//! `λ ≥ 0`.
//!
//! `g` is a pointwise supremum of functions affine in `λ`, hence convex, and
//! its (sub)gradient is `1 − v̂ᵀB_j v̂` for a unit top eigenvector `v̂`. One
//! background is handled by a bracketing 1-D search; several backgrounds by
//! cyclic coordinate descent over the same 1-D search, with a joint
//! steepest-descent step whenever a sweep ends on an eigenvalue crossing.

mod degenerate;
mod joint;
mod kkt;
mod scalar;

use nalgebra::DVector;

pub use kkt::{brute_force_primal, kkt_report, KktReport};

use crate::engines::{BackendSelection, EngineRegistry, PreparedOperator};
use crate::error::{Result, UcaError};
use crate::linalg::{check_lambdas, DataSource};

/// Relative eigen-gap under which the top eigenvector is not unique.
pub const DEGENERATE_GAP: f64 = 1e-6;

/// Tolerance on `v̂ᵀB_j v̂ − 1` and on complementary slackness.
pub const FEASIBILITY_TOL: f64 = 1e-4;

/// Target and background datasets plus the backend that will evaluate
/// `λ_max`.
#[derive(Debug, Clone)]
pub struct ContrastiveProblem {
    target: DataSource,
    backgrounds: Vec<DataSource>,
    backend: BackendSelection,
}

impl ContrastiveProblem {
    pub fn new(
        target: impl Into<DataSource>,
        backgrounds: Vec<DataSource>,
        backend: BackendSelection,
    ) -> Result<Self> {
        let target = target.into();
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
        Ok(ContrastiveProblem {
            target,
            backgrounds,
            backend,
        })
    }

    pub fn target(&self) -> &DataSource {
        &self.target
    }

    pub fn backgrounds(&self) -> &[DataSource] {
        &self.backgrounds
    }

    pub fn backend(&self) -> &BackendSelection {
        &self.backend
    }

    pub fn dim(&self) -> usize {
        self.target.dim()
    }

    pub fn n_backgrounds(&self) -> usize {
        self.backgrounds.len()
    }

    /// Binds the problem to a backend from the built-in registry.
    pub fn prepare(&self) -> Result<Box<dyn PreparedOperator>> {
        self.prepare_with(EngineRegistry::builtin())
    }

    pub fn prepare_with(&self, registry: &EngineRegistry) -> Result<Box<dyn PreparedOperator>> {
        let engine = registry.resolve(&self.backend, &self.target, &self.backgrounds)?;
        engine.prepare(&self.target, &self.backgrounds)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverOptions {
    /// Stop when `|dg/dλ_j| ≤ tol_grad`.
    pub tol_grad: f64,
    /// Stop when the best value is within `tol_value · max(1, |g|)` of a
    /// certified lower bound.
    pub tol_value: f64,
    /// Function evaluations per 1-D solve.
    pub max_iter: usize,
    pub cd_tol_lambda: f64,
    pub cd_tol_value: f64,
    pub max_sweeps: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            tol_grad: 1e-6,
            tol_value: 1e-10,
            max_iter: 200,
            cd_tol_lambda: 1e-6,
            cd_tol_value: 1e-8,
            max_sweeps: 100,
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(UcaError::InvalidInput(format!("{what} must be positive")));
        if !(self.tol_grad > 0.0) {
            return bad("tol_grad");
        }
        if !(self.tol_value > 0.0) {
            return bad("tol_value");
        }
        if self.max_iter == 0 {
            return bad("max_iter");
        }
        if self.max_sweeps == 0 {
            return bad("max_sweeps");
        }
        Ok(())
    }
}

/// One evaluation of the dual.
#[derive(Debug, Clone)]
pub struct DualPoint {
    pub lambdas: Vec<f64>,
    pub value: f64,
    pub gradient: Vec<f64>,
    /// Top (and, when available, second) eigenvalue of `A − Σ λ_j B_j`.
    pub eigenvalues: Vec<f64>,
    pub eigenvector: DVector<f64>,
    /// `v̂ᵀB_j v̂`.
    pub constraint_values: Vec<f64>,
}

impl DualPoint {
    pub fn top_eigenvalue(&self) -> f64 {
        self.eigenvalues[0]
    }

    pub fn eigen_gap(&self) -> f64 {
        match self.eigenvalues.as_slice() {
            [a, b, ..] => a - b,
            _ => f64::INFINITY,
        }
    }

    pub fn is_degenerate(&self) -> bool {
        self.eigen_gap() < DEGENERATE_GAP * self.top_eigenvalue().abs().max(1.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceEntry {
    pub lambdas: Vec<f64>,
    pub value: f64,
    pub gradient: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct DualSolution {
    pub lambdas: Vec<f64>,
    pub dual_value: f64,
    pub top_eigenvalue: f64,
    pub top_eigenvector: DVector<f64>,
    pub eigen_gap: f64,
    pub constraint_values: Vec<f64>,
    /// `|λ̂_j (v̂ᵀB_j v̂ − 1)|`.
    pub slackness: Vec<f64>,
    pub degenerate: bool,
    /// Whether `v̂` was rotated inside a degenerate top eigenspace.
    pub eigenvector_resolved: bool,
    pub trace: Vec<TraceEntry>,
    pub evaluations: usize,
    pub sweeps: usize,
    pub converged: bool,
    pub backend: &'static str,
}

impl DualSolution {
    pub fn max_slackness(&self) -> f64 {
        self.slackness.iter().cloned().fold(0.0, f64::max)
    }
}

/// Evaluates `g` and its gradient on a prepared operator, logging each call.
pub(crate) struct Evaluator<'a> {
    pub op: &'a mut dyn PreparedOperator,
    pub trace: Vec<TraceEntry>,
}

impl<'a> Evaluator<'a> {
    pub fn new(op: &'a mut dyn PreparedOperator) -> Self {
        Evaluator {
            op,
            trace: Vec::new(),
        }
    }

    pub fn evaluate(&mut self, lambdas: &[f64]) -> Result<DualPoint> {
        let point = evaluate_point(self.op, lambdas)?;
        self.trace.push(TraceEntry {
            lambdas: point.lambdas.clone(),
            value: point.value,
            gradient: point.gradient.clone(),
        });
        Ok(point)
    }

    pub fn evaluations(&self) -> usize {
        self.trace.len()
    }
}

fn evaluate_point(op: &mut dyn PreparedOperator, lambdas: &[f64]) -> Result<DualPoint> {
    if lambdas.len() != op.n_backgrounds() {
        return Err(UcaError::mismatch(
            op.n_backgrounds(),
            lambdas.len(),
            "multipliers",
        ));
    }
    check_lambdas(lambdas)?;
    let k = op.max_pairs().min(2);
    let sol = op.top_eigenpairs(lambdas, k)?;
    let v = sol.vector(0);
    let constraint_values: Vec<f64> = (0..lambdas.len())
        .map(|j| op.background_form(j, &v))
        .collect();
    let value = sol.eigenvalues[0] + lambdas.iter().sum::<f64>();
    if !value.is_finite() {
        return Err(UcaError::Numeric(format!(
            "dual value is {value} at {lambdas:?}"
        )));
    }
    Ok(DualPoint {
        lambdas: lambdas.to_vec(),
        value,
        gradient: constraint_values.iter().map(|c| 1.0 - c).collect(),
        eigenvalues: sol.eigenvalues,
        eigenvector: v,
        constraint_values,
    })
}

/// `g(λ)`, `∇g(λ)` and the top eigenpair.
pub fn dual_value_and_gradient(problem: &ContrastiveProblem, lambdas: &[f64]) -> Result<DualPoint> {
    let mut op = problem.prepare()?;
    evaluate_point(op.as_mut(), lambdas)
}

/// Solves a single-background problem.
pub fn solve_single(problem: &ContrastiveProblem, options: &SolverOptions) -> Result<DualSolution> {
    if problem.n_backgrounds() != 1 {
        return Err(UcaError::InvalidInput(format!(
            "single-background solve needs exactly one background, got {}",
            problem.n_backgrounds()
        )));
    }
    let mut op = problem.prepare()?;
    solve_prepared(op.as_mut(), options)
}

/// Solves a problem with two or more backgrounds by coordinate descent.
pub fn solve_multi(problem: &ContrastiveProblem, options: &SolverOptions) -> Result<DualSolution> {
    if problem.n_backgrounds() < 2 {
        return Err(UcaError::InvalidInput(format!(
            "coordinate descent needs at least two backgrounds, got {}",
            problem.n_backgrounds()
        )));
    }
    let mut op = problem.prepare()?;
    solve_prepared(op.as_mut(), options)
}

/// Dispatches on the number of backgrounds.
pub fn solve(problem: &ContrastiveProblem, options: &SolverOptions) -> Result<DualSolution> {
    let mut op = problem.prepare()?;
    solve_prepared(op.as_mut(), options)
}

/// Solves on an already prepared operator.
pub fn solve_prepared(
    op: &mut dyn PreparedOperator,
    options: &SolverOptions,
) -> Result<DualSolution> {
    options.validate()?;
    let m = op.n_backgrounds();
    if m == 0 {
        return Err(UcaError::InvalidInput(
            "UCA needs at least one background".into(),
        ));
    }
    let backend = op.engine();
    let mut ev = Evaluator::new(op);
    let mut point = ev.evaluate(&vec![0.0; m])?;
    let mut converged;
    let mut sweeps = 0;

    if m == 1 {
        let out = scalar::minimize_coordinate(&mut ev, point, 0, options)?;
        point = out.point;
        converged = out.converged;
        sweeps = 1;
    } else {
        converged = false;
        let mut prev_value = point.value;
        while sweeps < options.max_sweeps {
            sweeps += 1;
            let before = point.lambdas.clone();
            let mut all_inner = true;
            for j in 0..m {
                let out = scalar::minimize_coordinate(&mut ev, point, j, options)?;
                point = out.point;
                all_inner &= out.converged;
            }
            // Coordinate moves cannot leave a kink that only a joint move
            // descends from.
            if point.eigen_gap() <= degenerate::CLUSTER_TOL * point.top_eigenvalue().abs().max(1.0)
            {
                if let Some(out) = joint::step(&mut ev, &point, options)? {
                    if out.point.value < point.value {
                        point = out.point;
                    }
                }
            }
            let dl = before
                .iter()
                .zip(&point.lambdas)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            let dg = (prev_value - point.value).abs();
            prev_value = point.value;
            log::debug!(
                "sweep {sweeps}: g = {:.12}, max |Δλ| = {dl:.3e}",
                point.value
            );
            if dl <= options.cd_tol_lambda && dg <= options.cd_tol_value {
                converged = all_inner;
                break;
            }
        }
    }

    let eigenvector_resolved = degenerate::resolve(&mut ev, &mut point)?;
    let degenerate = point.is_degenerate();
    let slackness = point
        .lambdas
        .iter()
        .zip(&point.constraint_values)
        .map(|(l, c)| (l * (c - 1.0)).abs())
        .collect();
    let evaluations = ev.evaluations();
    Ok(DualSolution {
        dual_value: point.value,
        top_eigenvalue: point.top_eigenvalue(),
        eigen_gap: point.eigen_gap(),
        lambdas: point.lambdas,
        top_eigenvector: point.eigenvector,
        constraint_values: point.constraint_values,
        slackness,
        degenerate,
        eigenvector_resolved,
        trace: ev.trace,
        evaluations,
        sweeps,
        converged,
        backend,
    })
}
