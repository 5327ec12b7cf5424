use nalgebra::{DMatrix, DVector};

use super::{FittedModel, UcaDiagnostics};
use crate::dual::{kkt_report, solve_prepared, ContrastiveProblem, SolverOptions};
use crate::engines::{
    check_k, normalize_columns, normalize_sign, BackendSelection, EigenSolution, EngineRegistry,
    PreparedOperator,
};
use crate::error::{Result, UcaError};
use crate::linalg::decomp::symmetric_eigen;
use crate::linalg::{check_lambdas, DataSource};

/// Relative gap under which adjacent eigenvalues are reported as a
/// degenerate pair.
pub const DEGENERATE_PAIR_GAP: f64 = 1e-6;

/// Relative width of the eigenvalue cluster treated as one eigenspace when
/// placing the solved UCA direction first.
const CLUSTER_TOL: f64 = 1e-4;

fn prepare(
    target: &DataSource,
    backgrounds: &[DataSource],
    backend: &BackendSelection,
) -> Result<Box<dyn PreparedOperator>> {
    EngineRegistry::builtin()
        .resolve(backend, target, backgrounds)?
        .prepare(target, backgrounds)
}

fn degenerate_pairs(eigenvalues: &[f64]) -> Vec<(usize, usize)> {
    eigenvalues
        .windows(2)
        .enumerate()
        .filter(|(_, w)| w[0] - w[1] < DEGENERATE_PAIR_GAP * w[0].abs().max(1.0))
        .map(|(i, _)| (i, i + 1))
        .collect()
}

fn constraint_values(op: &dyn PreparedOperator, components: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..components.ncols())
        .map(|i| {
            let v = components.column(i).into_owned();
            (0..op.n_backgrounds())
                .map(|j| op.background_form(j, &v))
                .collect()
        })
        .collect()
}

fn model(
    method: &str,
    target: &DataSource,
    backgrounds: &[DataSource],
    components: DMatrix<f64>,
    eigenvalues: Vec<f64>,
    lambdas: Vec<f64>,
    backend: &str,
) -> FittedModel {
    FittedModel {
        method: method.to_string(),
        degenerate_pairs: degenerate_pairs(&eigenvalues),
        components,
        eigenvalues,
        lambdas,
        feature_names: target.feature_names().map(|n| n.to_vec()),
        standardization: target.standardization().cloned(),
        background_standardizations: backgrounds
            .iter()
            .map(|b| b.standardization().cloned())
            .collect(),
        constraint_values: Vec::new(),
        diagnostics: None,
        backend: backend.to_string(),
        warnings: Vec::new(),
    }
}

/// Top-k eigenpairs of the target covariance.
pub fn fit_pca(target: &DataSource, k: usize, backend: &BackendSelection) -> Result<FittedModel> {
    let mut op = prepare(target, &[], backend)?;
    check_k(k, op.max_pairs())?;
    let sol = op.top_eigenpairs(&[], k)?;
    Ok(model(
        "pca",
        target,
        &[],
        sol.eigenvectors,
        sol.eigenvalues,
        Vec::new(),
        op.engine(),
    ))
}

/// Top-k eigenpairs of `A − λB`, one model per `λ`.
pub fn fit_cpca(
    target: &DataSource,
    background: &DataSource,
    lambdas: &[f64],
    k: usize,
    backend: &BackendSelection,
) -> Result<Vec<FittedModel>> {
    check_lambdas(lambdas)?;
    let backgrounds = std::slice::from_ref(background);
    let mut op = prepare(target, backgrounds, backend)?;
    check_k(k, op.max_pairs())?;
    lambdas
        .iter()
        .map(|&l| {
            let sol = op.top_eigenpairs(&[l], k)?;
            let mut m = model(
                "cpca",
                target,
                backgrounds,
                sol.eigenvectors,
                sol.eigenvalues,
                vec![l],
                op.engine(),
            );
            m.constraint_values = constraint_values(op.as_ref(), &m.components);
            Ok(m)
        })
        .collect()
}

/// Generalized eigenvectors of `(A, B)` by whitening `B` on its numerical
/// range. Components are scaled to `vᵀBv = 1`.
pub fn fit_cpcapp(
    target: &DataSource,
    background: &DataSource,
    k: usize,
    rank_tolerance: f64,
) -> Result<FittedModel> {
    let p = target.dim();
    if background.dim() != p {
        return Err(UcaError::mismatch(
            p,
            background.dim(),
            "background features",
        ));
    }
    if !(rank_tolerance > 0.0) {
        return Err(UcaError::InvalidInput(
            "rank tolerance must be positive".into(),
        ));
    }
    let a = target.covariance();
    let b = background.covariance();
    let eig = symmetric_eigen(b.values());
    let top = eig.values[0];
    if !(top > 1e-300) || b.values().amax() == 0.0 {
        return Err(UcaError::Numeric(
            "background covariance is numerically zero".into(),
        ));
    }
    let kept: Vec<usize> = (0..p)
        .filter(|&i| eig.values[i] > rank_tolerance * top)
        .collect();
    let r = kept.len();
    check_k(k, r)?;
    let mut w = DMatrix::zeros(p, r);
    for (dst, &src) in kept.iter().enumerate() {
        w.set_column(dst, &(eig.vectors.column(src) / eig.values[src].sqrt()));
    }
    let mut whitened = w.transpose() * a.values() * &w;
    whitened = (&whitened + whitened.transpose()) * 0.5;
    let inner = symmetric_eigen(&whitened);
    let mut components = &w * inner.vectors.columns(0, k);
    for mut col in components.column_iter_mut() {
        normalize_sign(col.as_mut_slice());
    }
    let eigenvalues = inner.values[..k].to_vec();
    let backgrounds = std::slice::from_ref(background);
    let mut m = model(
        "cpcapp",
        target,
        backgrounds,
        components,
        eigenvalues,
        Vec::new(),
        "dense",
    );
    m.constraint_values = (0..k)
        .map(|i| vec![b.quadratic_form(&m.components.column(i).into_owned())])
        .collect();
    if r < p {
        m.warnings.push(format!(
            "background covariance has numerical rank {r} < {p}; solved within its range"
        ));
    }
    Ok(m)
}

/// Solves the dual for the multipliers, then takes the top-k eigenvectors of
/// `A − Σ λ̂_j B_j`. Only components with nonnegative eigenvalues are kept
/// (at least one).
pub fn fit_uca(
    target: &DataSource,
    backgrounds: &[DataSource],
    k: usize,
    backend: &BackendSelection,
    options: &SolverOptions,
) -> Result<FittedModel> {
    if backgrounds.is_empty() {
        return Err(UcaError::InvalidInput(
            "uca needs at least one background".into(),
        ));
    }
    let problem = ContrastiveProblem::new(target.clone(), backgrounds.to_vec(), backend.clone())?;
    let mut op = problem.prepare()?;
    check_k(k, op.max_pairs())?;
    let solution = solve_prepared(op.as_mut(), options)?;
    let lambdas = solution.lambdas.clone();

    let want = (k + 8).min(op.max_pairs());
    let mut sol = op.top_eigenpairs(&lambdas, want)?;
    if solution.eigenvector_resolved {
        place_first(op.as_ref(), &lambdas, &mut sol, &solution.top_eigenvector);
    }

    let scale = sol.eigenvalues[0].abs().max(1.0);
    let nonneg = sol.eigenvalues[..k]
        .iter()
        .take_while(|&&e| e >= -1e-12 * scale)
        .count()
        .max(1);
    let components = sol.eigenvectors.columns(0, nonneg).into_owned();
    let eigenvalues = sol.eigenvalues[..nonneg].to_vec();

    let mut m = model(
        "uca",
        target,
        backgrounds,
        components,
        eigenvalues,
        lambdas,
        op.engine(),
    );
    m.constraint_values = constraint_values(op.as_ref(), &m.components);
    if nonneg < k {
        m.warnings.push(format!(
            "only {nonneg} of {k} requested components have nonnegative eigenvalues"
        ));
    }
    if !solution.converged {
        m.warnings.push("dual solver did not converge".into());
    }
    if solution.degenerate {
        m.warnings
            .push("degenerate optimum; top eigenvector not unique".into());
    }
    let kkt = kkt_report(&problem, &solution);
    m.diagnostics = Some(UcaDiagnostics {
        converged: solution.converged,
        dual_value: solution.dual_value,
        evaluations: solution.evaluations,
        sweeps: solution.sweeps,
        eigenvector_resolved: solution.eigenvector_resolved,
        kkt,
    });
    Ok(m)
}

/// Rotates the leading eigenvalue cluster of `sol` so that its first
/// column is `v` (which must lie in the cluster's span).
fn place_first(
    op: &dyn PreparedOperator,
    lambdas: &[f64],
    sol: &mut EigenSolution,
    v: &DVector<f64>,
) {
    let mu = sol.eigenvalues[0];
    let d = sol
        .eigenvalues
        .iter()
        .take_while(|&&e| mu - e <= CLUSTER_TOL * mu.abs().max(1.0))
        .count();
    if d < 2 {
        return;
    }
    let w = sol.eigenvectors.columns(0, d).into_owned();
    let mut c = w.tr_mul(v);
    let norm = c.norm();
    if norm < 0.5 {
        log::warn!("solved direction lies outside the top eigenspace; leaving it unplaced");
        return;
    }
    c /= norm;
    // Householder reflector H with H e₁ = c.
    let mut u = c.clone();
    u[0] -= 1.0;
    let uu = u.norm_squared();
    let h = if uu < 1e-30 {
        DMatrix::identity(d, d)
    } else {
        DMatrix::identity(d, d) - (&u * u.transpose()) * (2.0 / uu)
    };
    let mut rotated = &w * h;
    normalize_columns(&mut rotated);
    for i in 0..d {
        let col = rotated.column(i).into_owned();
        sol.eigenvalues[i] = op.apply(lambdas, &col).dot(&col);
        sol.eigenvectors.set_column(i, &col);
    }
}
