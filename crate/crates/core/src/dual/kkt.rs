//! Optimality diagnostics for a solved dual.

use nalgebra::DMatrix;

use super::{ContrastiveProblem, DualSolution, FEASIBILITY_TOL};

#[derive(Debug, Clone)]
pub struct KktReport {
    /// `v̂ᵀB_j v̂ − 1`; feasible when ≤ the tolerance.
    pub primal_residuals: Vec<f64>,
    pub primal_feasible: bool,
    pub dual_feasible: bool,
    /// `|λ̂_j (v̂ᵀB_j v̂ − 1)|`.
    pub slackness: Vec<f64>,
    pub max_slackness: f64,
    pub eigen_gap: f64,
    /// Set when the top eigenvector is not unique at the optimum.
    pub degenerate: bool,
    /// Grid-search estimate of the primal optimum (p ≤ 3 only).
    pub primal_estimate: Option<f64>,
    /// `dual value − primal estimate`.
    pub duality_gap: Option<f64>,
    pub converged: bool,
    pub notes: Vec<String>,
}

pub fn kkt_report(problem: &ContrastiveProblem, solution: &DualSolution) -> KktReport {
    let primal_residuals: Vec<f64> = solution.constraint_values.iter().map(|c| c - 1.0).collect();
    let primal_feasible = primal_residuals.iter().all(|&r| r <= FEASIBILITY_TOL);
    let dual_feasible = solution.lambdas.iter().all(|&l| l >= 0.0);
    let max_slackness = solution.max_slackness();

    let mut notes = Vec::new();
    if solution.degenerate {
        notes.push("degenerate optimum; eigenvector not unique".to_string());
    }
    if !solution.converged {
        notes.push("solver did not converge; residuals are informational".to_string());
    }

    let (primal_estimate, duality_gap) = if problem.dim() <= 3 {
        let a = problem.target().covariance().values().clone();
        let bs: Vec<DMatrix<f64>> = problem
            .backgrounds()
            .iter()
            .map(|b| b.covariance().values().clone())
            .collect();
        match brute_force_primal(&a, &bs) {
            Some(primal) => (Some(primal), Some(solution.dual_value - primal)),
            None => {
                notes.push("no feasible direction found by grid search".to_string());
                (None, None)
            }
        }
    } else {
        (None, None)
    };

    KktReport {
        primal_residuals,
        primal_feasible,
        dual_feasible,
        slackness: solution.slackness.clone(),
        max_slackness,
        eigen_gap: solution.eigen_gap,
        degenerate: solution.degenerate,
        primal_estimate,
        duality_gap,
        converged: solution.converged,
        notes,
    }
}

fn qf(m: &DMatrix<f64>, v: &[f64]) -> f64 {
    let p = v.len();
    let mut s = 0.0;
    for i in 0..p {
        for k in 0..p {
            s += v[i] * m[(i, k)] * v[k];
        }
    }
    s
}

fn direction(angles: &[f64]) -> Vec<f64> {
    match *angles {
        [] => vec![1.0],
        [t] => vec![t.cos(), t.sin()],
        [t, f] => vec![t.sin() * f.cos(), t.sin() * f.sin(), t.cos()],
        _ => unreachable!("at most two angles"),
    }
}

/// `max vᵀAv` over unit `v` with `vᵀB_j v ≤ 1`, by an angular grid plus a
/// feasible pattern search from the best grid points. Only for `p ≤ 3`;
/// `None` when no grid point is feasible.
pub fn brute_force_primal(a: &DMatrix<f64>, backgrounds: &[DMatrix<f64>]) -> Option<f64> {
    let p = a.nrows();
    let eval = |angles: &[f64]| -> Option<f64> {
        let v = direction(angles);
        backgrounds
            .iter()
            .all(|b| qf(b, &v) <= 1.0 + 1e-12)
            .then(|| qf(a, &v))
    };
    let pi = std::f64::consts::PI;
    let (grid, step): (Vec<Vec<f64>>, f64) = match p {
        1 => return eval(&[]),
        2 => {
            let n = 3200;
            let h = pi / n as f64;
            ((0..n).map(|i| vec![i as f64 * h]).collect(), h)
        }
        3 => {
            let n = 640;
            let h = pi / n as f64;
            let pts = (0..=n)
                .flat_map(|i| (0..n).map(move |k| vec![i as f64 * h, k as f64 * h]))
                .collect();
            (pts, h)
        }
        _ => return None,
    };

    let mut scored: Vec<(f64, Vec<f64>)> = grid
        .into_iter()
        .filter_map(|g| eval(&g).map(|f| (f, g)))
        .collect();
    if scored.is_empty() {
        return None;
    }
    scored.sort_by(|x, y| y.0.total_cmp(&x.0));
    scored.truncate(8);

    let mut best = f64::NEG_INFINITY;
    for (mut f, mut x) in scored {
        let mut h = step;
        while h > 1e-13 {
            let mut improved = false;
            for i in 0..x.len() {
                for s in [h, -h] {
                    let mut y = x.clone();
                    y[i] += s;
                    if let Some(fy) = eval(&y) {
                        if fy > f {
                            f = fy;
                            x = y;
                            improved = true;
                        }
                    }
                }
            }
            if !improved {
                h *= 0.5;
            }
        }
        best = best.max(f);
    }
    Some(best)
}
