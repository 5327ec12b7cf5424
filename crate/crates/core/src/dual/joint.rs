//! Joint steps out of eigenvalue crossings.
//!
//! Where the top eigenvalue of `A − Σ λ_j B_j` is (nearly) repeated, `g` has
//! a kink, and no single multiplier may lower it even though a joint move
//! does. The subdifferential there is `{1 − ⟨Z, WᵀB_jW⟩ : Z ⪰ 0, tr Z = 1}`
//! with `W` spanning the top cluster. Its minimum-norm element, projected
//! onto the directions allowed by `λ ≥ 0`, gives the steepest descent
//! direction, which is then searched like a coordinate.

use nalgebra::{DMatrix, DVector};

use super::degenerate::{golden, project_form, ACTIVE, CLUSTER_TOL, MAX_CLUSTER};
use super::scalar::{minimize_line, Line, LineOutcome};
use super::{DualPoint, Evaluator, SolverOptions};
use crate::error::Result;

const FW_ITERS: usize = 500;

/// Per-multiplier residual of a subgradient `s`: its blocked part is dropped
/// for multipliers sitting at zero.
fn residual(active: &[bool], s: &[f64]) -> Vec<f64> {
    active
        .iter()
        .zip(s)
        .map(|(&a, &s)| if a { s } else { s.min(0.0) })
        .collect()
}

fn subgradient(forms: &[DMatrix<f64>], z: &DMatrix<f64>) -> Vec<f64> {
    forms.iter().map(|m| 1.0 - m.dot(z)).collect()
}

/// Minimum-norm projected subgradient over the spectraplex, by Frank–Wolfe
/// with an exact line search.
pub(crate) fn min_norm_residual(active: &[bool], forms: &[DMatrix<f64>]) -> Vec<f64> {
    let d = forms[0].nrows();
    let norm2 = |z: &DMatrix<f64>| {
        residual(active, &subgradient(forms, z))
            .iter()
            .map(|r| r * r)
            .sum::<f64>()
    };
    // Start from the best pure eigenvector.
    let mut z = (0..d)
        .map(|a| {
            let mut e = DMatrix::zeros(d, d);
            e[(a, a)] = 1.0;
            e
        })
        .min_by(|a, b| norm2(a).total_cmp(&norm2(b)))
        .expect("cluster is non-empty");
    for _ in 0..FW_ITERS {
        let r = residual(active, &subgradient(forms, &z));
        let mut grad = DMatrix::zeros(d, d);
        for (m, rj) in forms.iter().zip(&r) {
            grad -= m * (2.0 * rj);
        }
        let eig = grad.clone().symmetric_eigen();
        let imin = eig.eigenvalues.imin();
        let u = eig.eigenvectors.column(imin).into_owned();
        let vertex = &u * u.transpose();
        let dual_gap = grad.dot(&z) - eig.eigenvalues[imin];
        if dual_gap <= 1e-15 {
            break;
        }
        let step = &vertex - &z;
        let gamma = golden(|g| norm2(&(&z + &step * g)), 0.0, 1.0);
        z += step * gamma;
    }
    residual(active, &subgradient(forms, &z))
}

/// One steepest-descent step from a kink. Returns `None` when `point` is
/// not on a crossing or no descent direction exists there.
pub(crate) fn step(
    ev: &mut Evaluator<'_>,
    point: &DualPoint,
    opts: &SolverOptions,
) -> Result<Option<LineOutcome>> {
    let kc = ev.op.max_pairs().min(MAX_CLUSTER);
    if kc < 2 {
        return Ok(None);
    }
    let sol = ev.op.top_eigenpairs(&point.lambdas, kc)?;
    let mu = sol.eigenvalues[0];
    let d = sol
        .eigenvalues
        .iter()
        .take_while(|&&e| mu - e <= CLUSTER_TOL * mu.abs().max(1.0))
        .count();
    if d < 2 {
        return Ok(None);
    }
    let w = sol.eigenvectors.columns(0, d).into_owned();
    let m = point.lambdas.len();
    let forms: Vec<DMatrix<f64>> = (0..m)
        .map(|j| project_form(&w, |v: &DVector<f64>| ev.op.background_form(j, v)))
        .collect();
    let active: Vec<bool> = point.lambdas.iter().map(|&l| l > ACTIVE).collect();

    let dir: Vec<f64> = min_norm_residual(&active, &forms)
        .iter()
        .map(|r| -r)
        .collect();
    if dir.iter().all(|x| x.abs() <= opts.tol_grad) {
        return Ok(None);
    }
    // One-sided derivative along `dir`: Σ d_j + λ_max(−Σ d_j WᵀB_jW).
    let mut pencil = DMatrix::zeros(d, d);
    for (f, dj) in forms.iter().zip(&dir) {
        pencil -= f * *dj;
    }
    let slope = dir.iter().sum::<f64>() + pencil.symmetric_eigen().eigenvalues.max();
    if slope >= -opts.tol_grad {
        return Ok(None);
    }
    let t_max = point
        .lambdas
        .iter()
        .zip(&dir)
        .filter(|(_, &dj)| dj < 0.0)
        .map(|(&l, &dj)| l / -dj)
        .fold(f64::INFINITY, f64::min);
    let scale = dir.iter().fold(0.0_f64, |a, x| a.max(x.abs()));
    let line = Line {
        origin: point.lambdas.clone(),
        dir,
        t_min: 0.0,
        t_max,
        hint: (0.1 / scale).min(t_max),
    };
    log::debug!("crossing of size {d}: joint step with slope {slope:.3e}");
    minimize_line(ev, point.clone(), 0.0, Some(slope), &line, opts).map(Some)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn min_norm_mixes_eigenvectors() {
        // Each pure eigenvector violates one constraint; the even mix
        // satisfies both.
        let b1 = DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, 0.0]));
        let b2 = DMatrix::from_diagonal(&DVector::from_vec(vec![0.0, 2.0]));
        let r = min_norm_residual(&[true, true], &[b1, b2]);
        assert!(r.iter().all(|x| x.abs() < 1e-6), "{r:?}");
    }

    #[test]
    fn blocked_multipliers_are_dropped() {
        let b = DMatrix::from_diagonal(&DVector::from_vec(vec![0.5, 0.25]));
        let r = min_norm_residual(&[false], &[b]);
        assert_eq!(r, vec![0.0]);
    }
}
