mod common;

use common::{cov, diag, primal_oracle, random_std, rng};
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::Rng;
use uca_core::dual::{
    dual_value_and_gradient, kkt_report, solve, solve_multi, solve_single, ContrastiveProblem,
    SolverOptions,
};
use uca_core::{BackendSelection, DataSource};

fn problem(target: DataSource, backgrounds: Vec<DataSource>) -> ContrastiveProblem {
    ContrastiveProblem::new(target, backgrounds, BackendSelection::dense()).unwrap()
}

fn diag_example() -> ContrastiveProblem {
    problem(diag(&[2.0, 1.0]), vec![diag(&[4.0, 0.5])])
}

/// Independent λ-grid minimum of g for the 2×2 diagonal example:
/// g(λ) = max(2 − 4λ, 1 − λ/2) + λ.
fn diag_grid_minimum() -> (f64, f64) {
    let mut best = (f64::INFINITY, 0.0);
    for i in 0..=1_000_000 {
        let l = i as f64 * 1e-5;
        let g = (2.0 - 4.0 * l).max(1.0 - 0.5 * l) + l;
        if g < best.0 {
            best = (g, l);
        }
    }
    best
}

#[test]
fn value_and_gradient_at_zero() {
    let pt = dual_value_and_gradient(&diag_example(), &[0.0]).unwrap();
    assert!((pt.value - 2.0).abs() < 1e-14);
    assert!((pt.gradient[0] + 3.0).abs() < 1e-14);
}

#[test]
fn value_and_gradient_at_one() {
    let pt = dual_value_and_gradient(&diag_example(), &[1.0]).unwrap();
    assert!((pt.value - 1.5).abs() < 1e-14);
    assert!((pt.gradient[0] - 0.5).abs() < 1e-14);
    let h = 1e-6;
    let up = dual_value_and_gradient(&diag_example(), &[1.0 + h])
        .unwrap()
        .value;
    let down = dual_value_and_gradient(&diag_example(), &[1.0 - h])
        .unwrap()
        .value;
    assert!(((up - down) / (2.0 * h) - 0.5).abs() < 1e-6);
}

#[test]
fn identity_background_has_flat_dual() {
    let a = cov(3, &[1.0, 0.4, 0.1, 0.4, 1.0, -0.2, 0.1, -0.2, 1.0]);
    let top = a.covariance().values().symmetric_eigenvalues().max();
    let pr = problem(a, vec![diag(&[1.0, 1.0, 1.0])]);
    for l in [0.0, 0.3, 2.0] {
        let pt = dual_value_and_gradient(&pr, &[l]).unwrap();
        assert!((pt.value - top).abs() < 1e-12);
        assert!(pt.gradient[0].abs() < 1e-12);
    }
}

#[test]
fn worked_example_solves_to_the_kink() {
    let pr = diag_example();
    let sol = solve_single(&pr, &SolverOptions::default()).unwrap();
    let (g_grid, l_grid) = diag_grid_minimum();
    assert!(sol.converged);
    assert!((sol.lambdas[0] - 2.0 / 7.0).abs() < 1e-4);
    assert!((sol.lambdas[0] - l_grid).abs() < 2e-5);
    assert!((sol.dual_value - 8.0 / 7.0).abs() < 1e-6);
    assert!((sol.dual_value - g_grid).abs() < 1e-4);
    assert!(sol.degenerate);
    assert!(sol.eigenvector_resolved);
    assert!((sol.constraint_values[0] - 1.0).abs() < 1e-4);
    assert!(sol.max_slackness() <= 1e-4);
    assert!(!sol.trace.is_empty());
}

#[test]
fn identity_background_reduces_to_pca() {
    let a = cov(2, &[1.0, 0.6, 0.6, 1.0]);
    let pr = problem(a, vec![diag(&[1.0, 1.0])]);
    let sol = solve_single(&pr, &SolverOptions::default()).unwrap();
    assert!((sol.dual_value - 1.6).abs() < 1e-12);
    let s = std::f64::consts::FRAC_1_SQRT_2;
    assert!((sol.top_eigenvector[0].abs() - s).abs() < 1e-10);
}

#[test]
fn equal_target_and_background() {
    let c = [1.0, 0.5, 0.5, 1.0];
    let pr = problem(cov(2, &c), vec![cov(2, &c)]);
    let sol = solve_single(&pr, &SolverOptions::default()).unwrap();
    assert!(sol.converged);
    assert!((sol.lambdas[0] - 1.0).abs() < 1e-6);
    assert!((sol.dual_value - 1.0).abs() < 1e-9);
}

#[test]
fn duplicated_background_splits_the_single_multiplier() {
    let mut r = rng(3);
    let y = random_std(&mut r, 15, 3);
    let x = random_std(&mut r, 12, 3);
    let single = solve_single(
        &problem(y.clone().into(), vec![x.clone().into()]),
        &SolverOptions::default(),
    )
    .unwrap();
    let double = solve_multi(
        &problem(y.into(), vec![x.clone().into(), x.into()]),
        &SolverOptions::default(),
    )
    .unwrap();
    assert!((double.lambdas.iter().sum::<f64>() - single.lambdas[0]).abs() < 1e-6);
    assert!((double.dual_value - single.dual_value).abs() < 1e-6);
}

#[test]
fn identity_second_background_is_inert() {
    let mut r = rng(4);
    let y = random_std(&mut r, 15, 3);
    let x = random_std(&mut r, 12, 3);
    let single = solve_single(
        &problem(y.clone().into(), vec![x.clone().into()]),
        &SolverOptions::default(),
    )
    .unwrap();
    let with_identity = solve_multi(
        &problem(y.into(), vec![x.into(), diag(&[1.0, 1.0, 1.0])]),
        &SolverOptions::default(),
    )
    .unwrap();
    assert!((with_identity.lambdas[0] - single.lambdas[0]).abs() < 1e-6);
    assert!((with_identity.dual_value - single.dual_value).abs() < 1e-6);
}

#[test]
fn inactive_backgrounds_keep_zero_multipliers() {
    let pr = problem(
        diag(&[3.0, 1.0, 0.5]),
        vec![diag(&[0.5, 1.5, 1.0]), diag(&[0.8, 1.0, 1.2])],
    );
    let sol = solve(&pr, &SolverOptions::default()).unwrap();
    assert_eq!(sol.lambdas, vec![0.0, 0.0]);
    assert!((sol.dual_value - 3.0).abs() < 1e-14);
    assert!(sol.converged);
}

#[test]
fn kkt_report_on_worked_example() {
    let pr = diag_example();
    let sol = solve_single(&pr, &SolverOptions::default()).unwrap();
    let report = kkt_report(&pr, &sol);
    assert!(report.degenerate);
    assert!(report.dual_feasible && report.primal_feasible);
    let gap = report.duality_gap.unwrap();
    assert!(gap.abs() <= 1e-3, "gap {gap}");
    assert!(report.notes.iter().any(|n| n.contains("degenerate")));
}

#[test]
fn kkt_report_identity_background_has_zero_slack() {
    let pr = problem(cov(2, &[1.0, 0.3, 0.3, 1.0]), vec![diag(&[1.0, 1.0])]);
    let sol = solve_single(&pr, &SolverOptions::default()).unwrap();
    let report = kkt_report(&pr, &sol);
    assert_eq!(report.max_slackness, 0.0);
    assert!(report.primal_residuals[0].abs() < 1e-12);
}

#[test]
fn early_stop_is_flagged() {
    let opts = SolverOptions {
        max_iter: 1,
        ..SolverOptions::default()
    };
    let sol = solve_single(&diag_example(), &opts).unwrap();
    assert!(!sol.converged);
    let report = kkt_report(&diag_example(), &sol);
    assert!(!report.converged);
}

#[test]
fn wrong_background_count_is_rejected() {
    let pr = problem(diag(&[1.0, 1.0]), vec![]);
    assert!(solve(&pr, &SolverOptions::default()).is_err());
    assert!(solve_multi(&diag_example(), &SolverOptions::default()).is_err());
    assert!(dual_value_and_gradient(&diag_example(), &[-0.1]).is_err());
}

#[test]
fn product_svd_backend_solves_the_same_problem() {
    let mut r = rng(8);
    let y = random_std(&mut r, 6, 12);
    let x = random_std(&mut r, 5, 12);
    let dense = solve_single(
        &ContrastiveProblem::new(y.clone(), vec![x.clone().into()], BackendSelection::dense())
            .unwrap(),
        &SolverOptions::default(),
    )
    .unwrap();
    let factored = solve_single(
        &ContrastiveProblem::new(y, vec![x.into()], BackendSelection::product_svd()).unwrap(),
        &SolverOptions::default(),
    )
    .unwrap();
    assert_eq!(factored.backend, "product-svd");
    assert!((dense.dual_value - factored.dual_value).abs() < 1e-8);
    assert!((dense.lambdas[0] - factored.lambdas[0]).abs() < 1e-5);
}

fn instance(seed: u64, p: usize, m: usize) -> ContrastiveProblem {
    let mut r = rng(seed);
    let n = r.gen_range(5..=20);
    let y = random_std(&mut r, n, p);
    let bs = (0..m)
        .map(|_| {
            let nb = r.gen_range(5..=20);
            random_std(&mut r, nb, p).into()
        })
        .collect();
    problem(y.into(), bs)
}

fn dense_parts(pr: &ContrastiveProblem) -> (DMatrix<f64>, Vec<DMatrix<f64>>) {
    (
        pr.target().covariance().values().clone(),
        pr.backgrounds()
            .iter()
            .map(|b| b.covariance().values().clone())
            .collect(),
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn dual_is_convex_on_a_grid(seed in 0u64..10_000, p in 2usize..5) {
        let pr = instance(seed, p, 1);
        let g: Vec<f64> = (0..100)
            .map(|i| dual_value_and_gradient(&pr, &[i as f64 * 0.03]).unwrap().value)
            .collect();
        for w in g.windows(3) {
            prop_assert!(w[0] - 2.0 * w[1] + w[2] >= -1e-8);
        }
    }

    #[test]
    fn gradient_matches_finite_differences(seed in 0u64..10_000, m in 1usize..3) {
        let pr = instance(seed, 3, m);
        let mut r = rng(seed ^ 0xabc);
        let h = 1e-5;
        for _ in 0..20 {
            let l: Vec<f64> = (0..m).map(|_| r.gen_range(0.0..3.0)).collect();
            let pt = dual_value_and_gradient(&pr, &l).unwrap();
            if pt.eigen_gap() <= 1e-4 {
                continue;
            }
            for j in 0..m {
                let mut up = l.clone();
                let mut down = l.clone();
                up[j] += h;
                down[j] = (down[j] - h).max(0.0);
                let fd = (dual_value_and_gradient(&pr, &up).unwrap().value
                    - dual_value_and_gradient(&pr, &down).unwrap().value)
                    / (up[j] - down[j]);
                prop_assert!((fd - pt.gradient[j]).abs() <= 1e-4, "fd {} vs {}", fd, pt.gradient[j]);
            }
        }
    }

    #[test]
    fn weak_duality_against_primal_oracle(seed in 0u64..10_000, p in 2usize..4, m in 1usize..3) {
        let pr = instance(seed, p, m);
        let sol = solve(&pr, &SolverOptions::default()).unwrap();
        let (a, bs) = dense_parts(&pr);
        let primal = primal_oracle(&a, &bs, 2e-3);
        prop_assert!(sol.dual_value >= primal - 1e-6, "dual {} primal {}", sol.dual_value, primal);
    }

    #[test]
    fn active_constraints_are_tight(seed in 0u64..10_000) {
        let pr = instance(seed, 3, 1);
        let sol = solve(&pr, &SolverOptions::default()).unwrap();
        if sol.converged && sol.lambdas[0] > 1e-6 {
            prop_assert!((sol.constraint_values[0] - 1.0).abs() <= 1e-3);
        }
    }

    #[test]
    fn scaling_the_background_rescales_the_multiplier(seed in 0u64..10_000, c in 0.2f64..5.0) {
        // Constraint vᵀ(cB)v ≤ c has dual g_c(λ) = λ_max(A − λcB) + λc,
        // so λ̂_c · c = λ̂ and the optimal values agree.
        let pr = instance(seed, 3, 1);
        let sol = solve(&pr, &SolverOptions::default()).unwrap();
        let (a, bs) = dense_parts(&pr);
        let scaled = problem(
            DataSource::Covariance(uca_core::CovarianceMatrix::new(a, 10).unwrap()),
            vec![DataSource::Covariance(uca_core::CovarianceMatrix::new(&bs[0] * c, 10).unwrap())],
        );
        let l = sol.lambdas[0] / c;
        let pt = dual_value_and_gradient(&scaled, &[l]).unwrap();
        let g_c = pt.top_eigenvalue() + l * c;
        prop_assert!((g_c - sol.dual_value).abs() <= 1e-6 * sol.dual_value.abs().max(1.0));
        prop_assert!((l * c - sol.lambdas[0]).abs() <= 1e-6 * sol.lambdas[0].max(1.0));
    }
}
