mod common;

use common::{cov, diag, random_std, rng};
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use uca_core::linalg::{covariance, standardize, RawMatrix, ZeroVariancePolicy};
use uca_core::methods::{fit_cpca, fit_cpcapp, fit_pca, fit_uca, transform};
use uca_core::{BackendSelection, DataSource, FitConfig, FitData, MethodRegistry, SolverOptions};

fn dense() -> BackendSelection {
    BackendSelection::dense()
}

fn normal_raw(r: &mut rand_chacha::ChaCha8Rng, n: usize, p: usize) -> RawMatrix {
    let data: Vec<f64> = (0..n * p).map(|_| r.sample(StandardNormal)).collect();
    RawMatrix::from_row_slice(n, p, &data).unwrap()
}

fn abs_cos(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    (a.dot(b) / (a.norm() * b.norm())).abs()
}

/// Eigenvector of the smallest eigenvalue by inverse iteration.
fn smallest_direction(b: &DMatrix<f64>) -> DVector<f64> {
    let lu = b.clone().lu();
    let mut v = DVector::from_element(b.nrows(), 1.0);
    for _ in 0..500 {
        v = lu.solve(&v).unwrap();
        v.normalize_mut();
    }
    v
}

#[test]
fn pca_on_diagonal_covariance() {
    let m = fit_pca(&diag(&[3.0, 1.0]), 1, &dense()).unwrap();
    assert_eq!(m.eigenvalues, vec![3.0]);
    assert_eq!(
        m.components.column(0).iter().cloned().collect::<Vec<_>>(),
        vec![1.0, 0.0]
    );
    assert!(m.lambdas.is_empty());
}

#[test]
fn cpca_at_zero_is_pca() {
    let mut r = rng(1);
    let y = DataSource::from(random_std(&mut r, 20, 6));
    let x = DataSource::from(random_std(&mut r, 15, 6));
    let pca = fit_pca(&y, 4, &dense()).unwrap();
    let cpca = fit_cpca(&y, &x, &[0.0], 4, &dense()).unwrap().remove(0);
    assert_eq!(pca.eigenvalues, cpca.eigenvalues);
    assert_eq!(pca.components, cpca.components);
}

#[test]
fn pca_scores_are_uncorrelated() {
    let mut r = rng(2);
    let y = random_std(&mut r, 20, 6);
    let m = fit_pca(&y.clone().into(), 6, &dense()).unwrap();
    let scores = m.project(y.values()).unwrap();
    let c = scores.transpose() * &scores / 20.0;
    for i in 0..6 {
        for j in 0..6 {
            let want = if i == j { m.eigenvalues[i] } else { 0.0 };
            assert!((c[(i, j)] - want).abs() < 1e-8);
        }
    }
}

#[test]
fn cpca_with_huge_lambda_finds_background_null_direction() {
    let mut r = rng(3);
    let y = random_std(&mut r, 40, 4);
    let x = random_std(&mut r, 40, 4);
    let m = fit_cpca(&y.into(), &x.clone().into(), &[1e6], 1, &dense())
        .unwrap()
        .remove(0);
    let target = smallest_direction(covariance(&x).values());
    assert!(abs_cos(&m.components.column(0).into_owned(), &target) >= 0.99);
}

#[test]
fn cpca_flags_degenerate_pair_at_kink() {
    let m = fit_cpca(
        &diag(&[2.0, 1.0]),
        &diag(&[4.0, 0.5]),
        &[2.0 / 7.0],
        2,
        &dense(),
    )
    .unwrap()
    .remove(0);
    assert!((m.eigenvalues[0] - 6.0 / 7.0).abs() < 1e-12);
    assert!((m.eigenvalues[1] - 6.0 / 7.0).abs() < 1e-12);
    assert_eq!(m.degenerate_pairs, vec![(0, 1)]);
}

#[test]
fn cpca_rejects_negative_lambda() {
    assert!(fit_cpca(
        &diag(&[2.0, 1.0]),
        &diag(&[1.0, 1.0]),
        &[0.5, -1.0],
        1,
        &dense()
    )
    .is_err());
}

#[test]
fn cpcapp_with_identity_background_matches_pca() {
    let a = cov(3, &[1.0, 0.5, 0.2, 0.5, 1.0, 0.3, 0.2, 0.3, 1.0]);
    let pca = fit_pca(&a, 3, &dense()).unwrap();
    let pp = fit_cpcapp(&a, &diag(&[1.0, 1.0, 1.0]), 3, 1e-10).unwrap();
    for i in 0..3 {
        assert!((pca.eigenvalues[i] - pp.eigenvalues[i]).abs() < 1e-12);
        assert!(
            abs_cos(
                &pca.components.column(i).into_owned(),
                &pp.components.column(i).into_owned()
            ) > 1.0 - 1e-12
        );
    }
}

#[test]
fn cpcapp_picks_best_ratio_direction() {
    let m = fit_cpcapp(&diag(&[2.0, 1.0]), &diag(&[4.0, 0.5]), 1, 1e-10).unwrap();
    // Ratios: e1 → 2/4, e2 → 1/0.5.
    let v = m.components.column(0);
    assert!(v[0].abs() < 1e-12);
    assert!((v[1] - 2f64.sqrt()).abs() < 1e-12);
    assert!((m.eigenvalues[0] - 2.0).abs() < 1e-12);
    assert!((m.constraint_values[0][0] - 1.0).abs() < 1e-12);
}

#[test]
fn cpcapp_handles_rank_deficient_background() {
    let a = cov(3, &[1.0, 0.2, 0.1, 0.2, 1.0, 0.4, 0.1, 0.4, 1.0]);
    let b = cov(3, &[1.0, 1.0, 0.0, 1.0, 1.0, 0.0, 0.0, 0.0, 1.0]);
    let m = fit_cpcapp(&a, &b, 2, 1e-10).unwrap();
    assert!(m.warnings.iter().any(|w| w.contains("rank 2")));
    let bm = b.covariance().values().clone();
    for i in 0..2 {
        for j in 0..2 {
            let vij = m.components.column(i).dot(&(&bm * m.components.column(j)));
            let want = if i == j { 1.0 } else { 0.0 };
            assert!((vij - want).abs() < 1e-6);
        }
    }
    assert!(fit_cpcapp(&a, &b, 3, 1e-10).is_err());
}

#[test]
fn cpcapp_rejects_zero_background() {
    let zero =
        DataSource::Covariance(uca_core::CovarianceMatrix::new(DMatrix::zeros(2, 2), 5).unwrap());
    assert!(fit_cpcapp(&diag(&[1.0, 1.0]), &zero, 1, 1e-10).is_err());
}

#[test]
fn uca_with_identity_background_is_pca() {
    let a = cov(3, &[1.0, 0.6, 0.1, 0.6, 1.0, 0.2, 0.1, 0.2, 1.0]);
    let pca = fit_pca(&a, 2, &dense()).unwrap();
    let uca = fit_uca(
        &a,
        &[diag(&[1.0, 1.0, 1.0])],
        2,
        &dense(),
        &SolverOptions::default(),
    )
    .unwrap();
    for i in 0..2 {
        assert!((pca.eigenvalues[i] - uca.eigenvalues[i]).abs() < 1e-10);
        assert!((pca.components.column(i) - uca.components.column(i)).amax() < 1e-10);
    }
}

#[test]
fn uca_with_white_noise_background_tracks_pca() {
    let mut r = rng(5);
    let p = 6;
    // Target with a dominant correlated block.
    let n = 300;
    let mut data = Vec::with_capacity(n * p);
    for _ in 0..n {
        let z: f64 = r.sample(StandardNormal);
        for j in 0..p {
            let e: f64 = r.sample(StandardNormal);
            data.push(if j < 3 { 2.0 * z + e } else { e });
        }
    }
    let y = standardize(
        &RawMatrix::from_row_slice(n, p, &data).unwrap(),
        ZeroVariancePolicy::Error,
    )
    .unwrap();
    let x = standardize(&normal_raw(&mut r, 50 * p, p), ZeroVariancePolicy::Error).unwrap();
    let pca = fit_pca(&y.clone().into(), 1, &dense()).unwrap();
    let uca = fit_uca(
        &y.into(),
        &[x.into()],
        1,
        &dense(),
        &SolverOptions::default(),
    )
    .unwrap();
    let c = abs_cos(
        &pca.components.column(0).into_owned(),
        &uca.components.column(0).into_owned(),
    );
    assert!(c >= 0.95, "alignment {c}");
}

#[test]
fn uca_components_are_orthonormal_and_first_is_feasible() {
    let mut r = rng(6);
    let y = random_std(&mut r, 30, 8);
    let b1 = random_std(&mut r, 25, 8);
    let b2 = random_std(&mut r, 20, 8);
    let m = fit_uca(
        &y.into(),
        &[b1.into(), b2.into()],
        3,
        &dense(),
        &SolverOptions::default(),
    )
    .unwrap();
    let k = m.k();
    let gram = m.components.transpose() * &m.components;
    assert!((gram - DMatrix::identity(k, k)).amax() < 1e-8);
    for c in &m.constraint_values[0] {
        assert!(*c <= 1.0 + 1e-3);
    }
    assert!(m.lambdas.iter().all(|&l| l >= 0.0));
    let diag = m.diagnostics.as_ref().unwrap();
    assert!(diag.converged);
    assert!(diag.kkt.max_slackness <= 1e-4);
}

#[test]
fn uca_kink_places_solved_direction_first() {
    let m = fit_uca(
        &diag(&[2.0, 1.0]),
        &[diag(&[4.0, 0.5])],
        2,
        &dense(),
        &SolverOptions::default(),
    )
    .unwrap();
    assert!((m.lambdas[0] - 2.0 / 7.0).abs() < 1e-4);
    assert!((m.constraint_values[0][0] - 1.0).abs() < 1e-4);
    let gram = m.components.transpose() * &m.components;
    assert!((gram - DMatrix::identity(2, 2)).amax() < 1e-10);
    assert!(m.warnings.iter().any(|w| w.contains("degenerate")));
}

#[test]
fn transform_reproduces_training_scores() {
    let mut r = rng(7);
    let raw = normal_raw(&mut r, 25, 5);
    let y = standardize(&raw, ZeroVariancePolicy::Error).unwrap();
    let m = fit_pca(&y.clone().into(), 3, &dense()).unwrap();
    let via_transform = transform(&m, &raw).unwrap();
    let direct = y.values() * &m.components;
    assert!((via_transform - direct).amax() < 1e-10);
}

#[test]
fn transform_maps_mean_row_to_zero_scores() {
    let mut r = rng(8);
    let raw = normal_raw(&mut r, 25, 4);
    let y = standardize(&raw, ZeroVariancePolicy::Error).unwrap();
    let m = fit_pca(&y.clone().into(), 2, &dense()).unwrap();
    let mean = RawMatrix::from_row_slice(1, 4, y.means()).unwrap();
    let s = transform(&m, &mean).unwrap();
    assert!(s.amax() < 1e-12);
    assert!(transform(
        &m,
        &RawMatrix::from_row_slice(1, 3, &[0.0, 0.0, 0.0]).unwrap()
    )
    .is_err());
}

#[test]
fn pca_reconstruction_error_decreases_with_k() {
    let mut r = rng(9);
    let y = random_std(&mut r, 30, 6);
    let mut prev = f64::INFINITY;
    for k in 1..=6 {
        let m = fit_pca(&y.clone().into(), k, &dense()).unwrap();
        let scores = m.project(y.values()).unwrap();
        let err = (y.values() - scores * m.components.transpose()).norm_squared();
        assert!(err < prev + 1e-12);
        prev = err;
    }
    assert!(prev < 1e-20);
}

#[test]
fn fits_are_deterministic() {
    let mut r = rng(10);
    let y: DataSource = random_std(&mut r, 12, 30).into();
    let x: DataSource = random_std(&mut r, 10, 30).into();
    let a = fit_uca(
        &y,
        &[x.clone()],
        3,
        &BackendSelection::Auto,
        &SolverOptions::default(),
    )
    .unwrap();
    let b = fit_uca(
        &y,
        &[x],
        3,
        &BackendSelection::Auto,
        &SolverOptions::default(),
    )
    .unwrap();
    assert_eq!(a.backend, "product-svd");
    assert_eq!(a.components, b.components);
    assert_eq!(a.lambdas, b.lambdas);
}

#[test]
fn registry_resolves_methods_by_name() {
    let reg = MethodRegistry::builtin();
    assert_eq!(reg.names(), vec!["pca", "cpca", "cpcapp", "uca"]);
    let data = FitData::new(diag(&[2.0, 1.0]), vec![diag(&[4.0, 0.5])]);
    let config = FitConfig {
        k: 1,
        lambdas: vec![0.0, 1.0],
        backend: dense(),
        ..FitConfig::default()
    };
    assert_eq!(
        reg.get("cpca").unwrap().fit(&data, &config).unwrap().len(),
        2
    );
    assert_eq!(
        reg.get("UCA").unwrap().fit(&data, &config).unwrap()[0].method,
        "uca"
    );
    assert!(reg.get("ica").is_err());
    let no_bg = FitData::new(diag(&[2.0, 1.0]), vec![]);
    assert!(reg.get("cpcapp").unwrap().fit(&no_bg, &config).is_err());
}
