#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use uca_core::linalg::{
    standardize, CovarianceMatrix, RawMatrix, StandardizedMatrix, ZeroVariancePolicy,
};
use uca_core::DataSource;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_std(rng: &mut ChaCha8Rng, n: usize, p: usize) -> StandardizedMatrix {
    let data: Vec<f64> = (0..n * p).map(|_| rng.gen_range(-2.0..2.0)).collect();
    standardize(
        &RawMatrix::from_row_slice(n, p, &data).unwrap(),
        ZeroVariancePolicy::Error,
    )
    .unwrap()
}

pub fn cov(p: usize, values: &[f64]) -> DataSource {
    DataSource::Covariance(
        CovarianceMatrix::new(DMatrix::from_row_slice(p, p, values), 100).unwrap(),
    )
}

pub fn diag(values: &[f64]) -> DataSource {
    DataSource::Covariance(
        CovarianceMatrix::new(
            DMatrix::from_diagonal(&DVector::from_row_slice(values)),
            100,
        )
        .unwrap(),
    )
}

/// Plain triple-loop quadratic form.
pub fn qf(m: &DMatrix<f64>, v: &[f64]) -> f64 {
    let mut s = 0.0;
    for i in 0..v.len() {
        for j in 0..v.len() {
            s += v[i] * m[(i, j)] * v[j];
        }
    }
    s
}

/// Primal oracle for p ∈ {2, 3}: maximize vᵀAv over the unit sphere subject
/// to vᵀB_j v ≤ 1, using a dense angle grid and then random feasible
/// perturbations with a shrinking radius around the best grid points.
pub fn primal_oracle(a: &DMatrix<f64>, bs: &[DMatrix<f64>], resolution: f64) -> f64 {
    let p = a.nrows();
    let feasible = |v: &[f64]| bs.iter().all(|b| qf(b, v) <= 1.0 + 1e-12);
    let mut cands: Vec<(f64, Vec<f64>)> = Vec::new();
    let pi = std::f64::consts::PI;
    let push = |v: Vec<f64>, cands: &mut Vec<(f64, Vec<f64>)>| {
        if feasible(&v) {
            cands.push((qf(a, &v), v));
        }
    };
    match p {
        2 => {
            let n = (pi / resolution).ceil() as usize;
            for i in 0..n {
                let t = i as f64 * pi / n as f64;
                push(vec![t.cos(), t.sin()], &mut cands);
            }
        }
        3 => {
            let nt = (0.5 * pi / resolution).ceil() as usize;
            for i in 0..=nt {
                let t = i as f64 * 0.5 * pi / nt as f64;
                let (st, ct) = t.sin_cos();
                let nf = ((2.0 * pi * st / resolution).ceil() as usize).max(1);
                for k in 0..nf {
                    let f = k as f64 * 2.0 * pi / nf as f64;
                    push(vec![st * f.cos(), st * f.sin(), ct], &mut cands);
                }
            }
        }
        _ => panic!("oracle supports p = 2 or 3"),
    }
    assert!(!cands.is_empty(), "no feasible grid direction");
    cands.sort_by(|x, y| y.0.total_cmp(&x.0));
    cands.truncate(5);

    let mut r = rng(77);
    let mut best = f64::NEG_INFINITY;
    for (mut f, mut v) in cands {
        let mut radius = 4.0 * resolution;
        while radius > 1e-12 {
            let mut improved = false;
            for _ in 0..40 {
                let mut w: Vec<f64> = v
                    .iter()
                    .map(|x| x + radius * r.gen_range(-1.0..1.0))
                    .collect();
                let n = w.iter().map(|x| x * x).sum::<f64>().sqrt();
                w.iter_mut().for_each(|x| *x /= n);
                if feasible(&w) {
                    let fw = qf(a, &w);
                    if fw > f {
                        f = fw;
                        v = w;
                        improved = true;
                    }
                }
            }
            if !improved {
                radius *= 0.5;
            }
        }
        best = best.max(f);
    }
    best
}
