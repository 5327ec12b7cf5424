//! Wall-clock comparison of the two spectral backends on one `λ_max`
//! evaluation at a fixed multiplier.
//!
//! Data are iid standard normal. The dense timing starts from an already
//! formed p × p matrix, so covariance formation is not counted; the
//! product-SVD timing includes its own factorization of the stacked data.

use std::path::Path;
use std::time::Instant;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use uca_core::engines::{top_eigenpairs_dense, top_eigenpairs_product_svd};
use uca_core::linalg::{assemble_factored, standardize, RawMatrix, ZeroVariancePolicy};

use crate::error::{CliError, Result};
use crate::io::{fmt_f64, write_table};

pub const MIN_REPS: usize = 5;

#[derive(Debug, Clone, PartialEq)]
pub struct BenchConfig {
    pub p_values: Vec<usize>,
    /// Rows per dataset.
    pub n: usize,
    /// Number of backgrounds.
    pub m: usize,
    pub reps: usize,
    pub seed: u64,
    /// Multiplier applied to every background.
    pub lambda: f64,
}

impl BenchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.reps < MIN_REPS {
            return Err(CliError::Input(format!(
                "bench needs at least {MIN_REPS} repetitions, got {}",
                self.reps
            )));
        }
        if self.p_values.is_empty() || self.p_values.contains(&0) {
            return Err(CliError::Input("p values must be positive".into()));
        }
        if self.n < 2 {
            return Err(CliError::Input(format!(
                "bench needs n ≥ 2, got {}",
                self.n
            )));
        }
        if self.m == 0 {
            return Err(CliError::Input(
                "bench needs at least one background".into(),
            ));
        }
        if !(self.lambda >= 0.0) || !self.lambda.is_finite() {
            return Err(CliError::Input(format!(
                "invalid multiplier {}",
                self.lambda
            )));
        }
        Ok(())
    }
}

/// One repetition of one cell.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchSample {
    pub rep: usize,
    pub dense_seconds: f64,
    pub product_seconds: f64,
    pub dense_lambda_max: f64,
    pub product_lambda_max: f64,
}

impl BenchSample {
    /// `|a − b| / max(1, |a|, |b|)` between the two backends.
    pub fn relative_delta(&self) -> f64 {
        let (a, b) = (self.dense_lambda_max, self.product_lambda_max);
        (a - b).abs() / 1f64.max(a.abs()).max(b.abs())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchCell {
    pub n: usize,
    pub p: usize,
    pub m: usize,
    pub samples: Vec<BenchSample>,
    /// Why the cell was not run, e.g. the p × p matrix did not fit in memory.
    pub skipped: Option<String>,
}

impl BenchCell {
    pub fn median_dense(&self) -> Option<f64> {
        median(self.samples.iter().map(|s| s.dense_seconds).collect())
    }

    pub fn median_product(&self) -> Option<f64> {
        median(self.samples.iter().map(|s| s.product_seconds).collect())
    }

    /// Median dense time over median product-SVD time.
    pub fn speedup(&self) -> Option<f64> {
        Some(self.median_dense()? / self.median_product()?)
    }

    pub fn max_relative_delta(&self) -> Option<f64> {
        self.samples
            .iter()
            .map(|s| s.relative_delta())
            .reduce(f64::max)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchReport {
    pub config: BenchConfig,
    pub cells: Vec<BenchCell>,
}

pub fn median(mut xs: Vec<f64>) -> Option<f64> {
    if xs.is_empty() {
        return None;
    }
    xs.sort_by(f64::total_cmp);
    let mid = xs.len() / 2;
    Some(if xs.len() % 2 == 1 {
        xs[mid]
    } else {
        0.5 * (xs[mid - 1] + xs[mid])
    })
}

pub fn run(config: &BenchConfig) -> Result<BenchReport> {
    config.validate()?;
    let mut cells = Vec::with_capacity(config.p_values.len());
    for &p in &config.p_values {
        cells.push(run_cell(config, p)?);
    }
    Ok(BenchReport {
        config: config.clone(),
        cells,
    })
}

fn run_cell(config: &BenchConfig, p: usize) -> Result<BenchCell> {
    let mut cell = BenchCell {
        n: config.n,
        p,
        m: config.m,
        samples: Vec::with_capacity(config.reps),
        skipped: None,
    };
    // The dense backend needs p² doubles; probe once instead of aborting mid-run.
    let mut probe: Vec<f64> = Vec::new();
    if let Err(e) = probe.try_reserve_exact(p * p) {
        cell.skipped = Some(format!("cannot allocate {p}x{p} matrix: {e}"));
        log::warn!("bench p={p}: skipped, {e}");
        return Ok(cell);
    }
    drop(probe);

    let lambdas = vec![config.lambda; config.m];
    for rep in 0..config.reps {
        let seed = config
            .seed
            .wrapping_add((p as u64).wrapping_mul(1_000_003))
            .wrapping_add(rep as u64);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut dataset = || -> Result<_> {
            let data: Vec<f64> = (0..config.n * p)
                .map(|_| rng.sample(StandardNormal))
                .collect();
            let raw = RawMatrix::from_row_slice(config.n, p, &data)?;
            Ok(standardize(&raw, ZeroVariancePolicy::Error)?)
        };
        let target = dataset()?;
        let backgrounds = (0..config.m)
            .map(|_| dataset())
            .collect::<Result<Vec<_>>>()?;
        let op = assemble_factored(&target, &backgrounds, &lambdas)?;

        let c: DMatrix<f64> = op.to_dense();
        let start = Instant::now();
        let dense = top_eigenpairs_dense(&c, 1)?;
        let dense_seconds = start.elapsed().as_secs_f64();
        drop(c);

        let start = Instant::now();
        let product = top_eigenpairs_product_svd(&op, 1, None)?;
        let product_seconds = start.elapsed().as_secs_f64();

        log::info!(
            "bench p={p} rep={rep}: dense {dense_seconds:.4}s, product-svd {product_seconds:.4}s"
        );
        cell.samples.push(BenchSample {
            rep,
            dense_seconds,
            product_seconds,
            dense_lambda_max: dense.eigenvalues[0],
            product_lambda_max: product.eigenvalues[0],
        });
    }
    Ok(cell)
}

/// Writes `bench.csv` (one row per repetition and backend, long format for
/// box plots) and `bench_summary.csv` (one row per cell).
pub fn write_report(report: &BenchReport, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let header: Vec<String> = ["n", "p", "m", "rep", "backend", "seconds", "lambda_max"]
        .map(String::from)
        .to_vec();
    let mut rows = Vec::new();
    for cell in &report.cells {
        for s in &cell.samples {
            for (backend, secs, value) in [
                ("dense", s.dense_seconds, s.dense_lambda_max),
                ("product-svd", s.product_seconds, s.product_lambda_max),
            ] {
                rows.push(vec![
                    cell.n.to_string(),
                    cell.p.to_string(),
                    cell.m.to_string(),
                    s.rep.to_string(),
                    backend.to_string(),
                    fmt_f64(secs),
                    fmt_f64(value),
                ]);
            }
        }
    }
    write_table(&dir.join("bench.csv"), &header, &rows)?;

    let header: Vec<String> = [
        "n",
        "p",
        "m",
        "reps",
        "median_dense_seconds",
        "median_product_svd_seconds",
        "speedup",
        "max_relative_delta",
        "status",
    ]
    .map(String::from)
    .to_vec();
    let opt = |x: Option<f64>| x.map(fmt_f64).unwrap_or_default();
    let rows: Vec<Vec<String>> = report
        .cells
        .iter()
        .map(|c| {
            vec![
                c.n.to_string(),
                c.p.to_string(),
                c.m.to_string(),
                c.samples.len().to_string(),
                opt(c.median_dense()),
                opt(c.median_product()),
                opt(c.speedup()),
                opt(c.max_relative_delta()),
                c.skipped
                    .clone()
                    .map_or("ok".to_string(), |s| format!("skipped: {s}")),
            ]
        })
        .collect();
    write_table(&dir.join("bench_summary.csv"), &header, &rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn median_of_even_and_odd() {
        assert_eq!(median(vec![3.0, 1.0, 2.0]), Some(2.0));
        assert_eq!(median(vec![4.0, 1.0, 2.0, 3.0]), Some(2.5));
        assert_eq!(median(Vec::new()), None);
    }

    #[test]
    fn small_cells_agree_across_backends() {
        let config = BenchConfig {
            p_values: vec![20, 60],
            n: 10,
            m: 2,
            reps: 5,
            seed: 3,
            lambda: 1.0,
        };
        let report = run(&config).unwrap();
        for cell in &report.cells {
            assert_eq!(cell.samples.len(), 5);
            assert!(cell.max_relative_delta().unwrap() <= 1e-8);
            assert!(cell
                .samples
                .iter()
                .all(|s| s.dense_seconds > 0.0 && s.product_seconds > 0.0));
        }
    }

    #[test]
    fn rejects_too_few_reps() {
        let config = BenchConfig {
            p_values: vec![10],
            n: 10,
            m: 1,
            reps: 4,
            seed: 0,
            lambda: 1.0,
        };
        assert!(run(&config).is_err());
    }
}
