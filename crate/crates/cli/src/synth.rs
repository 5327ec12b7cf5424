//! Synthetic fixtures with known structure.
//!
//! Planted directions are dense ±1 sign patterns scaled to unit length. A
//! random sign vector σ gives the shared direction `σ/√p`; further
//! directions are `σ∘τ/√q` where τ is a balanced ±1 pattern over the first
//! `q = 4⌊p/4⌋` features and zero beyond. The τ patterns repeat with period
//! four, `(+,+,−,−)` and `(+,−,+,−)`, so every running sum of a dot product
//! between two directions, taken in feature order, is 0 or ±one term and
//! comes out exactly 0 in floating point.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use crate::error::{CliError, Result};
use crate::io::{fmt_f64, write_table};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scenario {
    PlantedUnique,
    TwoNuisance,
    WhiteNoise,
}

impl Scenario {
    pub const NAMES: [&'static str; 3] = ["planted-unique", "two-nuisance", "white-noise"];
}

impl FromStr for Scenario {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "planted-unique" => Ok(Scenario::PlantedUnique),
            "two-nuisance" => Ok(Scenario::TwoNuisance),
            "white-noise" => Ok(Scenario::WhiteNoise),
            other => Err(CliError::Input(format!(
                "unknown scenario `{other}` (expected one of {})",
                Scenario::NAMES.join(", ")
            ))),
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scenario::PlantedUnique => "planted-unique",
            Scenario::TwoNuisance => "two-nuisance",
            Scenario::WhiteNoise => "white-noise",
        })
    }
}

/// Generator constants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthParams {
    pub n: usize,
    pub p: usize,
    pub seed: u64,
    /// Scale of the shared (nuisance) signals.
    pub alpha: f64,
    /// Scale of the unique signal.
    pub beta: f64,
    /// Standard deviation of the additive noise.
    pub noise_sd: f64,
}

impl SynthParams {
    pub fn new(n: usize, p: usize, seed: u64) -> Self {
        SynthParams {
            n,
            p,
            seed,
            alpha: 3.0,
            beta: 1.5,
            noise_sd: 0.5,
        }
    }
}

/// A named n × p table.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub values: DMatrix<f64>,
}

/// Generated datasets plus the planted directions.
#[derive(Debug, Clone, PartialEq)]
pub struct Fixture {
    pub scenario: Scenario,
    pub feature_names: Vec<String>,
    pub tables: Vec<Table>,
    /// `(name, unit direction)`; empty for white noise.
    pub ground_truth: Vec<(String, DVector<f64>)>,
}

impl Fixture {
    pub fn table(&self, name: &str) -> Option<&DMatrix<f64>> {
        self.tables
            .iter()
            .find(|t| t.name == name)
            .map(|t| &t.values)
    }

    pub fn direction(&self, name: &str) -> Option<&DVector<f64>> {
        self.ground_truth
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, v)| v)
    }
}

pub fn feature_names(p: usize) -> Vec<String> {
    (1..=p).map(|i| format!("x{i}")).collect()
}

pub fn generate(scenario: Scenario, params: &SynthParams) -> Result<Fixture> {
    let SynthParams { n, p, .. } = *params;
    if n < 4 {
        return Err(CliError::Input(format!(
            "synthetic data needs n ≥ 4, got {n}"
        )));
    }
    if p < 2 {
        return Err(CliError::Input(format!(
            "synthetic data needs p ≥ 2, got {p}"
        )));
    }
    if scenario != Scenario::WhiteNoise && p < 4 {
        return Err(CliError::Input(format!("{scenario} needs p ≥ 4, got {p}")));
    }
    if !(params.noise_sd >= 0.0) || !params.alpha.is_finite() || !params.beta.is_finite() {
        return Err(CliError::Input(
            "generator constants must be finite, noise sd ≥ 0".into(),
        ));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let noise =
        Normal::new(0.0, params.noise_sd).map_err(|e| CliError::Input(format!("noise sd: {e}")))?;

    let (tables, ground_truth) = match scenario {
        Scenario::WhiteNoise => {
            let data = DMatrix::from_fn(n, p, |_, _| rng.sample::<f64, _>(StandardNormal));
            (vec![table("data", data)], Vec::new())
        }
        Scenario::PlantedUnique => {
            let [s, u, _] = planted_directions(&mut rng, p);
            let target = mix(
                &mut rng,
                n,
                &[(params.alpha, &s), (params.beta, &u)],
                &noise,
            );
            let background = mix(&mut rng, n, &[(params.alpha, &s)], &noise);
            (
                vec![table("target", target), table("background", background)],
                vec![("s".to_string(), s), ("u".to_string(), u)],
            )
        }
        Scenario::TwoNuisance => {
            let [s1, s2, u] = planted_directions(&mut rng, p);
            let target = mix(
                &mut rng,
                n,
                &[(params.alpha, &s1), (params.alpha, &s2), (params.beta, &u)],
                &noise,
            );
            let b1 = mix(&mut rng, n, &[(params.alpha, &s1)], &noise);
            let b2 = mix(&mut rng, n, &[(params.alpha, &s2)], &noise);
            let mut pooled = DMatrix::zeros(2 * n, p);
            pooled.rows_mut(0, n).copy_from(&b1);
            pooled.rows_mut(n, n).copy_from(&b2);
            (
                vec![
                    table("target", target),
                    table("background1", b1),
                    table("background2", b2),
                    table("background_pooled", pooled),
                ],
                vec![
                    ("s1".to_string(), s1),
                    ("s2".to_string(), s2),
                    ("u".to_string(), u),
                ],
            )
        }
    };

    Ok(Fixture {
        scenario,
        feature_names: feature_names(p),
        tables,
        ground_truth,
    })
}

fn table(name: &str, values: DMatrix<f64>) -> Table {
    Table {
        name: name.to_string(),
        values,
    }
}

/// Three mutually orthogonal unit directions; see the module docs.
fn planted_directions(rng: &mut ChaCha8Rng, p: usize) -> [DVector<f64>; 3] {
    let sigma: Vec<f64> = (0..p)
        .map(|_| if rng.gen::<bool>() { 1.0 } else { -1.0 })
        .collect();
    let q = 4 * (p / 4);
    let shared = 1.0 / (p as f64).sqrt();
    let balanced = 1.0 / (q as f64).sqrt();
    let first = DVector::from_fn(p, |i, _| sigma[i] * shared);
    let pattern = |signs: [f64; 4]| {
        DVector::from_fn(p, |i, _| {
            if i < q {
                sigma[i] * signs[i % 4] * balanced
            } else {
                0.0
            }
        })
    };
    [
        first,
        pattern([1.0, 1.0, -1.0, -1.0]),
        pattern([1.0, -1.0, 1.0, -1.0]),
    ]
}

/// Rows `Σ scale·z·direction + ε` with one latent `z ~ N(0, 1)` per row and
/// direction.
fn mix(
    rng: &mut ChaCha8Rng,
    n: usize,
    signals: &[(f64, &DVector<f64>)],
    noise: &Normal<f64>,
) -> DMatrix<f64> {
    let p = signals[0].1.len();
    let mut out = DMatrix::zeros(n, p);
    for r in 0..n {
        let latent: Vec<f64> = signals.iter().map(|_| rng.sample(StandardNormal)).collect();
        for c in 0..p {
            let mut x = noise.sample(rng);
            for ((scale, dir), z) in signals.iter().zip(&latent) {
                x += scale * z * dir[c];
            }
            out[(r, c)] = x;
        }
    }
    out
}

/// Writes `<table>.csv` per dataset and `ground_truth.csv`.
pub fn write_fixture(fixture: &Fixture, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    for t in &fixture.tables {
        let rows: Vec<Vec<String>> = t
            .values
            .row_iter()
            .map(|r| r.iter().map(|&x| fmt_f64(x)).collect())
            .collect();
        write_table(
            &dir.join(format!("{}.csv", t.name)),
            &fixture.feature_names,
            &rows,
        )?;
    }
    if !fixture.ground_truth.is_empty() {
        let mut header = vec!["feature".to_string()];
        header.extend(fixture.ground_truth.iter().map(|(n, _)| n.clone()));
        let rows: Vec<Vec<String>> = fixture
            .feature_names
            .iter()
            .enumerate()
            .map(|(i, f)| {
                let mut row = vec![f.clone()];
                row.extend(fixture.ground_truth.iter().map(|(_, v)| fmt_f64(v[i])));
                row
            })
            .collect();
        write_table(&dir.join("ground_truth.csv"), &header, &rows)?;
    }
    Ok(())
}

/// `|cos|` between two vectors.
pub fn alignment(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    (a.dot(b) / (a.norm() * b.norm())).abs()
}
