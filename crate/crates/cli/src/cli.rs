//! Command-line arguments.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(
    name = "uca",
    version,
    about = "Unique component analysis and contrastive PCA baselines"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit a model and write components, eigenvalues, multipliers, scores and a manifest.
    Fit(FitArgs),
    /// Project a dataset with a saved model.
    Transform(TransformArgs),
    /// Generate synthetic fixtures with planted structure.
    Synth(SynthArgs),
    /// Time one λ_max evaluation on both spectral backends.
    Bench(BenchArgs),
}

#[derive(Debug, Args)]
pub struct FitArgs {
    /// pca, cpca, cpcapp or uca.
    #[arg(long)]
    pub method: String,

    #[arg(long)]
    pub target: PathBuf,

    /// Background CSV; repeat for several backgrounds.
    #[arg(long = "background")]
    pub backgrounds: Vec<PathBuf>,

    #[arg(long, default_value_t = 2)]
    pub k: usize,

    /// dense, product-svd or auto.
    #[arg(long, default_value = "auto")]
    pub backend: String,

    /// error or zero-fill.
    #[arg(long, default_value = "error")]
    pub zero_variance: String,

    #[arg(long, default_value_t = 1e-6)]
    pub tol_grad: f64,

    #[arg(long, default_value_t = 200)]
    pub max_iter: usize,

    /// Recorded in the manifest; fitting itself is deterministic.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,

    #[arg(long)]
    pub out: PathBuf,

    /// Column carried through to score files instead of used as a feature.
    #[arg(long)]
    pub label_column: Option<String>,

    /// cPCA contrast parameter; repeat for one model per value.
    #[arg(long = "lambda")]
    pub lambdas: Vec<f64>,

    /// Exit 0 even when the dual solver does not converge.
    #[arg(long)]
    pub allow_unconverged: bool,

    /// Relative eigenvalue cutoff for the cPCA++ whitening.
    #[arg(long, default_value_t = 1e-10)]
    pub rank_tol: f64,

    /// CSV of known directions (a `feature` column plus one column per
    /// direction); alignments of the first component go to the manifest.
    #[arg(long)]
    pub ground_truth: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TransformArgs {
    /// model.json written by `fit`.
    #[arg(long)]
    pub model: PathBuf,

    #[arg(long)]
    pub data: PathBuf,

    #[arg(long)]
    pub label_column: Option<String>,

    /// Output CSV path.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// planted-unique, two-nuisance or white-noise.
    #[arg(long)]
    pub scenario: String,

    /// Rows per dataset.
    #[arg(long, default_value_t = 200)]
    pub n: usize,

    #[arg(long, default_value_t = 50)]
    pub p: usize,

    #[arg(long, default_value_t = 0)]
    pub seed: u64,

    #[arg(long)]
    pub out: PathBuf,

    /// Scale of the shared signals.
    #[arg(long, default_value_t = 3.0)]
    pub alpha: f64,

    /// Scale of the unique signal.
    #[arg(long, default_value_t = 1.5)]
    pub beta: f64,

    #[arg(long, default_value_t = 0.5)]
    pub noise_sd: f64,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Comma-separated feature counts.
    #[arg(
        long = "p",
        value_delimiter = ',',
        default_value = "1000,2000,3000,4000,5000,6000,7000,8000,9000,10000"
    )]
    pub p_values: Vec<usize>,

    /// Rows per dataset.
    #[arg(long, default_value_t = 100)]
    pub n: usize,

    /// Number of backgrounds.
    #[arg(long, default_value_t = 1)]
    pub m: usize,

    #[arg(long, default_value_t = 10)]
    pub reps: usize,

    /// Multiplier applied to every background.
    #[arg(long, default_value_t = 1.0)]
    pub lambda: f64,

    #[arg(long, default_value_t = 0)]
    pub seed: u64,

    #[arg(long)]
    pub out: PathBuf,
}
