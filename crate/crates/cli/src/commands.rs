//! The `fit`, `transform`, `synth` and `bench` commands.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use uca_core::linalg::standardize;
use uca_core::methods::transform;
use uca_core::{
    BackendSelection, DataSource, FitConfig, FitData, FittedModel, MethodRegistry, RawMatrix,
    SolverOptions, StandardizedMatrix, ZeroVariancePolicy,
};

use crate::bench::{self, BenchConfig};
use crate::cli::{BenchArgs, FitArgs, SynthArgs, TransformArgs};
use crate::error::{CliError, Result};
use crate::io::{
    align_columns, component_names, fmt_f64, read_dataset, write_named_rows, write_scores,
    write_table, Dataset,
};
use crate::model_file::ModelFile;
use crate::synth::{self, Scenario, SynthParams};

/// What `fit` wrote, per fitted model.
#[derive(Debug, Clone)]
pub struct FitOutput {
    pub dir: PathBuf,
    pub model: FittedModel,
    pub manifest: BTreeMap<String, String>,
}

/// Runs `fit`. Outputs are written even when the solver did not converge;
/// the error is returned afterwards unless `--allow-unconverged` is set.
pub fn fit(args: &FitArgs) -> Result<Vec<FitOutput>> {
    let policy: ZeroVariancePolicy = args.zero_variance.parse()?;
    let backend: BackendSelection = args.backend.parse()?;
    let method = MethodRegistry::builtin().get(&args.method)?;
    let label = args.label_column.as_deref();

    let target = read_dataset(&args.target, label)?;
    let names = target.feature_names.clone();
    let backgrounds = args
        .backgrounds
        .iter()
        .map(|path| {
            let d = read_dataset(path, label)?;
            align_columns(&d, &names, &path.display().to_string())
        })
        .collect::<Result<Vec<_>>>()?;

    let target_std = standardize_dataset(&target, policy)?;
    let background_std = backgrounds
        .iter()
        .map(|d| standardize_dataset(d, policy))
        .collect::<Result<Vec<_>>>()?;
    let data = FitData::new(
        target_std,
        background_std
            .into_iter()
            .map(DataSource::Samples)
            .collect(),
    );
    let config = FitConfig {
        k: args.k,
        lambdas: args.lambdas.clone(),
        backend: backend.clone(),
        solver: SolverOptions {
            tol_grad: args.tol_grad,
            max_iter: args.max_iter,
            ..SolverOptions::default()
        },
        rank_tolerance: args.rank_tol,
    };
    config.solver.validate()?;
    let models = method.fit(&data, &config)?;

    let truth = match &args.ground_truth {
        Some(path) => Some(read_ground_truth(path, &names)?),
        None => None,
    };

    let n_models = models.len();
    let mut outputs = Vec::with_capacity(n_models);
    for (i, model) in models.into_iter().enumerate() {
        let dir = if n_models == 1 {
            args.out.clone()
        } else {
            args.out.join(format!("lambda_{}", i + 1))
        };
        std::fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
        write_model_outputs(&dir, &model, &names, &target, &backgrounds)?;
        let manifest = fit_manifest(
            args,
            &backend,
            &model,
            &target,
            &backgrounds,
            truth.as_ref(),
        );
        write_manifest(&dir.join("manifest.txt"), &manifest)?;
        outputs.push(FitOutput {
            dir,
            model,
            manifest,
        });
    }

    if !args.allow_unconverged {
        if let Some(o) = outputs.iter().find(|o| !o.model.converged()) {
            return Err(CliError::Unconverged(format!(
                "method {}, outputs in {}",
                o.model.method,
                o.dir.display()
            )));
        }
    }
    Ok(outputs)
}

fn standardize_dataset(d: &Dataset, policy: ZeroVariancePolicy) -> Result<StandardizedMatrix> {
    let raw = RawMatrix::new(d.values.clone())?.with_feature_names(d.feature_names.clone())?;
    Ok(standardize(&raw, policy)?)
}

fn write_model_outputs(
    dir: &Path,
    model: &FittedModel,
    names: &[String],
    target: &Dataset,
    backgrounds: &[Dataset],
) -> Result<()> {
    let k = model.k();
    write_named_rows(
        &dir.join("components.csv"),
        "feature",
        &component_names(k),
        names,
        &model.components,
    )?;

    let rows: Vec<Vec<String>> = model
        .eigenvalues
        .iter()
        .enumerate()
        .map(|(i, &e)| vec![format!("c{}", i + 1), fmt_f64(e)])
        .collect();
    write_table(
        &dir.join("eigenvalues.csv"),
        &["component".to_string(), "eigenvalue".to_string()],
        &rows,
    )?;

    write_lambdas(&dir.join("lambdas.csv"), model)?;

    let target_scores = transform(model, &RawMatrix::new(target.values.clone())?)?;
    write_scores(
        &dir.join("scores_target.csv"),
        &target_scores,
        labels(target),
    )?;
    // Each background is projected under its own standardization, the one it
    // was fitted with.
    for (j, b) in backgrounds.iter().enumerate() {
        let standardized = match model.background_standardizations.get(j) {
            Some(Some(s)) => s.apply(&b.values)?,
            _ => b.values.clone(),
        };
        let scores = model.project(&standardized)?;
        write_scores(
            &dir.join(format!("scores_background_{}.csv", j + 1)),
            &scores,
            labels(b),
        )?;
    }

    ModelFile::from_model(model, names).save(&dir.join("model.json"))
}

fn labels(d: &Dataset) -> Option<(&str, &[String])> {
    match (&d.label_column, &d.labels) {
        (Some(name), Some(l)) => Some((name.as_str(), l.as_slice())),
        _ => None,
    }
}

/// One row per background. UCA rows also carry the KKT quantities of the
/// solved direction.
fn write_lambdas(path: &Path, model: &FittedModel) -> Result<()> {
    let mut header: Vec<String> = vec!["background".into(), "lambda".into()];
    let rows: Vec<Vec<String>> = match &model.diagnostics {
        Some(d) => {
            header.extend(["constraint_value", "primal_residual", "slackness"].map(String::from));
            model
                .lambdas
                .iter()
                .enumerate()
                .map(|(j, &l)| {
                    vec![
                        (j + 1).to_string(),
                        fmt_f64(l),
                        fmt_f64(d.kkt.primal_residuals[j] + 1.0),
                        fmt_f64(d.kkt.primal_residuals[j]),
                        fmt_f64(d.kkt.slackness[j]),
                    ]
                })
                .collect()
        }
        None => model
            .lambdas
            .iter()
            .enumerate()
            .map(|(j, &l)| vec![(j + 1).to_string(), fmt_f64(l)])
            .collect(),
    };
    write_table(path, &header, &rows)
}

/// Reads a `feature` + directions CSV and orders its rows like `names`.
fn read_ground_truth(path: &Path, names: &[String]) -> Result<Vec<(String, DVector<f64>)>> {
    let d = read_dataset(path, Some("feature"))?;
    let features = d.labels.clone().unwrap_or_default();
    let as_columns = Dataset {
        values: d.values.transpose(),
        feature_names: features,
        labels: None,
        label_column: None,
    };
    let aligned = align_columns(&as_columns, names, &path.display().to_string())?;
    Ok(d.feature_names
        .iter()
        .enumerate()
        .map(|(i, n)| (n.clone(), aligned.values.row(i).transpose()))
        .collect())
}

fn fit_manifest(
    args: &FitArgs,
    backend: &BackendSelection,
    model: &FittedModel,
    target: &Dataset,
    backgrounds: &[Dataset],
    truth: Option<&Vec<(String, DVector<f64>)>>,
) -> BTreeMap<String, String> {
    let mut m = BTreeMap::new();
    let mut put = |k: String, v: String| {
        m.insert(k, v);
    };
    put("tool.name".into(), "uca".into());
    put("tool.version".into(), env!("CARGO_PKG_VERSION").into());
    put("command".into(), "fit".into());
    put("method".into(), model.method.clone());
    put("k.requested".into(), args.k.to_string());
    put("k.returned".into(), model.k().to_string());
    put("backend.requested".into(), backend.to_string());
    put("backend.used".into(), model.backend.clone());
    put("zero_variance".into(), args.zero_variance.clone());
    put("tol_grad".into(), fmt_f64(args.tol_grad));
    put("max_iter".into(), args.max_iter.to_string());
    put("rank_tol".into(), fmt_f64(args.rank_tol));
    put("seed".into(), args.seed.to_string());
    put(
        "allow_unconverged".into(),
        args.allow_unconverged.to_string(),
    );
    put(
        "label_column".into(),
        args.label_column.clone().unwrap_or_default(),
    );
    put("input.target".into(), args.target.display().to_string());
    put("input.target.rows".into(), target.nrows().to_string());
    put("input.features".into(), target.ncols().to_string());
    for (j, (path, d)) in args.backgrounds.iter().zip(backgrounds).enumerate() {
        put(
            format!("input.background.{}", j + 1),
            path.display().to_string(),
        );
        put(
            format!("input.background.{}.rows", j + 1),
            d.nrows().to_string(),
        );
    }
    if let Some(gt) = &args.ground_truth {
        put("input.ground_truth".into(), gt.display().to_string());
    }
    for (j, &l) in model.lambdas.iter().enumerate() {
        put(format!("lambda.{}", j + 1), fmt_f64(l));
    }
    for (i, &e) in model.eigenvalues.iter().enumerate() {
        put(format!("eigenvalue.{}", i + 1), fmt_f64(e));
    }
    put("converged".into(), model.converged().to_string());
    if let Some(d) = &model.diagnostics {
        put("dual.value".into(), fmt_f64(d.dual_value));
        put("dual.evaluations".into(), d.evaluations.to_string());
        put("dual.sweeps".into(), d.sweeps.to_string());
        put(
            "dual.eigenvector_resolved".into(),
            d.eigenvector_resolved.to_string(),
        );
        put(
            "kkt.primal_feasible".into(),
            d.kkt.primal_feasible.to_string(),
        );
        put("kkt.dual_feasible".into(), d.kkt.dual_feasible.to_string());
        put("kkt.max_slackness".into(), fmt_f64(d.kkt.max_slackness));
        put("kkt.eigen_gap".into(), fmt_f64(d.kkt.eigen_gap));
        put("kkt.degenerate".into(), d.kkt.degenerate.to_string());
        for (j, (&r, &s)) in d
            .kkt
            .primal_residuals
            .iter()
            .zip(&d.kkt.slackness)
            .enumerate()
        {
            put(format!("kkt.primal_residual.{}", j + 1), fmt_f64(r));
            put(format!("kkt.slackness.{}", j + 1), fmt_f64(s));
        }
        if let Some(gap) = d.kkt.duality_gap {
            put("kkt.duality_gap".into(), fmt_f64(gap));
        }
    }
    put(
        "degenerate_pairs".into(),
        model.degenerate_pairs.len().to_string(),
    );
    put("warnings.count".into(), model.warnings.len().to_string());
    for (i, w) in model.warnings.iter().enumerate() {
        put(format!("warning.{}", i + 1), w.clone());
    }
    if let Some(truth) = truth {
        let first = model.components.column(0).into_owned();
        for (name, dir) in truth {
            put(
                format!("alignment.{name}"),
                fmt_f64(synth::alignment(&first, dir)),
            );
        }
    }
    m
}

fn write_manifest(path: &Path, manifest: &BTreeMap<String, String>) -> Result<()> {
    let mut text = String::new();
    for (k, v) in manifest {
        text.push_str(k);
        text.push('=');
        text.push_str(&v.replace('\n', " "));
        text.push('\n');
    }
    std::fs::write(path, text).map_err(|e| CliError::io(path, e))
}

/// Runs `transform` and returns the scores it wrote.
pub fn transform_cmd(args: &TransformArgs) -> Result<DMatrix<f64>> {
    let file = ModelFile::load(&args.model)?;
    let data = read_dataset(&args.data, args.label_column.as_deref())?;
    let aligned = align_columns(&data, &file.feature_names, &args.data.display().to_string())?;
    let model = file.to_model();
    let scores = transform(&model, &RawMatrix::new(aligned.values.clone())?)?;
    if let Some(parent) = args.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| CliError::io(parent, e))?;
    }
    write_scores(&args.out, &scores, labels(&aligned))?;
    Ok(scores)
}

pub fn synth_cmd(args: &SynthArgs) -> Result<synth::Fixture> {
    let scenario: Scenario = args.scenario.parse()?;
    let params = SynthParams {
        alpha: args.alpha,
        beta: args.beta,
        noise_sd: args.noise_sd,
        ..SynthParams::new(args.n, args.p, args.seed)
    };
    let fixture = synth::generate(scenario, &params)?;
    synth::write_fixture(&fixture, &args.out)?;
    let mut manifest = BTreeMap::new();
    manifest.insert("tool.name".to_string(), "uca".to_string());
    manifest.insert(
        "tool.version".to_string(),
        env!("CARGO_PKG_VERSION").to_string(),
    );
    manifest.insert("command".to_string(), "synth".to_string());
    manifest.insert("scenario".to_string(), scenario.to_string());
    manifest.insert("n".to_string(), args.n.to_string());
    manifest.insert("p".to_string(), args.p.to_string());
    manifest.insert("seed".to_string(), args.seed.to_string());
    manifest.insert("alpha".to_string(), fmt_f64(args.alpha));
    manifest.insert("beta".to_string(), fmt_f64(args.beta));
    manifest.insert("noise_sd".to_string(), fmt_f64(args.noise_sd));
    write_manifest(&args.out.join("manifest.txt"), &manifest)?;
    Ok(fixture)
}

pub fn bench_cmd(args: &BenchArgs) -> Result<bench::BenchReport> {
    let config = BenchConfig {
        p_values: args.p_values.clone(),
        n: args.n,
        m: args.m,
        reps: args.reps,
        seed: args.seed,
        lambda: args.lambda,
    };
    let report = bench::run(&config)?;
    bench::write_report(&report, &args.out)?;
    Ok(report)
}
