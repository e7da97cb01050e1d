//! Experiment execution: full runs, baselines under the same fold plan,
//! parameter sweeps, and scoring with a saved bundle.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use diamond_core::data::{load_dataset_with_policy, ColumnSchema, Dataset, FoldPlan};
use diamond_core::metrics::{cross_validate, CvOutcome, FittedPipeline, MetricsReport};
use diamond_core::model_io;
use diamond_core::pipeline::{BaselineKind, BaselinePipeline, DsaePipeline, FittedDsae};
use diamond_core::seeding::derive_seed;

use crate::config::ExperimentConfig;
use crate::report::{
    comparison_table, metrics_table, sweep_csv, DatasetSummary, FoldSelection, RunReport,
    SweepPoint,
};
use crate::CliError;

pub const MODEL_KIND_FULL: &str = "dsae-bundle";
pub const MODEL_KIND_BASELINE: &str = "baseline-bundle";

/// Evaluation plan: k-fold evaluates every fold; holdout evaluates fold 0
/// of a stratified k-fold whose k matches the held-out fraction.
pub struct EvalPlan {
    pub plan: FoldPlan,
    pub folds_to_eval: Vec<usize>,
    pub description: String,
}

pub struct LoadedExperiment {
    pub config: ExperimentConfig,
    pub schema: ColumnSchema,
    pub dataset: Dataset,
    pub eval: EvalPlan,
}

pub fn load_experiment(config: ExperimentConfig) -> Result<LoadedExperiment, CliError> {
    let schema = ColumnSchema::load(&config.data.schema).map_err(CliError::from_data_phase)?;
    let dataset = load_dataset_with_policy(&config.data.path, &schema, config.missing_policy())
        .map_err(CliError::from_data_phase)?;

    let plan_seed = derive_seed(config.seed, "fold-plan", 0);
    let eval = match config.eval.mode.as_str() {
        "holdout" => {
            let k = ((1.0 / config.eval.holdout_test_fraction).round() as usize).max(2);
            let plan = diamond_core::data::stratified_kfold(&dataset, k, plan_seed)
                .map_err(CliError::from_data_phase)?;
            let pct_test = 100.0 / k as f64;
            EvalPlan {
                plan,
                folds_to_eval: vec![0],
                description: format!(
                    "holdout ({:.0}/{:.0} stratified split)",
                    100.0 - pct_test,
                    pct_test
                ),
            }
        }
        _ => {
            let k = config.eval.folds;
            let plan = diamond_core::data::stratified_kfold(&dataset, k, plan_seed)
                .map_err(CliError::from_data_phase)?;
            EvalPlan {
                plan,
                folds_to_eval: (0..k).collect(),
                description: format!("{k}-fold cross-validation"),
            }
        }
    };

    Ok(LoadedExperiment {
        config,
        schema,
        dataset,
        eval,
    })
}

pub struct RunArtifacts {
    pub out_dir: PathBuf,
    pub report: RunReport,
    pub table: String,
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)
            .map_err(|e| CliError::Data(format!("mkdir {}: {e}", parent.display())))?;
    }
    std::fs::write(path, contents)
        .map_err(|e| CliError::Data(format!("write {}: {e}", path.display())))
}

fn dataset_summary(ds: &Dataset) -> DatasetSummary {
    DatasetSummary {
        name: ds.name().to_string(),
        samples: ds.n_samples(),
        features: ds.n_features(),
        classes: ds.class_count(),
    }
}

fn selection_summaries(fitted: &[FittedDsae], folds: &[usize]) -> Vec<FoldSelection> {
    fitted
        .iter()
        .zip(folds)
        .map(|(f, &fold)| FoldSelection {
            fold,
            alpha: Some(f.selection.alpha),
            selected_features: Some(f.selection.selected.len()),
            expanded_features: Some(f.selection.state.theta.len()),
        })
        .collect()
}

/// Run the full pipeline under the configured evaluation plan and write
/// the report set. Timings go only to `run.log`, so everything else is
/// byte-identical across identical runs.
pub fn run_experiment(exp: &LoadedExperiment) -> Result<RunArtifacts, CliError> {
    let started = Instant::now();
    let out_dir = exp.config.output_dir.clone();
    let pipeline = DsaePipeline {
        config: exp.config.pipeline_config(),
    };

    let outcome = cross_validate(
        &pipeline,
        &exp.dataset,
        &exp.eval.plan,
        exp.schema.positive_class,
        exp.config.seed,
        Some(&exp.eval.folds_to_eval),
    )
    .map_err(CliError::from_compute_phase)?;

    let reference = if exp.config.report.reference.is_empty() {
        None
    } else {
        Some(exp.config.report.reference.clone())
    };
    let report = RunReport {
        run: exp.config.name.clone(),
        dataset: dataset_summary(&exp.dataset),
        eval_mode: exp.eval.description.clone(),
        seed: exp.config.seed,
        metrics: outcome.report.clone(),
        reference: reference.clone(),
        selection_summary: selection_summaries(&outcome.fitted, &exp.eval.folds_to_eval),
    };

    let title = format!(
        "{} | dataset {} (N={}, M={}, C={}) | {} | seed {}",
        exp.config.name,
        exp.dataset.name(),
        exp.dataset.n_samples(),
        exp.dataset.n_features(),
        exp.dataset.class_count(),
        exp.eval.description,
        exp.config.seed
    );
    let table = metrics_table(
        &title,
        &outcome.report,
        &exp.eval.folds_to_eval,
        reference.as_deref(),
    );

    write_run_dir(&out_dir, exp, &report, &table, &outcome, MODEL_KIND_FULL)?;
    append_log(
        &out_dir,
        &format!(
            "run={} seed={} elapsed_s={:.2}\n",
            exp.config.name,
            exp.config.seed,
            started.elapsed().as_secs_f64()
        ),
    )?;

    Ok(RunArtifacts {
        out_dir,
        report,
        table,
    })
}

fn write_run_dir<F: FittedPipeline + serde::Serialize>(
    out_dir: &Path,
    exp: &LoadedExperiment,
    report: &RunReport,
    table: &str,
    outcome: &CvOutcome<F>,
    model_kind: &str,
) -> Result<(), CliError> {
    write_file(&out_dir.join("config_echo.toml"), &exp.config.echo_toml()?)?;
    std::fs::create_dir_all(out_dir.join("models"))
        .map_err(|e| CliError::Data(format!("mkdir models: {e}")))?;
    exp.eval
        .plan
        .save(out_dir.join("fold_plan.json"))
        .map_err(CliError::from_data_phase)?;
    write_file(&out_dir.join("metrics.txt"), table)?;
    let json = serde_json::to_string_pretty(report)
        .map_err(|e| CliError::Numerical(format!("report serialization: {e}")))?;
    write_file(&out_dir.join("report.json"), &json)?;
    for (fitted, &fold) in outcome.fitted.iter().zip(&outcome.evaluated_folds) {
        model_io::save_model(
            out_dir.join("models").join(format!("fold_{}.json", fold + 1)),
            model_kind,
            fitted,
        )
        .map_err(CliError::from_data_phase)?;
    }
    Ok(())
}

fn append_log(out_dir: &Path, line: &str) -> Result<(), CliError> {
    let path = out_dir.join("run.log");
    let mut file = std::fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(&path)
        .map_err(|e| CliError::Data(format!("open {}: {e}", path.display())))?;
    file.write_all(line.as_bytes())
        .map_err(|e| CliError::Data(format!("write {}: {e}", path.display())))
}

/// Run one named baseline under the exact fold plan of the full run.
pub fn run_baseline(
    exp: &LoadedExperiment,
    kind: BaselineKind,
) -> Result<(MetricsReport, String), CliError> {
    let started = Instant::now();
    let pipeline = BaselinePipeline {
        kind,
        config: exp.config.pipeline_config(),
    };
    let outcome = cross_validate(
        &pipeline,
        &exp.dataset,
        &exp.eval.plan,
        exp.schema.positive_class,
        exp.config.seed,
        Some(&exp.eval.folds_to_eval),
    )
    .map_err(CliError::from_compute_phase)?;

    let out_dir = exp.config.output_dir.join("baselines").join(kind.name());
    let title = format!(
        "baseline {} | dataset {} | {} | seed {}",
        kind.name(),
        exp.dataset.name(),
        exp.eval.description,
        exp.config.seed
    );
    let table = metrics_table(&title, &outcome.report, &exp.eval.folds_to_eval, None);
    let report = RunReport {
        run: format!("{}::{}", exp.config.name, kind.name()),
        dataset: dataset_summary(&exp.dataset),
        eval_mode: exp.eval.description.clone(),
        seed: exp.config.seed,
        metrics: outcome.report.clone(),
        reference: None,
        selection_summary: Vec::new(),
    };
    write_run_dir(&out_dir, exp, &report, &table, &outcome, MODEL_KIND_BASELINE)?;
    append_log(
        &exp.config.output_dir,
        &format!(
            "baseline={} seed={} elapsed_s={:.2}\n",
            kind.name(),
            exp.config.seed,
            started.elapsed().as_secs_f64()
        ),
    )?;
    Ok((outcome.report, table))
}

/// Run every baseline plus the full pipeline and write one merged
/// comparison table.
pub fn run_baseline_comparison(exp: &LoadedExperiment) -> Result<String, CliError> {
    let full = run_experiment(exp)?;
    let mut rows: Vec<(String, MetricsReport)> =
        vec![("full".to_string(), full.report.metrics.clone())];
    for kind in [
        BaselineKind::SvmRaw,
        BaselineKind::L1Only,
        BaselineKind::WlpdpOnly,
        BaselineKind::FssaeOnly,
    ] {
        let (report, _) = run_baseline(exp, kind)?;
        rows.push((kind.name().to_string(), report));
    }
    let borrowed: Vec<(String, &MetricsReport)> =
        rows.iter().map(|(n, r)| (n.clone(), r)).collect();
    let table = format!(
        "{} | dataset {} | {} | seed {}\n{}",
        exp.config.name,
        exp.dataset.name(),
        exp.eval.description,
        exp.config.seed,
        comparison_table(&borrowed)
    );
    write_file(&exp.config.output_dir.join("comparison.txt"), &table)?;
    Ok(table)
}

/// Sweep axis: the sparsity target alone, or the full (lambda, beta) grid.
#[derive(Debug, Clone)]
pub enum SweepAxis {
    Rho { values: Vec<f64> },
    LambdaBeta { lambdas: Vec<f64>, betas: Vec<f64> },
}

/// Run the full pipeline per grid point under a fixed plan and seed, and
/// write the comma-separated series.
pub fn run_sweep(exp: &LoadedExperiment, axis: &SweepAxis) -> Result<PathBuf, CliError> {
    let grid: Vec<Vec<f64>> = match axis {
        SweepAxis::Rho { values } => {
            if values.is_empty() {
                return Err(CliError::Config("rho sweep needs at least one value".into()));
            }
            values.iter().map(|&v| vec![v]).collect()
        }
        SweepAxis::LambdaBeta { lambdas, betas } => {
            if lambdas.is_empty() || betas.is_empty() {
                return Err(CliError::Config("lambda/beta grid must not be empty".into()));
            }
            let mut grid = Vec::new();
            for &l in lambdas {
                for &b in betas {
                    grid.push(vec![l, b]);
                }
            }
            grid
        }
    };

    let mut points = Vec::with_capacity(grid.len());
    for values in &grid {
        let mut config = exp.config.clone();
        match axis {
            SweepAxis::Rho { .. } => {
                config.expansion.rho = values[0];
            }
            SweepAxis::LambdaBeta { .. } => {
                config.expansion.lambda = values[0];
                config.expansion.beta = values[1];
            }
        }
        config.validate()?;
        let pipeline = DsaePipeline {
            config: config.pipeline_config(),
        };
        let outcome = cross_validate(
            &pipeline,
            &exp.dataset,
            &exp.eval.plan,
            exp.schema.positive_class,
            config.seed,
            Some(&exp.eval.folds_to_eval),
        )
        .map_err(CliError::from_compute_phase)?;
        points.push(SweepPoint {
            axis_values: values.clone(),
            mean_acc: outcome.report.mean.acc,
            std_acc: outcome.report.std.acc,
        });
    }

    let (names, file): (Vec<&str>, &str) = match axis {
        SweepAxis::Rho { .. } => (vec!["rho"], "sweep_rho.csv"),
        SweepAxis::LambdaBeta { .. } => (vec!["lambda", "beta"], "sweep_lambda_beta.csv"),
    };
    let csv = sweep_csv(&names, &points);
    let path = exp.config.output_dir.join("sweeps").join(file);
    write_file(&path, &csv)?;
    Ok(path)
}

/// Score a CSV with a saved full-pipeline bundle; writes one predicted raw
/// label per row and returns the accuracy when the file carries labels.
pub fn predict_with_bundle(
    model_path: &Path,
    data_path: &Path,
    schema_path: &Path,
    output_path: &Path,
) -> Result<Option<f64>, CliError> {
    let schema = ColumnSchema::load(schema_path).map_err(CliError::from_data_phase)?;
    let dataset = load_dataset_with_policy(
        data_path,
        &schema,
        diamond_core::data::MissingPolicy::Reject,
    )
    .map_err(CliError::from_data_phase)?;
    let bundle: FittedDsae =
        model_io::load_model(model_path, MODEL_KIND_FULL).map_err(CliError::from_data_phase)?;

    let preds = bundle
        .predict(dataset.features())
        .map_err(CliError::from_compute_phase)?;

    let mut out = String::from("prediction\n");
    for &p in &preds {
        out.push_str(&format!("{}\n", schema.label_values[p]));
    }
    write_file(output_path, &out)?;

    let correct = preds
        .iter()
        .zip(dataset.labels())
        .filter(|(p, l)| p == l)
        .count();
    Ok(Some(correct as f64 / dataset.n_samples() as f64))
}
