//! Experiment configuration: a strict TOML format where unknown keys are
//! errors and every default is materialized back into the echo written
//! next to each run's results.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use diamond_core::ensemble::EnsembleConfig;
use diamond_core::fssae::{FinetuneOptimizer, FssaeConfig};
use diamond_core::pipeline::DsaePipelineConfig;
use diamond_core::reduction::{SigmaPolicy, WlpdpConfig};
use diamond_core::svm::{Kernel, SvmConfig};
use diamond_core::NormMethod;

use crate::CliError;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    #[serde(default = "default_seed")]
    pub seed: u64,
    pub output_dir: PathBuf,
    pub data: DataSection,
    #[serde(default)]
    pub eval: EvalSection,
    pub expansion: ExpansionSection,
    #[serde(default)]
    pub selection: SelectionSection,
    #[serde(default)]
    pub projection: ProjectionSection,
    #[serde(default)]
    pub ensemble: EnsembleSection,
    #[serde(default)]
    pub svm: SvmSection,
    #[serde(default)]
    pub report: ReportSection,
}

fn default_seed() -> u64 {
    42
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSection {
    pub path: PathBuf,
    pub schema: PathBuf,
    #[serde(default = "default_normalization")]
    pub normalization: String,
    #[serde(default = "default_missing_policy")]
    pub missing_policy: String,
}

fn default_normalization() -> String {
    "min_max".into()
}

fn default_missing_policy() -> String {
    "reject".into()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalSection {
    /// "kfold" or "holdout".
    pub mode: String,
    pub folds: usize,
    /// Held-out fraction for holdout mode.
    pub holdout_test_fraction: f64,
}

impl Default for EvalSection {
    fn default() -> Self {
        EvalSection {
            mode: "kfold".into(),
            folds: 5,
            holdout_test_fraction: 0.2,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExpansionSection {
    pub hidden_units: Vec<usize>,
    #[serde(default = "default_lambda")]
    pub lambda: f64,
    #[serde(default = "default_beta")]
    pub beta: f64,
    #[serde(default = "default_rho")]
    pub rho: f64,
    #[serde(default)]
    pub embed_dims: Vec<usize>,
    #[serde(default = "default_min_original_fraction")]
    pub min_original_fraction: f64,
    #[serde(default = "default_pretrain_iterations")]
    pub pretrain_iterations: usize,
    #[serde(default = "default_pretrain_learn_rate")]
    pub pretrain_learn_rate: f64,
    #[serde(default = "default_momentum")]
    pub momentum: f64,
    #[serde(default = "default_finetune_iterations")]
    pub finetune_iterations: usize,
    #[serde(default = "default_finetune_optimizer")]
    pub finetune_optimizer: String,
    #[serde(default = "default_finetune_learn_rate")]
    pub finetune_learn_rate: f64,
}

fn default_lambda() -> f64 {
    1e-5
}
fn default_beta() -> f64 {
    1.0
}
fn default_rho() -> f64 {
    0.05
}
fn default_min_original_fraction() -> f64 {
    0.5
}
fn default_pretrain_iterations() -> usize {
    200
}
fn default_pretrain_learn_rate() -> f64 {
    0.5
}
fn default_momentum() -> f64 {
    0.9
}
fn default_finetune_iterations() -> usize {
    300
}
fn default_finetune_optimizer() -> String {
    "scg".into()
}
fn default_finetune_learn_rate() -> f64 {
    0.5
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SelectionSection {
    pub alpha_grid: Vec<f64>,
    pub max_iterations: usize,
    pub tolerance: f64,
    pub min_keep_fraction: f64,
    pub validation_fraction: f64,
}

impl Default for SelectionSection {
    fn default() -> Self {
        SelectionSection {
            alpha_grid: vec![0.001, 0.01, 0.1, 1.0],
            max_iterations: 2000,
            tolerance: 1e-8,
            min_keep_fraction: 0.1,
            validation_fraction: 0.2,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProjectionSection {
    pub gamma: f64,
    /// 0 = auto: min(4 * class_count, subspace_dim - 1).
    pub output_dim: usize,
    pub k_nn: usize,
    /// 0 = median pairwise distance of the subset.
    pub sigma: f64,
    pub eigen_reg_scale: f64,
}

impl Default for ProjectionSection {
    fn default() -> Self {
        ProjectionSection {
            gamma: 0.1,
            output_dim: 0,
            k_nn: 7,
            sigma: 0.0,
            eigen_reg_scale: 1e-6,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleSection {
    pub subsets: usize,
    pub sample_fraction: f64,
    pub feature_fraction: f64,
    pub weight_candidates: usize,
    pub validation_fraction: f64,
}

impl Default for EnsembleSection {
    fn default() -> Self {
        EnsembleSection {
            subsets: 10,
            sample_fraction: 0.7,
            feature_fraction: 0.5,
            weight_candidates: 200,
            validation_fraction: 0.2,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SvmSection {
    /// "rbf" or "linear".
    pub kernel: String,
    /// 0 = auto: 1 / feature_count.
    pub rbf_gamma: f64,
    pub c: f64,
    pub tolerance: f64,
    pub max_passes: usize,
    pub max_total_passes: usize,
}

impl Default for SvmSection {
    fn default() -> Self {
        SvmSection {
            kernel: "rbf".into(),
            rbf_gamma: 0.0,
            c: 1.0,
            tolerance: 1e-3,
            max_passes: 5,
            max_total_passes: 400,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct ReportSection {
    /// Optional published values printed as a comparison column:
    /// [acc, prec, sens, spec, f1] in percent.
    #[serde(default)]
    pub reference: Vec<f64>,
}

impl ExperimentConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<ExperimentConfig, CliError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let cfg: ExperimentConfig = toml::from_str(&text)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Check every field against the preconditions of the module that will
    /// consume it; errors carry the config path of the offending field.
    pub fn validate(&self) -> Result<(), CliError> {
        let mut errors = Vec::new();
        let mut check = |ok: bool, field: &str, message: String| {
            if !ok {
                errors.push(format!("{field}: {message}"));
            }
        };

        check(!self.name.is_empty(), "name", "must not be empty".into());
        check(
            matches!(self.data.normalization.as_str(), "min_max" | "z_score"),
            "data.normalization",
            format!("unknown method {:?}", self.data.normalization),
        );
        check(
            matches!(self.data.missing_policy.as_str(), "reject" | "impute_mean"),
            "data.missing_policy",
            format!("unknown policy {:?}", self.data.missing_policy),
        );
        check(
            matches!(self.eval.mode.as_str(), "kfold" | "holdout"),
            "eval.mode",
            format!("unknown mode {:?}", self.eval.mode),
        );
        check(self.eval.folds >= 2, "eval.folds", "must be >= 2".into());
        check(
            self.eval.holdout_test_fraction > 0.0 && self.eval.holdout_test_fraction < 1.0,
            "eval.holdout_test_fraction",
            "must be in (0, 1)".into(),
        );

        check(
            !self.expansion.hidden_units.is_empty()
                && self.expansion.hidden_units.iter().all(|&h| h > 0),
            "expansion.hidden_units",
            "need a non-empty chain of positive unit counts".into(),
        );
        check(
            self.expansion.rho > 0.0 && self.expansion.rho < 1.0,
            "expansion.rho",
            format!("{} violates the (0, 1) constraint", self.expansion.rho),
        );
        check(
            self.expansion.lambda >= 0.0,
            "expansion.lambda",
            "must be >= 0".into(),
        );
        check(
            self.expansion.beta >= 0.0,
            "expansion.beta",
            "must be >= 0".into(),
        );
        check(
            self.expansion.embed_dims.is_empty()
                || self.expansion.embed_dims.len() == self.expansion.hidden_units.len() - 1,
            "expansion.embed_dims",
            "must be empty or have one entry per embed unit".into(),
        );
        check(
            (0.0..=1.0).contains(&self.expansion.min_original_fraction),
            "expansion.min_original_fraction",
            "must be in [0, 1]".into(),
        );
        check(
            self.expansion.pretrain_iterations >= 1,
            "expansion.pretrain_iterations",
            "must be >= 1".into(),
        );
        check(
            self.expansion.pretrain_learn_rate > 0.0,
            "expansion.pretrain_learn_rate",
            "must be > 0".into(),
        );
        check(
            matches!(self.expansion.finetune_optimizer.as_str(), "scg" | "gd"),
            "expansion.finetune_optimizer",
            format!("unknown optimizer {:?}", self.expansion.finetune_optimizer),
        );

        check(
            !self.selection.alpha_grid.is_empty()
                && self.selection.alpha_grid.iter().all(|&a| a >= 0.0),
            "selection.alpha_grid",
            "need at least one alpha >= 0".into(),
        );
        check(
            self.selection.min_keep_fraction >= 0.0 && self.selection.min_keep_fraction <= 1.0,
            "selection.min_keep_fraction",
            "must be in [0, 1]".into(),
        );
        check(
            self.selection.validation_fraction > 0.0 && self.selection.validation_fraction < 1.0,
            "selection.validation_fraction",
            "must be in (0, 1)".into(),
        );

        check(
            self.projection.gamma >= 0.0,
            "projection.gamma",
            "must be >= 0".into(),
        );
        check(self.projection.k_nn >= 1, "projection.k_nn", "must be >= 1".into());

        check(
            self.ensemble.subsets >= 1,
            "ensemble.subsets",
            "must be >= 1".into(),
        );
        check(
            self.ensemble.sample_fraction > 0.0 && self.ensemble.sample_fraction <= 1.0,
            "ensemble.sample_fraction",
            "must be in (0, 1]".into(),
        );
        check(
            self.ensemble.feature_fraction > 0.0 && self.ensemble.feature_fraction <= 1.0,
            "ensemble.feature_fraction",
            "must be in (0, 1]".into(),
        );

        check(
            matches!(self.svm.kernel.as_str(), "rbf" | "linear"),
            "svm.kernel",
            format!("unknown kernel {:?}", self.svm.kernel),
        );
        check(self.svm.c > 0.0, "svm.c", "must be > 0".into());

        check(
            self.report.reference.is_empty() || self.report.reference.len() == 5,
            "report.reference",
            "must list exactly [acc, prec, sens, spec, f1] percentages".into(),
        );

        if errors.is_empty() {
            Ok(())
        } else {
            Err(CliError::Config(errors.join("\n")))
        }
    }

    pub fn normalization(&self) -> NormMethod {
        match self.data.normalization.as_str() {
            "z_score" => NormMethod::ZScore,
            _ => NormMethod::MinMax,
        }
    }

    pub fn missing_policy(&self) -> diamond_core::data::MissingPolicy {
        match self.data.missing_policy.as_str() {
            "impute_mean" => diamond_core::data::MissingPolicy::ImputeMean,
            _ => diamond_core::data::MissingPolicy::Reject,
        }
    }

    /// Assemble the core pipeline configuration from the validated file.
    pub fn pipeline_config(&self) -> DsaePipelineConfig {
        DsaePipelineConfig {
            normalization: self.normalization(),
            fssae: FssaeConfig {
                hidden_units: self.expansion.hidden_units.clone(),
                lambda: self.expansion.lambda,
                beta: self.expansion.beta,
                rho: self.expansion.rho,
                embed_dims: self.expansion.embed_dims.clone(),
                min_original_fraction: self.expansion.min_original_fraction,
                pretrain_iterations: self.expansion.pretrain_iterations,
                pretrain_learn_rate: self.expansion.pretrain_learn_rate,
                momentum: self.expansion.momentum,
                finetune_iterations: self.expansion.finetune_iterations,
                finetune_optimizer: match self.expansion.finetune_optimizer.as_str() {
                    "gd" => FinetuneOptimizer::Gd {
                        learn_rate: self.expansion.finetune_learn_rate,
                    },
                    _ => FinetuneOptimizer::Scg,
                },
                seed: self.seed,
            },
            alpha_grid: self.selection.alpha_grid.clone(),
            ista_max_iter: self.selection.max_iterations,
            ista_tol: self.selection.tolerance,
            min_keep_fraction: self.selection.min_keep_fraction,
            alpha_validation_fraction: self.selection.validation_fraction,
            ensemble: EnsembleConfig {
                subsets: self.ensemble.subsets,
                delta_s: self.ensemble.sample_fraction,
                delta_f: self.ensemble.feature_fraction,
                wlpdp: WlpdpConfig {
                    gamma: self.projection.gamma,
                    output_dim: self.projection.output_dim,
                    k_nn: self.projection.k_nn,
                    sigma: if self.projection.sigma > 0.0 {
                        SigmaPolicy::Fixed(self.projection.sigma)
                    } else {
                        SigmaPolicy::Median
                    },
                    eigen_reg_scale: self.projection.eigen_reg_scale,
                },
                svm: SvmConfig {
                    kernel: match self.svm.kernel.as_str() {
                        "linear" => Kernel::Linear,
                        _ => Kernel::Rbf {
                            gamma: self.svm.rbf_gamma,
                        },
                    },
                    c: self.svm.c,
                    tol: self.svm.tolerance,
                    max_passes: self.svm.max_passes,
                    max_total_passes: self.svm.max_total_passes,
                    seed: self.seed,
                },
                weight_candidates: self.ensemble.weight_candidates,
                validation_fraction: self.ensemble.validation_fraction,
                seed: self.seed,
            },
        }
    }

    /// The effective configuration with every default filled in, as TOML.
    pub fn echo_toml(&self) -> Result<String, CliError> {
        toml::to_string_pretty(self)
            .map_err(|e| CliError::Config(format!("config echo serialization: {e}")))
    }
}
