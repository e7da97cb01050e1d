//! End-to-end pipelines: the full diamond path (normalize, expand with the
//! FSSAE, select with L1, project + vote with the bagged ensemble) and the
//! single-stage ablations used as in-repo baselines.

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::data::{
    apply_normalization, normalize, stratified_split, Dataset, NormMethod, NormalizationSpec,
};
use crate::ensemble::{fit_ensemble, predict_ensemble, EnsembleConfig, EnsembleModel};
use crate::error::{Error, Result};
use crate::fssae::{expand_features, fine_tune, pretrain_fssae, FssaeConfig, FssaeModel};
use crate::metrics::{FittedPipeline, Pipeline};
use crate::reduction::{ista_fit, l1_select, L1SelectorState};
use crate::seeding::derive_seed;
use crate::svm::{train_svm, SvmConfig, SvmModel};

/// Full-pipeline configuration; per-fold seeds are injected at fit time, so
/// the seed fields inside `fssae` and `ensemble` act as defaults only.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DsaePipelineConfig {
    pub normalization: NormMethod,
    pub fssae: FssaeConfig,
    /// Regularization grid searched on an inner validation split.
    pub alpha_grid: Vec<f64>,
    pub ista_max_iter: usize,
    pub ista_tol: f64,
    /// Selection keeps at least `max(3, ceil(fraction * expanded_dim))`
    /// features.
    pub min_keep_fraction: f64,
    /// Inner split used by the alpha grid search.
    pub alpha_validation_fraction: f64,
    pub ensemble: EnsembleConfig,
}

/// Outcome of the L1 selection stage, kept in the fitted bundle for
/// reports.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SelectionOutcome {
    pub alpha: f64,
    pub selected: Vec<usize>,
    pub state: L1SelectorState,
}

/// The serializable full-pipeline bundle; prediction is reproducible from
/// this value alone.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FittedDsae {
    pub normalization: NormalizationSpec,
    pub fssae: FssaeModel,
    pub selection: SelectionOutcome,
    pub ensemble: EnsembleModel,
}

pub struct DsaePipeline {
    pub config: DsaePipelineConfig,
}

fn encode_pm1(labels: &[usize]) -> Array1<f64> {
    Array1::from_iter(labels.iter().map(|&l| if l == 1 { 1.0 } else { -1.0 }))
}

/// Column standardization for the selection stage; zero-variance columns
/// keep std 1 so they center to constant zero and drop out naturally.
fn standardize_columns(x: &Array2<f64>) -> (Array2<f64>, Vec<f64>, Vec<f64>) {
    let n = x.nrows() as f64;
    let mut out = x.clone();
    let mut means = Vec::with_capacity(x.ncols());
    let mut stds = Vec::with_capacity(x.ncols());
    for mut col in out.columns_mut() {
        let mean = col.sum() / n;
        let var = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        let std = if var > 0.0 { var.sqrt() } else { 1.0 };
        col.mapv_inplace(|v| (v - mean) / std);
        means.push(mean);
        stds.push(std);
    }
    (out, means, stds)
}

/// Grid-search alpha on an inner split (scored by a plain SVM on the
/// selected columns), then refit on all rows with the winner. Theta is
/// mapped back to the unstandardized feature scale.
fn select_features(
    expanded: &Array2<f64>,
    labels: &[usize],
    cfg: &DsaePipelineConfig,
    seed: u64,
) -> Result<SelectionOutcome> {
    if cfg.alpha_grid.is_empty() {
        return Err(Error::invalid("alpha grid must not be empty"));
    }
    let m_hat = expanded.ncols();
    let min_keep = ((m_hat as f64 * cfg.min_keep_fraction).ceil() as usize)
        .max(3)
        .min(m_hat);

    let (standardized, _, stds) = standardize_columns(expanded);
    let targets = encode_pm1(labels);

    let alpha = if cfg.alpha_grid.len() == 1 {
        cfg.alpha_grid[0]
    } else {
        let (train_idx, val_idx) = stratified_split(
            labels,
            2,
            cfg.alpha_validation_fraction,
            derive_seed(seed, "alpha-split", 0),
        )?;
        let x_tr = standardized.select(ndarray::Axis(0), &train_idx);
        let y_tr: Vec<usize> = train_idx.iter().map(|&i| labels[i]).collect();
        let t_tr = encode_pm1(&y_tr);
        let x_val = standardized.select(ndarray::Axis(0), &val_idx);
        let y_val: Vec<usize> = val_idx.iter().map(|&i| labels[i]).collect();

        let mut best = (cfg.alpha_grid[0], -1.0f64);
        for (gi, &alpha) in cfg.alpha_grid.iter().enumerate() {
            let state = ista_fit(&x_tr, &t_tr, alpha, cfg.ista_max_iter, cfg.ista_tol)?;
            let selected = l1_select(&state, min_keep)?;
            let sel_tr = x_tr.select(ndarray::Axis(1), &selected);
            let sel_val = x_val.select(ndarray::Axis(1), &selected);
            let svm_cfg = SvmConfig {
                seed: derive_seed(seed, "alpha-svm", gi as u64),
                ..SvmConfig::default()
            };
            let svm = train_svm(&sel_tr, &y_tr, &svm_cfg)?;
            let preds = svm.predict(&sel_val)?;
            let acc = preds.iter().zip(&y_val).filter(|(p, l)| p == l).count() as f64
                / y_val.len() as f64;
            if acc > best.1 {
                best = (alpha, acc);
            }
        }
        best.0
    };

    let mut state = ista_fit(&standardized, &targets, alpha, cfg.ista_max_iter, cfg.ista_tol)?;
    let selected = l1_select(&state, min_keep)?;
    // Report coefficients on the original feature scale.
    for (j, theta) in state.theta.iter_mut().enumerate() {
        *theta /= stds[j];
    }
    Ok(SelectionOutcome {
        alpha,
        selected,
        state,
    })
}

impl Pipeline for DsaePipeline {
    type Fitted = FittedDsae;

    fn fit(&self, train: &Dataset, seed: u64) -> Result<FittedDsae> {
        if train.class_count() != 2 {
            return Err(Error::invalid(
                "the full pipeline currently supports binary problems only",
            ));
        }
        let (normalized, norm_spec) = normalize(train, self.config.normalization)?;

        let mut fssae_cfg = self.config.fssae.clone();
        fssae_cfg.seed = derive_seed(seed, "fssae", 0);
        let model = pretrain_fssae(&normalized, &fssae_cfg)?;
        let model = fine_tune(model, &normalized)?;

        let expanded = expand_features(&model, normalized.features())?;
        let selection = select_features(
            &expanded.data,
            normalized.labels(),
            &self.config,
            derive_seed(seed, "selection", 0),
        )?;

        let reduced = expanded.data.select(ndarray::Axis(1), &selection.selected);
        let mut ens_cfg = self.config.ensemble.clone();
        ens_cfg.seed = derive_seed(seed, "ensemble", 0);
        let ensemble = fit_ensemble(&reduced, normalized.labels(), train.class_count(), &ens_cfg)?;

        Ok(FittedDsae {
            normalization: norm_spec,
            fssae: model,
            selection,
            ensemble,
        })
    }
}

impl FittedPipeline for FittedDsae {
    fn predict(&self, features: &Array2<f64>) -> Result<Vec<usize>> {
        let ds = Dataset::new(
            features.clone(),
            vec![0; features.nrows()],
            1,
            "predict-input",
        )?;
        let normalized = apply_normalization(&ds, &self.normalization)?;
        let expanded = expand_features(&self.fssae, normalized.features())?;
        let reduced = expanded
            .data
            .select(ndarray::Axis(1), &self.selection.selected);
        predict_ensemble(&self.ensemble, &reduced)
    }
}

// ---- baselines -------------------------------------------------------------

/// Which in-repo baseline to run; all share fold plans with the full run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineKind {
    /// Normalize, then SVM on the original features.
    SvmRaw,
    /// Normalize, L1-select original features, SVM on the survivors.
    L1Only,
    /// Normalize, then the bagged projection ensemble on original features.
    WlpdpOnly,
    /// Normalize, expand with the FSSAE, SVM on the expanded features.
    FssaeOnly,
}

impl BaselineKind {
    pub fn name(&self) -> &'static str {
        match self {
            BaselineKind::SvmRaw => "svm_raw",
            BaselineKind::L1Only => "l1_only",
            BaselineKind::WlpdpOnly => "wlpdp_only",
            BaselineKind::FssaeOnly => "fssae_only",
        }
    }

    pub fn parse(name: &str) -> Option<BaselineKind> {
        match name {
            "svm_raw" => Some(BaselineKind::SvmRaw),
            "l1_only" => Some(BaselineKind::L1Only),
            "wlpdp_only" => Some(BaselineKind::WlpdpOnly),
            "fssae_only" => Some(BaselineKind::FssaeOnly),
            _ => None,
        }
    }
}

pub struct BaselinePipeline {
    pub kind: BaselineKind,
    pub config: DsaePipelineConfig,
}

/// Fitted baseline bundle; the stages not exercised stay `None`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FittedBaseline {
    pub kind: BaselineKind,
    pub normalization: NormalizationSpec,
    pub fssae: Option<FssaeModel>,
    pub selection: Option<SelectionOutcome>,
    pub ensemble: Option<EnsembleModel>,
    pub svm: Option<SvmModel>,
    /// Feature columns the final SVM consumes (for the selection paths).
    pub svm_columns: Option<Vec<usize>>,
}

impl Pipeline for BaselinePipeline {
    type Fitted = FittedBaseline;

    fn fit(&self, train: &Dataset, seed: u64) -> Result<FittedBaseline> {
        let (normalized, norm_spec) = normalize(train, self.config.normalization)?;
        let labels = normalized.labels().to_vec();
        let mut fitted = FittedBaseline {
            kind: self.kind,
            normalization: norm_spec,
            fssae: None,
            selection: None,
            ensemble: None,
            svm: None,
            svm_columns: None,
        };

        match self.kind {
            BaselineKind::SvmRaw => {
                let cfg = SvmConfig {
                    seed: derive_seed(seed, "baseline-svm", 0),
                    ..self.config.ensemble.svm.clone()
                };
                fitted.svm = Some(train_svm(normalized.features(), &labels, &cfg)?);
            }
            BaselineKind::L1Only => {
                let selection = select_features(
                    normalized.features(),
                    &labels,
                    &self.config,
                    derive_seed(seed, "selection", 0),
                )?;
                let reduced = normalized
                    .features()
                    .select(ndarray::Axis(1), &selection.selected);
                let cfg = SvmConfig {
                    seed: derive_seed(seed, "baseline-svm", 0),
                    ..self.config.ensemble.svm.clone()
                };
                fitted.svm = Some(train_svm(&reduced, &labels, &cfg)?);
                fitted.svm_columns = Some(selection.selected.clone());
                fitted.selection = Some(selection);
            }
            BaselineKind::WlpdpOnly => {
                let mut ens_cfg = self.config.ensemble.clone();
                ens_cfg.seed = derive_seed(seed, "ensemble", 0);
                fitted.ensemble = Some(fit_ensemble(
                    normalized.features(),
                    &labels,
                    train.class_count(),
                    &ens_cfg,
                )?);
            }
            BaselineKind::FssaeOnly => {
                let mut fssae_cfg = self.config.fssae.clone();
                fssae_cfg.seed = derive_seed(seed, "fssae", 0);
                let model = pretrain_fssae(&normalized, &fssae_cfg)?;
                let model = fine_tune(model, &normalized)?;
                let expanded = expand_features(&model, normalized.features())?;
                let cfg = SvmConfig {
                    seed: derive_seed(seed, "baseline-svm", 0),
                    ..self.config.ensemble.svm.clone()
                };
                fitted.svm = Some(train_svm(&expanded.data, &labels, &cfg)?);
                fitted.fssae = Some(model);
            }
        }
        Ok(fitted)
    }
}

impl FittedPipeline for FittedBaseline {
    fn predict(&self, features: &Array2<f64>) -> Result<Vec<usize>> {
        let ds = Dataset::new(
            features.clone(),
            vec![0; features.nrows()],
            1,
            "predict-input",
        )?;
        let normalized = apply_normalization(&ds, &self.normalization)?;
        match self.kind {
            BaselineKind::SvmRaw => self
                .svm
                .as_ref()
                .expect("svm_raw stores an SVM")
                .predict(normalized.features()),
            BaselineKind::L1Only => {
                let cols = self.svm_columns.as_ref().expect("l1_only stores columns");
                let reduced = normalized.features().select(ndarray::Axis(1), cols);
                self.svm.as_ref().expect("l1_only stores an SVM").predict(&reduced)
            }
            BaselineKind::WlpdpOnly => predict_ensemble(
                self.ensemble.as_ref().expect("wlpdp_only stores an ensemble"),
                normalized.features(),
            ),
            BaselineKind::FssaeOnly => {
                let model = self.fssae.as_ref().expect("fssae_only stores a model");
                let expanded = expand_features(model, normalized.features())?;
                self.svm
                    .as_ref()
                    .expect("fssae_only stores an SVM")
                    .predict(&expanded.data)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::stratified_kfold;
    use crate::fssae::FinetuneOptimizer;
    use crate::metrics::cross_validate;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    pub(crate) fn small_pipeline_config() -> DsaePipelineConfig {
        DsaePipelineConfig {
            normalization: NormMethod::MinMax,
            fssae: FssaeConfig {
                hidden_units: vec![8, 4],
                lambda: 1e-5,
                beta: 0.5,
                rho: 0.05,
                embed_dims: vec![],
                min_original_fraction: 0.5,
                pretrain_iterations: 40,
                pretrain_learn_rate: 0.5,
                momentum: 0.9,
                finetune_iterations: 80,
                finetune_optimizer: FinetuneOptimizer::Scg,
                seed: 0,
            },
            alpha_grid: vec![0.01, 0.1],
            ista_max_iter: 500,
            ista_tol: 1e-9,
            min_keep_fraction: 0.1,
            alpha_validation_fraction: 0.2,
            ensemble: EnsembleConfig {
                subsets: 3,
                ..EnsembleConfig::default()
            },
        }
    }

    pub(crate) fn blobs(n: usize, sep: f64, seed: u64) -> Dataset {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let m = 6;
        let mut features = Array2::zeros((n, m));
        let mut labels = Vec::with_capacity(n);
        for i in 0..n {
            let class = i % 2;
            let center = if class == 0 { 2.0 } else { 2.0 + sep };
            for j in 0..m {
                features[[i, j]] = center + 0.35 * rng.random_range(-1.0..1.0) + 0.1 * j as f64;
            }
            labels.push(class);
        }
        Dataset::new(features, labels, 2, "blobs").unwrap()
    }

    #[test]
    fn full_pipeline_separable_blobs_cv() {
        let ds = blobs(60, 2.5, 5);
        let plan = stratified_kfold(&ds, 5, 11).unwrap();
        let pipeline = DsaePipeline {
            config: small_pipeline_config(),
        };
        let out = cross_validate(&pipeline, &ds, &plan, 1, 42, None).unwrap();
        let acc = out.report.mean.acc.unwrap();
        assert!(acc >= 0.95, "mean accuracy {acc}");
    }

    #[test]
    fn fitted_bundle_round_trips_and_predicts_identically() {
        let ds = blobs(40, 2.0, 7);
        let pipeline = DsaePipeline {
            config: small_pipeline_config(),
        };
        let fitted = pipeline.fit(&ds, 3).unwrap();
        let preds = fitted.predict(ds.features()).unwrap();
        let json = serde_json::to_string(&fitted).unwrap();
        let reloaded: FittedDsae = serde_json::from_str(&json).unwrap();
        assert_eq!(reloaded.predict(ds.features()).unwrap(), preds);
        // Serialization is bit-stable through the round trip.
        assert_eq!(serde_json::to_string(&reloaded).unwrap(), json);
    }

    #[test]
    fn baselines_fit_and_predict() {
        let ds = blobs(40, 2.0, 13);
        for kind in [
            BaselineKind::SvmRaw,
            BaselineKind::L1Only,
            BaselineKind::WlpdpOnly,
            BaselineKind::FssaeOnly,
        ] {
            let pipeline = BaselinePipeline {
                kind,
                config: small_pipeline_config(),
            };
            let fitted = pipeline.fit(&ds, 3).unwrap();
            let preds = fitted.predict(ds.features()).unwrap();
            assert_eq!(preds.len(), ds.n_samples());
            let acc = preds
                .iter()
                .zip(ds.labels())
                .filter(|(p, l)| p == l)
                .count() as f64
                / ds.n_samples() as f64;
            assert!(acc > 0.8, "{}: train accuracy {acc}", kind.name());
        }
    }

    #[test]
    fn leakage_guard_mutating_test_rows_keeps_fit_identical() {
        let ds = blobs(50, 2.0, 17);
        let plan = stratified_kfold(&ds, 5, 23).unwrap();
        let train_idx = plan.train_indices(0);
        let test_idx = plan.test_indices(0);

        let pipeline = DsaePipeline {
            config: small_pipeline_config(),
        };
        let fitted_a = pipeline.fit(&ds.select(&train_idx).unwrap(), 9).unwrap();

        // Corrupt every held-out row, refit on the same training rows.
        let mut corrupted = ds.features().clone();
        for &i in &test_idx {
            for v in corrupted.row_mut(i) {
                *v = 99.0;
            }
        }
        let ds2 = ds.with_features(corrupted).unwrap();
        let fitted_b = pipeline.fit(&ds2.select(&train_idx).unwrap(), 9).unwrap();

        assert_eq!(
            serde_json::to_string(&fitted_a).unwrap(),
            serde_json::to_string(&fitted_b).unwrap()
        );
    }

    #[test]
    fn l1_only_exercises_original_width() {
        let ds = blobs(40, 2.0, 19);
        let pipeline = BaselinePipeline {
            kind: BaselineKind::L1Only,
            config: small_pipeline_config(),
        };
        let fitted = pipeline.fit(&ds, 1).unwrap();
        let sel = fitted.selection.unwrap();
        assert!(sel.state.theta.len() == ds.n_features());
        assert!(!sel.selected.is_empty());
        assert!(sel.selected.iter().all(|&c| c < ds.n_features()));
    }
}
