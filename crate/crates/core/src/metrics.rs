//! Confusion matrices, the five derived scores, fold aggregation, and the
//! generic cross-validation driver.
//!
//! Scores with a zero denominator are reported as an explicit "undefined"
//! sentinel (`None`) rather than silently substituting 0, and are excluded
//! from means with a footnote count.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, FoldPlan};
use crate::error::{Error, Result};
use crate::seeding::derive_seed;

/// General C x C count matrix (rows = truth, columns = prediction) with a
/// designated positive class for the binary view.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub counts: Array2<u64>,
    pub positive_class: usize,
}

impl ConfusionMatrix {
    pub fn total(&self) -> u64 {
        self.counts.sum()
    }

    pub fn tp(&self) -> u64 {
        self.counts[[self.positive_class, self.positive_class]]
    }

    pub fn fn_(&self) -> u64 {
        self.counts.row(self.positive_class).sum() - self.tp()
    }

    pub fn fp(&self) -> u64 {
        self.counts.column(self.positive_class).sum() - self.tp()
    }

    pub fn tn(&self) -> u64 {
        self.total() - self.tp() - self.fn_() - self.fp()
    }

    /// Direct constructor from binary counts (tests and reports).
    pub fn from_binary(tp: u64, fp: u64, fn_: u64, tn: u64) -> ConfusionMatrix {
        let mut counts = Array2::zeros((2, 2));
        counts[[1, 1]] = tp;
        counts[[0, 1]] = fp;
        counts[[1, 0]] = fn_;
        counts[[0, 0]] = tn;
        ConfusionMatrix {
            counts,
            positive_class: 1,
        }
    }
}

pub fn confusion(
    y_true: &[usize],
    y_pred: &[usize],
    class_count: usize,
    positive_class: usize,
) -> Result<ConfusionMatrix> {
    if y_true.len() != y_pred.len() {
        return Err(Error::shape(format!(
            "{} true labels vs {} predictions",
            y_true.len(),
            y_pred.len()
        )));
    }
    if positive_class >= class_count {
        return Err(Error::invalid("positive class outside range"));
    }
    let mut counts = Array2::zeros((class_count, class_count));
    for (&t, &p) in y_true.iter().zip(y_pred) {
        if t >= class_count || p >= class_count {
            return Err(Error::invalid(format!("label ({t}, {p}) outside range")));
        }
        counts[[t, p]] += 1;
    }
    Ok(ConfusionMatrix {
        counts,
        positive_class,
    })
}

/// The five scores; `None` marks an undefined (zero-denominator) value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scores {
    pub acc: Option<f64>,
    pub prec: Option<f64>,
    pub sens: Option<f64>,
    pub spec: Option<f64>,
    pub f1: Option<f64>,
}

impl Scores {
    pub fn fields(&self) -> [(&'static str, Option<f64>); 5] {
        [
            ("acc", self.acc),
            ("prec", self.prec),
            ("sens", self.sens),
            ("spec", self.spec),
            ("f1", self.f1),
        ]
    }
}

fn ratio(num: u64, den: u64) -> Option<f64> {
    if den == 0 {
        None
    } else {
        Some(num as f64 / den as f64)
    }
}

pub fn compute_metrics(cm: &ConfusionMatrix) -> Scores {
    let (tp, fp, fn_, tn) = (cm.tp(), cm.fp(), cm.fn_(), cm.tn());
    let acc = ratio(tp + tn, tp + fp + fn_ + tn);
    let prec = ratio(tp, tp + fp);
    let sens = ratio(tp, tp + fn_);
    let spec = ratio(tn, tn + fp);
    let f1 = match (prec, sens) {
        (Some(p), Some(s)) if p + s > 0.0 => Some(2.0 * p * s / (p + s)),
        _ => None,
    };
    Scores {
        acc,
        prec,
        sens,
        spec,
        f1,
    }
}

/// Mean and standard deviation per score over folds, excluding undefined
/// entries; `undefined_counts` records how many folds were excluded per
/// score (acc, prec, sens, spec, f1).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricsReport {
    pub per_fold: Vec<Scores>,
    pub mean: Scores,
    pub std: Scores,
    pub undefined_counts: [usize; 5],
    /// Fold with the highest accuracy (ties toward the lower index).
    pub best_fold: usize,
}

pub fn aggregate(per_fold: Vec<Scores>) -> Result<MetricsReport> {
    if per_fold.is_empty() {
        return Err(Error::invalid("no folds to aggregate"));
    }
    let extract = |f: fn(&Scores) -> Option<f64>| -> (Option<f64>, Option<f64>, usize) {
        let values: Vec<f64> = per_fold.iter().filter_map(f).collect();
        let undefined = per_fold.len() - values.len();
        if values.is_empty() {
            return (None, None, undefined);
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        (Some(mean), Some(var.sqrt()), undefined)
    };

    let (acc_m, acc_s, acc_u) = extract(|s| s.acc);
    let (prec_m, prec_s, prec_u) = extract(|s| s.prec);
    let (sens_m, sens_s, sens_u) = extract(|s| s.sens);
    let (spec_m, spec_s, spec_u) = extract(|s| s.spec);
    let (f1_m, f1_s, f1_u) = extract(|s| s.f1);

    let mut best_fold = 0;
    for (i, s) in per_fold.iter().enumerate() {
        let a = s.acc.unwrap_or(-1.0);
        let b = per_fold[best_fold].acc.unwrap_or(-1.0);
        if a > b {
            best_fold = i;
        }
    }

    Ok(MetricsReport {
        per_fold,
        mean: Scores {
            acc: acc_m,
            prec: prec_m,
            sens: sens_m,
            spec: spec_m,
            f1: f1_m,
        },
        std: Scores {
            acc: acc_s,
            prec: prec_s,
            sens: sens_s,
            spec: spec_s,
            f1: f1_s,
        },
        undefined_counts: [acc_u, prec_u, sens_u, spec_u, f1_u],
        best_fold,
    })
}

/// Anything that can be fit on a training dataset and score raw
/// (unnormalized) feature rows. Fitted state must derive from the training
/// rows alone; the driver below never shows it the held-out rows.
pub trait Pipeline {
    type Fitted: FittedPipeline;
    fn fit(&self, train: &Dataset, seed: u64) -> Result<Self::Fitted>;
}

pub trait FittedPipeline {
    fn predict(&self, features: &ndarray::Array2<f64>) -> Result<Vec<usize>>;
}

/// Per-fold outcome of a cross-validation run.
pub struct CvOutcome<F> {
    pub report: MetricsReport,
    pub confusions: Vec<ConfusionMatrix>,
    pub fitted: Vec<F>,
    /// Folds actually evaluated (all of them for k-fold, one for holdout).
    pub evaluated_folds: Vec<usize>,
}

/// Fit on the training folds, evaluate on the held-out fold, for every
/// fold in `folds` (or all of them when `folds` is `None`).
pub fn cross_validate<P: Pipeline>(
    pipeline: &P,
    ds: &Dataset,
    plan: &FoldPlan,
    positive_class: usize,
    master_seed: u64,
    folds: Option<&[usize]>,
) -> Result<CvOutcome<P::Fitted>> {
    if plan.assignments.len() != ds.n_samples() {
        return Err(Error::invalid(format!(
            "fold plan covers {} samples, dataset has {}",
            plan.assignments.len(),
            ds.n_samples()
        )));
    }
    let all: Vec<usize> = (0..plan.k).collect();
    let selected = folds.unwrap_or(&all);

    let mut per_fold = Vec::with_capacity(selected.len());
    let mut confusions = Vec::with_capacity(selected.len());
    let mut fitted_models = Vec::with_capacity(selected.len());

    for &fold in selected {
        if fold >= plan.k {
            return Err(Error::invalid(format!("fold {fold} outside 0..{}", plan.k)));
        }
        let train = ds.select(&plan.train_indices(fold))?;
        let test_idx = plan.test_indices(fold);
        let test = ds.select(&test_idx)?;

        let fitted = pipeline.fit(&train, derive_seed(master_seed, "fold", fold as u64))?;
        let preds = fitted.predict(test.features())?;
        let cm = confusion(test.labels(), &preds, ds.class_count(), positive_class)?;
        per_fold.push(compute_metrics(&cm));
        confusions.push(cm);
        fitted_models.push(fitted);
    }

    Ok(CvOutcome {
        report: aggregate(per_fold)?,
        confusions,
        fitted: fitted_models,
        evaluated_folds: selected.to_vec(),
    })
}
