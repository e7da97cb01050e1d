//! Dataset loading, validation, normalization, and cross-validation plans.
//!
//! Input files are plain comma-separated text, one sample per line, with the
//! label column position and label encoding described by a small TOML schema
//! file shipped next to each dataset.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use ndarray::{Array1, Array2};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A validated tabular dataset: `N` samples by `M` features with integer
/// class labels in `0..class_count`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Dataset {
    features: Array2<f64>,
    labels: Vec<usize>,
    class_count: usize,
    name: String,
}

impl Dataset {
    pub fn new(
        features: Array2<f64>,
        labels: Vec<usize>,
        class_count: usize,
        name: impl Into<String>,
    ) -> Result<Self> {
        if labels.len() != features.nrows() {
            return Err(Error::Dataset(format!(
                "label count {} does not match sample count {}",
                labels.len(),
                features.nrows()
            )));
        }
        if class_count == 0 {
            return Err(Error::Dataset("class_count must be positive".into()));
        }
        let mut seen = vec![false; class_count];
        for (i, &l) in labels.iter().enumerate() {
            if l >= class_count {
                return Err(Error::Dataset(format!(
                    "label {l} at sample {i} outside 0..{class_count}"
                )));
            }
            seen[l] = true;
        }
        if let Some(missing) = seen.iter().position(|s| !s) {
            return Err(Error::Dataset(format!("class {missing} has no samples")));
        }
        if let Some(((r, c), v)) = features
            .indexed_iter()
            .find(|(_, v)| !v.is_finite())
            .map(|(idx, v)| (idx, *v))
        {
            return Err(Error::Dataset(format!(
                "non-finite feature value {v} at sample {r}, feature {c}"
            )));
        }
        Ok(Dataset {
            features,
            labels,
            class_count,
            name: name.into(),
        })
    }

    pub fn n_samples(&self) -> usize {
        self.features.nrows()
    }

    pub fn n_features(&self) -> usize {
        self.features.ncols()
    }

    pub fn class_count(&self) -> usize {
        self.class_count
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn features(&self) -> &Array2<f64> {
        &self.features
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    /// Number of samples per class.
    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0usize; self.class_count];
        for &l in &self.labels {
            counts[l] += 1;
        }
        counts
    }

    /// New dataset holding the given sample rows (indices may repeat).
    pub fn select(&self, indices: &[usize]) -> Result<Dataset> {
        for &i in indices {
            if i >= self.n_samples() {
                return Err(Error::invalid(format!(
                    "sample index {i} out of range 0..{}",
                    self.n_samples()
                )));
            }
        }
        let features = self.features.select(ndarray::Axis(0), indices);
        let labels = indices.iter().map(|&i| self.labels[i]).collect();
        Dataset::new(features, labels, self.class_count, self.name.clone())
    }

    /// Replace the feature matrix, keeping labels. Row count must agree.
    pub fn with_features(&self, features: Array2<f64>) -> Result<Dataset> {
        Dataset::new(
            features,
            self.labels.clone(),
            self.class_count,
            self.name.clone(),
        )
    }
}

/// Column schema for a CSV dataset: where the label lives and how its raw
/// values map onto class indices.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ColumnSchema {
    /// Dataset tag used in reports.
    pub name: String,
    /// 0-based position of the label column.
    pub label_column: usize,
    /// Raw label values in class-index order: `label_values[c]` maps to
    /// class `c`. Raw values are compared after integer parsing.
    pub label_values: Vec<i64>,
    /// Class index treated as "positive" by binary metrics.
    pub positive_class: usize,
    /// Expected column count including the label column (validation aid).
    pub columns: usize,
}

impl ColumnSchema {
    pub fn load(path: impl AsRef<Path>) -> Result<ColumnSchema> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let schema: ColumnSchema = toml::from_str(&text)
            .map_err(|e| Error::Invalid(format!("schema {}: {e}", path.display())))?;
        schema.validate()?;
        Ok(schema)
    }

    pub fn validate(&self) -> Result<()> {
        if self.columns < 2 {
            return Err(Error::invalid("schema: need at least 2 columns"));
        }
        if self.label_column >= self.columns {
            return Err(Error::invalid(format!(
                "schema: label_column {} outside 0..{}",
                self.label_column, self.columns
            )));
        }
        if self.label_values.len() < 2 {
            return Err(Error::invalid("schema: need at least 2 label values"));
        }
        let mut sorted = self.label_values.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != self.label_values.len() {
            return Err(Error::invalid("schema: duplicate label values"));
        }
        if self.positive_class >= self.label_values.len() {
            return Err(Error::invalid(format!(
                "schema: positive_class {} outside 0..{}",
                self.positive_class,
                self.label_values.len()
            )));
        }
        Ok(())
    }

    pub fn class_count(&self) -> usize {
        self.label_values.len()
    }
}

/// What to do with rows containing missing or non-numeric feature cells.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MissingPolicy {
    /// Reject the whole file, naming the offending row. Default.
    Reject,
    /// Replace missing cells with the per-feature mean of complete rows.
    ImputeMean,
}

/// Load a CSV dataset under the given schema with the default reject policy.
pub fn load_dataset(path: impl AsRef<Path>, schema: &ColumnSchema) -> Result<Dataset> {
    load_dataset_with_policy(path, schema, MissingPolicy::Reject)
}

pub fn load_dataset_with_policy(
    path: impl AsRef<Path>,
    schema: &ColumnSchema,
    policy: MissingPolicy,
) -> Result<Dataset> {
    let path = path.as_ref();
    schema.validate()?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| match e.kind() {
            csv::ErrorKind::Io(_) => Error::Io {
                path: path.to_path_buf(),
                source: std::io::Error::other(e.to_string()),
            },
            _ => Error::Dataset(e.to_string()),
        })?;

    let n_features = schema.columns - 1;
    let mut rows: Vec<Vec<Option<f64>>> = Vec::new();
    let mut labels: Vec<usize> = Vec::new();

    for (idx, record) in reader.records().enumerate() {
        let row = idx + 1;
        let record = record.map_err(|e| Error::Data {
            path: path.to_path_buf(),
            row,
            message: e.to_string(),
        })?;
        if record.len() != schema.columns {
            return Err(Error::Data {
                path: path.to_path_buf(),
                row,
                message: format!("expected {} columns, found {}", schema.columns, record.len()),
            });
        }

        let raw_label = record.get(schema.label_column).unwrap_or("");
        let label_value: i64 = parse_label(raw_label).ok_or_else(|| Error::Data {
            path: path.to_path_buf(),
            row,
            message: format!("label cell {raw_label:?} is not an integer"),
        })?;
        let class = schema
            .label_values
            .iter()
            .position(|&v| v == label_value)
            .ok_or_else(|| Error::Data {
                path: path.to_path_buf(),
                row,
                message: format!(
                    "unknown label value {label_value}; schema allows {:?}",
                    schema.label_values
                ),
            })?;
        labels.push(class);

        let mut cells = Vec::with_capacity(n_features);
        for (col, cell) in record.iter().enumerate() {
            if col == schema.label_column {
                continue;
            }
            if cell.is_empty() || cell.eq_ignore_ascii_case("na") || cell == "?" {
                match policy {
                    MissingPolicy::Reject => {
                        return Err(Error::Data {
                            path: path.to_path_buf(),
                            row,
                            message: format!("missing value in column {col}"),
                        });
                    }
                    MissingPolicy::ImputeMean => cells.push(None),
                }
                continue;
            }
            match cell.parse::<f64>() {
                Ok(v) if v.is_finite() => cells.push(Some(v)),
                _ => {
                    return Err(Error::Data {
                        path: path.to_path_buf(),
                        row,
                        message: format!("non-numeric cell {cell:?} in column {col}"),
                    });
                }
            }
        }
        rows.push(cells);
    }

    if rows.is_empty() {
        return Err(Error::Dataset(format!("{}: no data rows", path.display())));
    }

    // Mean imputation over the complete cells of each feature.
    let n = rows.len();
    let mut features = Array2::<f64>::zeros((n, n_features));
    for f in 0..n_features {
        let mut sum = 0.0;
        let mut count = 0usize;
        for row in &rows {
            if let Some(v) = row[f] {
                sum += v;
                count += 1;
            }
        }
        if count == 0 {
            return Err(Error::Dataset(format!(
                "{}: feature column {f} has no numeric values",
                path.display()
            )));
        }
        let mean = sum / count as f64;
        for (i, row) in rows.iter().enumerate() {
            features[[i, f]] = row[f].unwrap_or(mean);
        }
    }

    Dataset::new(features, labels, schema.class_count(), schema.name.clone())
}

fn parse_label(cell: &str) -> Option<i64> {
    if let Ok(v) = cell.parse::<i64>() {
        return Some(v);
    }
    // Tolerate labels written as floats ("1.0").
    let f = cell.parse::<f64>().ok()?;
    if f.fract() == 0.0 && f.is_finite() {
        Some(f as i64)
    } else {
        None
    }
}

/// Feature scaling method.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormMethod {
    MinMax,
    ZScore,
}

/// Fitted per-feature normalization parameters. For `MinMax` the vectors
/// hold (min, max); for `ZScore` (mean, stddev).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizationSpec {
    pub method: NormMethod,
    pub low: Vec<f64>,
    pub high: Vec<f64>,
}

/// Fit normalization on `ds` and return the transformed dataset plus the
/// spec, so the same statistics can be re-applied to held-out data.
pub fn normalize(ds: &Dataset, method: NormMethod) -> Result<(Dataset, NormalizationSpec)> {
    let m = ds.n_features();
    let mut low = Vec::with_capacity(m);
    let mut high = Vec::with_capacity(m);
    for col in ds.features().columns() {
        match method {
            NormMethod::MinMax => {
                let mut min = f64::INFINITY;
                let mut max = f64::NEG_INFINITY;
                for &v in col {
                    min = min.min(v);
                    max = max.max(v);
                }
                low.push(min);
                high.push(max);
            }
            NormMethod::ZScore => {
                let n = col.len() as f64;
                let mean = col.sum() / n;
                let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
                let std = var.sqrt();
                if std == 0.0 {
                    return Err(Error::Dataset(format!(
                        "z_score normalization: feature {} has zero variance",
                        low.len()
                    )));
                }
                low.push(mean);
                high.push(std);
            }
        }
    }
    let spec = NormalizationSpec { method, low, high };
    let normalized = apply_normalization(ds, &spec)?;
    Ok((normalized, spec))
}

/// Apply a fitted normalization spec; uses only statistics stored in `spec`.
pub fn apply_normalization(ds: &Dataset, spec: &NormalizationSpec) -> Result<Dataset> {
    let m = ds.n_features();
    if spec.low.len() != m || spec.high.len() != m {
        return Err(Error::shape(format!(
            "normalization spec has {} parameters, dataset has {m} features",
            spec.low.len()
        )));
    }
    let mut features = ds.features().clone();
    for (f, mut col) in features.columns_mut().into_iter().enumerate() {
        match spec.method {
            NormMethod::MinMax => {
                let (min, max) = (spec.low[f], spec.high[f]);
                if max < min {
                    return Err(Error::invalid(format!(
                        "normalization spec: min > max for feature {f}"
                    )));
                }
                let range = max - min;
                if range == 0.0 {
                    // Constant feature maps to 0.
                    col.fill(0.0);
                } else {
                    col.mapv_inplace(|v| (v - min) / range);
                }
            }
            NormMethod::ZScore => {
                let (mean, std) = (spec.low[f], spec.high[f]);
                if std <= 0.0 {
                    return Err(Error::invalid(format!(
                        "normalization spec: non-positive stddev for feature {f}"
                    )));
                }
                col.mapv_inplace(|v| (v - mean) / std);
            }
        }
    }
    ds.with_features(features)
}

/// A reproducible stratified k-fold assignment of samples to folds.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub k: usize,
    /// `assignments[i]` is the fold index of sample `i`.
    pub assignments: Vec<usize>,
    pub seed: u64,
}

impl FoldPlan {
    pub fn test_indices(&self, fold: usize) -> Vec<usize> {
        self.assignments
            .iter()
            .enumerate()
            .filter(|(_, &f)| f == fold)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn train_indices(&self, fold: usize) -> Vec<usize> {
        self.assignments
            .iter()
            .enumerate()
            .filter(|(_, &f)| f != fold)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn fold_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0usize; self.k];
        for &f in &self.assignments {
            sizes[f] += 1;
        }
        sizes
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string_pretty(self)
            .map_err(|e| Error::Dataset(format!("fold plan serialization: {e}")))?;
        std::fs::write(path, text).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<FoldPlan> {
        let path: PathBuf = path.as_ref().to_path_buf();
        let text = std::fs::read_to_string(&path).map_err(|source| Error::Io {
            path: path.clone(),
            source,
        })?;
        serde_json::from_str(&text).map_err(|e| Error::Dataset(format!("fold plan parse: {e}")))
    }
}

/// Stratified k-fold assignment: per-class counts across folds differ by at
/// most one, and the assignment is a pure function of (labels, k, seed).
pub fn stratified_kfold(ds: &Dataset, k: usize, seed: u64) -> Result<FoldPlan> {
    if k < 2 {
        return Err(Error::invalid(format!("fold count k={k} must be >= 2")));
    }
    let counts = ds.class_counts();
    if let Some((class, &count)) = counts.iter().enumerate().find(|(_, &c)| c < k) {
        return Err(Error::invalid(format!(
            "class {class} has {count} samples, fewer than k={k}"
        )));
    }

    let mut by_class: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, &l) in ds.labels().iter().enumerate() {
        by_class.entry(l).or_default().push(i);
    }

    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut assignments = vec![0usize; ds.n_samples()];
    for (class, mut indices) in by_class {
        indices.shuffle(&mut rng);
        // Offset the round-robin start per class so remainders spread over
        // different folds instead of piling onto fold 0.
        let offset = class % k;
        for (j, idx) in indices.into_iter().enumerate() {
            assignments[idx] = (offset + j) % k;
        }
    }

    Ok(FoldPlan {
        k,
        assignments,
        seed,
    })
}

/// Stratified two-way split. Returns (first, second) index lists where the
/// second part holds `ceil(second_fraction * count)` samples of each class.
pub fn stratified_split(
    labels: &[usize],
    class_count: usize,
    second_fraction: f64,
    seed: u64,
) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(0.0..1.0).contains(&second_fraction) {
        return Err(Error::invalid(format!(
            "split fraction {second_fraction} must be in [0, 1)"
        )));
    }
    let mut by_class: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, &l) in labels.iter().enumerate() {
        if l >= class_count {
            return Err(Error::invalid(format!("label {l} outside 0..{class_count}")));
        }
        by_class.entry(l).or_default().push(i);
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut first = Vec::new();
    let mut second = Vec::new();
    for (_, mut indices) in by_class {
        indices.shuffle(&mut rng);
        let take = ((indices.len() as f64) * second_fraction).ceil() as usize;
        let take = take.min(indices.len().saturating_sub(1)); // keep >=1 in first part
        second.extend_from_slice(&indices[..take]);
        first.extend_from_slice(&indices[take..]);
    }
    first.sort_unstable();
    second.sort_unstable();
    Ok((first, second))
}

/// Column means of a feature matrix (helper shared by tests and pipeline).
pub fn column_means(x: &Array2<f64>) -> Array1<f64> {
    let n = x.nrows() as f64;
    x.sum_axis(ndarray::Axis(0)) / n
}
