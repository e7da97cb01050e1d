//! Feature-embedded stacked sparse autoencoder (FSSAE).
//!
//! Each layer past the first re-injects the original features: the previous
//! hidden output is stacked under the transposed input, a binary selection
//! transform keeps the highest-energy rows, and the next unit trains on the
//! selected rows. After layerwise pretraining, a softmax head is attached
//! and the whole encoder stack is fine-tuned on cross-entropy. Expanded
//! features are the original features concatenated with the last hidden
//! layer.

use ndarray::{s, Array1, Array2, Axis};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::optim::{minimize_gd, minimize_scg, ScgOptions};
use crate::seeding::derive_seed;
use crate::sparse_ae::{encode, train_autoencoder, AeConfig, AeWeights, GroupPartition};

/// Where a selected row of the combined matrix came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureOrigin {
    Original,
    Hidden,
}

/// Binary row-selection transform between two stack layers. Stored as the
/// ascending list of selected row indices; rows below `original_rows` carry
/// the original features.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EmbedUnit {
    pub selected: Vec<usize>,
    pub input_rows: usize,
    pub original_rows: usize,
}

impl EmbedUnit {
    pub fn d(&self) -> usize {
        self.selected.len()
    }

    pub fn origin_tags(&self) -> Vec<FeatureOrigin> {
        self.selected
            .iter()
            .map(|&r| {
                if r < self.original_rows {
                    FeatureOrigin::Original
                } else {
                    FeatureOrigin::Hidden
                }
            })
            .collect()
    }

    /// (original-origin, hidden-origin) counts among the selected rows.
    pub fn origin_counts(&self) -> (usize, usize) {
        let orig = self.selected.iter().filter(|&&r| r < self.original_rows).count();
        (orig, self.selected.len() - orig)
    }

    /// Apply the selection: `G^T E`, i.e. keep the selected rows.
    pub fn transform(&self, e: &Array2<f64>) -> Result<Array2<f64>> {
        if e.nrows() != self.input_rows {
            return Err(Error::shape(format!(
                "combined matrix has {} rows, embed unit expects {}",
                e.nrows(),
                self.input_rows
            )));
        }
        Ok(e.select(Axis(0), &self.selected))
    }
}

/// Stack the transposed original features over the previous hidden output:
/// both describe the same `N` samples, one column each.
pub fn combine_features(x_o: &Array2<f64>, h_prev: &Array2<f64>) -> Result<Array2<f64>> {
    let n = x_o.nrows();
    if h_prev.ncols() != n {
        return Err(Error::shape(format!(
            "original features describe {n} samples, hidden output {}",
            h_prev.ncols()
        )));
    }
    let m = x_o.ncols();
    let mut e = Array2::zeros((m + h_prev.nrows(), n));
    e.slice_mut(s![..m, ..]).assign(&x_o.t());
    e.slice_mut(s![m.., ..]).assign(h_prev);
    Ok(e)
}

/// Centered row energies: per-row sum of squared deviations from the row
/// mean. Selection scores rows by variance rather than offset, since
/// sigmoid outputs sit near 0.5 regardless of information content.
pub fn row_energies(e: &Array2<f64>) -> Array1<f64> {
    let n = e.ncols() as f64;
    Array1::from_iter(e.rows().into_iter().map(|row| {
        let mean = row.sum() / n;
        row.iter().map(|v| (v - mean) * (v - mean)).sum()
    }))
}

/// Fit the selection transform: keep the `d` rows with the largest centered
/// energies, which exactly maximizes the trace objective over binary
/// column-selection matrices. Ties break toward the lower row index; the
/// selected indices are returned in ascending order.
pub fn fit_transform_g(e: &Array2<f64>, d: usize, original_rows: usize) -> Result<EmbedUnit> {
    let rows = e.nrows();
    if d == 0 || d > rows {
        return Err(Error::invalid(format!(
            "retained count d={d} outside 1..={rows}"
        )));
    }
    if original_rows > rows {
        return Err(Error::invalid(format!(
            "original_rows {original_rows} exceeds row count {rows}"
        )));
    }
    let energies = row_energies(e);
    let mut order: Vec<usize> = (0..rows).collect();
    order.sort_by(|&a, &b| {
        energies[b]
            .partial_cmp(&energies[a])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    let mut selected: Vec<usize> = order[..d].to_vec();
    selected.sort_unstable();
    Ok(EmbedUnit {
        selected,
        input_rows: rows,
        original_rows,
    })
}

/// Selection with an original-feature quota: start from the plain top-`d`
/// fit and grow the selection with the best remaining original-origin rows
/// until at least `min_original` of them are included (or none remain).
pub fn fit_transform_g_with_quota(
    e: &Array2<f64>,
    d: usize,
    original_rows: usize,
    min_original: usize,
) -> Result<EmbedUnit> {
    let base = fit_transform_g(e, d, original_rows)?;
    let quota = min_original.min(original_rows);
    let (have, _) = base.origin_counts();
    if have >= quota {
        return Ok(base);
    }
    let energies = row_energies(e);
    let mut candidates: Vec<usize> = (0..original_rows)
        .filter(|r| !base.selected.contains(r))
        .collect();
    candidates.sort_by(|&a, &b| {
        energies[b]
            .partial_cmp(&energies[a])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    let mut selected = base.selected;
    selected.extend(candidates.into_iter().take(quota - have));
    selected.sort_unstable();
    Ok(EmbedUnit {
        selected,
        input_rows: e.nrows(),
        original_rows,
    })
}

/// Which optimizer drives fine-tuning.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum FinetuneOptimizer {
    Scg,
    Gd { learn_rate: f64 },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FssaeConfig {
    /// Hidden-unit counts per layer, e.g. `[120, 40, 16]`.
    pub hidden_units: Vec<usize>,
    pub lambda: f64,
    pub beta: f64,
    pub rho: f64,
    /// Explicit retained-row counts per embed unit. Empty = default rule:
    /// reuse the previous hidden dimension, then grow to satisfy the
    /// original-feature quota.
    pub embed_dims: Vec<usize>,
    /// Original-row quota as a fraction of the input feature count; the
    /// default rule keeps at least `ceil(M * fraction)` original rows
    /// selected. Ignored when `embed_dims` is explicit.
    pub min_original_fraction: f64,
    pub pretrain_iterations: usize,
    pub pretrain_learn_rate: f64,
    pub momentum: f64,
    pub finetune_iterations: usize,
    pub finetune_optimizer: FinetuneOptimizer,
    pub seed: u64,
}

impl FssaeConfig {
    pub fn validate(&self) -> Result<()> {
        if self.hidden_units.is_empty() {
            return Err(Error::invalid("hidden_units must not be empty"));
        }
        if self.hidden_units.iter().any(|&h| h == 0) {
            return Err(Error::invalid("hidden unit counts must be positive"));
        }
        if !self.embed_dims.is_empty() && self.embed_dims.len() != self.hidden_units.len() - 1 {
            return Err(Error::invalid(format!(
                "embed_dims has {} entries, expected {} (one per embed unit)",
                self.embed_dims.len(),
                self.hidden_units.len() - 1
            )));
        }
        if !(self.rho > 0.0 && self.rho < 1.0) {
            return Err(Error::invalid(format!("rho {} must be in (0, 1)", self.rho)));
        }
        if !(0.0..=1.0).contains(&self.min_original_fraction) {
            return Err(Error::invalid("min_original_fraction must be in [0, 1]"));
        }
        Ok(())
    }
}

/// Softmax classification head over the last hidden layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SoftmaxHead {
    /// class_count x last_hidden_dim
    pub w: Array2<f64>,
    pub b: Array1<f64>,
}

/// A trained stack: units, embed transforms, softmax head, and the training
/// configuration echo.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FssaeModel {
    pub units: Vec<AeWeights>,
    pub unit_configs: Vec<AeConfig>,
    pub embeds: Vec<EmbedUnit>,
    pub softmax: SoftmaxHead,
    pub config: FssaeConfig,
    pub input_dim: usize,
    pub class_count: usize,
    pub fine_tuned: bool,
    pub finetune_initial_ce: Option<f64>,
    pub finetune_final_ce: Option<f64>,
}

impl FssaeModel {
    /// Output width after expansion: original features plus the last hidden
    /// dimension.
    pub fn expanded_dim(&self) -> usize {
        self.input_dim + *self.config.hidden_units.last().expect("non-empty chain")
    }

    /// Hidden activations of every layer for the given samples
    /// (features are `N x M`, outputs are `hidden x N`).
    pub fn forward_hidden(&self, features: &Array2<f64>) -> Result<Vec<Array2<f64>>> {
        if features.ncols() != self.input_dim {
            return Err(Error::shape(format!(
                "features have {} columns, model expects {}",
                features.ncols(),
                self.input_dim
            )));
        }
        let mut hidden = Vec::with_capacity(self.units.len());
        let x_t = features.t().to_owned();
        let mut h = encode(&self.units[0], &x_t)?;
        hidden.push(h.clone());
        for (k, unit) in self.units.iter().enumerate().skip(1) {
            let e = combine_features(features, &h)?;
            let l = self.embeds[k - 1].transform(&e)?;
            h = encode(unit, &l)?;
            hidden.push(h.clone());
        }
        Ok(hidden)
    }
}

/// Layerwise pretraining. Layer 1 trains directly on the (normalized)
/// features without the group term; every later layer trains on the
/// selected rows of the combined matrix, with the hidden-group split
/// mirroring the ratio of original- to hidden-origin rows it consumes.
pub fn pretrain_fssae(ds: &Dataset, cfg: &FssaeConfig) -> Result<FssaeModel> {
    cfg.validate()?;
    let m = ds.n_features();
    let features = ds.features();
    let x_t = features.t().to_owned();

    let mut units = Vec::new();
    let mut unit_configs = Vec::new();
    let mut embeds = Vec::new();

    let ae_cfg = |input_dim: usize,
                  hidden_dim: usize,
                  partition: Option<GroupPartition>,
                  seed: u64| AeConfig {
        input_dim,
        hidden_dim,
        lambda: cfg.lambda,
        beta: cfg.beta,
        rho: cfg.rho,
        partition,
        max_iterations: cfg.pretrain_iterations,
        learn_rate: cfg.pretrain_learn_rate,
        momentum: cfg.momentum,
        seed,
    };

    // First unit: single feature type, no group term.
    let c0 = ae_cfg(m, cfg.hidden_units[0], None, derive_seed(cfg.seed, "unit", 0));
    let trained = train_autoencoder(&x_t, &c0)?;
    let mut h = encode(&trained.weights, &x_t)?;
    units.push(trained.weights);
    unit_configs.push(c0);

    for k in 1..cfg.hidden_units.len() {
        let e = combine_features(features, &h)?;
        let embed = if cfg.embed_dims.is_empty() {
            let d_base = h.nrows().min(e.nrows());
            let quota = ((m as f64) * cfg.min_original_fraction).ceil() as usize;
            fit_transform_g_with_quota(&e, d_base, m, quota)?
        } else {
            fit_transform_g(&e, cfg.embed_dims[k - 1], m)?
        };
        let l = embed.transform(&e)?;
        let d = embed.d();

        let hidden_dim = cfg.hidden_units[k];
        let (orig, _) = embed.origin_counts();
        let ratio = orig as f64 / d as f64;
        let split = ((hidden_dim as f64) * ratio).floor() as usize;
        let partition = GroupPartition::contiguous(split.min(hidden_dim), hidden_dim)?;

        let ck = ae_cfg(d, hidden_dim, Some(partition), derive_seed(cfg.seed, "unit", k as u64));
        let trained = train_autoencoder(&l, &ck)?;
        h = encode(&trained.weights, &l)?;
        units.push(trained.weights);
        unit_configs.push(ck);
        embeds.push(embed);
    }

    let class_count = ds.class_count();
    let last_hidden = *cfg.hidden_units.last().unwrap();
    let mut rng = ChaCha20Rng::seed_from_u64(derive_seed(cfg.seed, "softmax", 0));
    let r = (6.0 / (last_hidden + class_count) as f64).sqrt();
    let softmax = SoftmaxHead {
        w: Array2::from_shape_fn((class_count, last_hidden), |_| rng.random_range(-r..r)),
        b: Array1::zeros(class_count),
    };

    Ok(FssaeModel {
        units,
        unit_configs,
        embeds,
        softmax,
        config: cfg.clone(),
        input_dim: m,
        class_count,
        fine_tuned: false,
        finetune_initial_ce: None,
        finetune_final_ce: None,
    })
}

// ---- fine-tuning ----------------------------------------------------------

/// Flat view over all trainable fine-tune parameters: every unit's encoder
/// (w1, b1) followed by the softmax head. Decoders stay fixed.
struct ParamLayout {
    unit_dims: Vec<(usize, usize)>, // (hidden, input) per unit
    class_count: usize,
    total: usize,
}

impl ParamLayout {
    fn of(model: &FssaeModel) -> ParamLayout {
        let unit_dims: Vec<(usize, usize)> = model
            .units
            .iter()
            .map(|u| (u.hidden_dim(), u.input_dim()))
            .collect();
        let mut total = 0;
        for &(h, i) in &unit_dims {
            total += h * i + h;
        }
        let last_hidden = unit_dims.last().unwrap().0;
        total += model.class_count * last_hidden + model.class_count;
        ParamLayout {
            unit_dims,
            class_count: model.class_count,
            total,
        }
    }

    fn pack(&self, model: &FssaeModel) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.total);
        for u in &model.units {
            out.extend(u.w1.iter());
            out.extend(u.b1.iter());
        }
        out.extend(model.softmax.w.iter());
        out.extend(model.softmax.b.iter());
        out
    }

    fn unpack(&self, x: &[f64], model: &mut FssaeModel) {
        let mut pos = 0;
        for (u, &(h, i)) in model.units.iter_mut().zip(&self.unit_dims) {
            u.w1 = Array2::from_shape_vec((h, i), x[pos..pos + h * i].to_vec()).unwrap();
            pos += h * i;
            u.b1 = Array1::from_vec(x[pos..pos + h].to_vec());
            pos += h;
        }
        let (c, hl) = (self.class_count, self.unit_dims.last().unwrap().0);
        model.softmax.w = Array2::from_shape_vec((c, hl), x[pos..pos + c * hl].to_vec()).unwrap();
        pos += c * hl;
        model.softmax.b = Array1::from_vec(x[pos..pos + c].to_vec());
    }
}

/// Column-wise stable softmax.
fn softmax_columns(logits: &Array2<f64>) -> Array2<f64> {
    let mut p = logits.clone();
    for mut col in p.columns_mut() {
        let max = col.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        col.mapv_inplace(|v| (v - max).exp());
        let sum = col.sum();
        col.mapv_inplace(|v| v / sum);
    }
    p
}

/// Cross-entropy and its gradient w.r.t. all fine-tune parameters, by
/// backpropagation through the stacked encoders and embed selections.
pub fn stack_ce_and_gradient(
    model: &FssaeModel,
    features: &Array2<f64>,
    labels: &[usize],
) -> Result<(f64, Vec<f64>)> {
    let n = features.nrows();
    if labels.len() != n {
        return Err(Error::shape("label count mismatch"));
    }
    let x_t = features.t().to_owned();
    let k_layers = model.units.len();

    // Forward, caching each unit's input and hidden output.
    let mut inputs: Vec<Array2<f64>> = Vec::with_capacity(k_layers);
    let mut hiddens: Vec<Array2<f64>> = Vec::with_capacity(k_layers);
    let mut h = {
        inputs.push(x_t.clone());
        encode(&model.units[0], &x_t)?
    };
    hiddens.push(h.clone());
    for k in 1..k_layers {
        let e = combine_features(features, &h)?;
        let l = model.embeds[k - 1].transform(&e)?;
        h = encode(&model.units[k], &l)?;
        inputs.push(l);
        hiddens.push(h.clone());
    }

    let last = hiddens.last().unwrap();
    let mut logits = model.softmax.w.dot(last);
    for mut col in logits.columns_mut() {
        col += &model.softmax.b;
    }
    let probs = softmax_columns(&logits);

    let nf = n as f64;
    let mut ce = 0.0;
    for (i, &y) in labels.iter().enumerate() {
        ce -= probs[[y, i]].max(1e-300).ln();
    }
    ce /= nf;

    // Backward.
    let mut delta_s = probs;
    for (i, &y) in labels.iter().enumerate() {
        delta_s[[y, i]] -= 1.0;
    }
    delta_s /= nf;

    let grad_sw = delta_s.dot(&last.t());
    let grad_sb = delta_s.sum_axis(Axis(1));
    let mut d_h = model.softmax.w.t().dot(&delta_s);

    let mut unit_grads: Vec<(Array2<f64>, Array1<f64>)> = Vec::with_capacity(k_layers);
    for k in (0..k_layers).rev() {
        let delta = &d_h * &hiddens[k].mapv(|v| v * (1.0 - v));
        let gw = delta.dot(&inputs[k].t());
        let gb = delta.sum_axis(Axis(1));
        if k > 0 {
            // Route gradient through the selection: rows of the unit input
            // map to rows of the combined matrix; only hidden-origin rows
            // flow back to the previous layer.
            let d_l = model.units[k].w1.t().dot(&delta);
            let embed = &model.embeds[k - 1];
            let m = embed.original_rows;
            let mut d_prev = Array2::zeros(hiddens[k - 1].raw_dim());
            for (j, &row) in embed.selected.iter().enumerate() {
                if row >= m {
                    d_prev.row_mut(row - m).assign(&d_l.row(j));
                }
            }
            d_h = d_prev;
        }
        unit_grads.push((gw, gb));
    }
    unit_grads.reverse();

    let mut grad = Vec::new();
    for (gw, gb) in &unit_grads {
        grad.extend(gw.iter());
        grad.extend(gb.iter());
    }
    grad.extend(grad_sw.iter());
    grad.extend(grad_sb.iter());

    Ok((ce, grad))
}

/// Jointly train encoders and softmax head on cross-entropy. Zero
/// iterations returns the model unchanged.
pub fn fine_tune(mut model: FssaeModel, ds: &Dataset) -> Result<FssaeModel> {
    if ds.n_features() != model.input_dim {
        return Err(Error::shape("dataset width differs from training-time width"));
    }
    if ds.class_count() != model.class_count {
        return Err(Error::invalid("class count differs from pretraining"));
    }
    let iterations = model.config.finetune_iterations;
    if iterations == 0 {
        return Ok(model);
    }

    let layout = ParamLayout::of(&model);
    let x0 = layout.pack(&model);
    let features = ds.features().clone();
    let labels = ds.labels().to_vec();

    let initial = stack_ce_and_gradient(&model, &features, &labels)?;
    if !initial.0.is_finite() {
        return Err(Error::numerical(format!(
            "initial cross-entropy {} is not finite",
            initial.0
        )));
    }

    let mut scratch = model.clone();
    let mut objective = |x: &[f64]| -> (f64, Vec<f64>) {
        layout.unpack(x, &mut scratch);
        stack_ce_and_gradient(&scratch, &features, &labels)
            .unwrap_or_else(|_| (f64::INFINITY, vec![0.0; layout.total]))
    };

    let result = match model.config.finetune_optimizer {
        FinetuneOptimizer::Scg => minimize_scg(
            &mut objective,
            x0,
            &ScgOptions {
                max_iterations: iterations,
                ..ScgOptions::default()
            },
        ),
        FinetuneOptimizer::Gd { learn_rate } => {
            minimize_gd(&mut objective, x0, learn_rate, iterations)
        }
    };

    layout.unpack(&result.x, &mut model);
    model.fine_tuned = true;
    model.finetune_initial_ce = Some(result.initial_value);
    model.finetune_final_ce = Some(result.value);
    Ok(model)
}

/// Expanded features: original columns first (bit-identical to the input),
/// then the last hidden layer, one column per deep feature.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExpandedData {
    pub data: Array2<f64>,
    pub original_cols: usize,
}

impl ExpandedData {
    pub fn deep_cols(&self) -> usize {
        self.data.ncols() - self.original_cols
    }
}

pub fn expand_features(model: &FssaeModel, features: &Array2<f64>) -> Result<ExpandedData> {
    let hidden = model.forward_hidden(features)?;
    let deep = hidden.last().unwrap();
    let n = features.nrows();
    let m = features.ncols();
    let mut data = Array2::zeros((n, m + deep.nrows()));
    data.slice_mut(s![.., ..m]).assign(features);
    data.slice_mut(s![.., m..]).assign(&deep.t());
    Ok(ExpandedData {
        data,
        original_cols: m,
    })
}

/// Predicted class indices from the softmax head (used by fine-tune tests
/// and the expansion-only baseline's diagnostics).
pub fn softmax_predict(model: &FssaeModel, features: &Array2<f64>) -> Result<Vec<usize>> {
    let hidden = model.forward_hidden(features)?;
    let last = hidden.last().unwrap();
    let mut logits = model.softmax.w.dot(last);
    for mut col in logits.columns_mut() {
        col += &model.softmax.b;
    }
    Ok(logits
        .columns()
        .into_iter()
        .map(|col| {
            let mut best = 0;
            for (c, &v) in col.iter().enumerate() {
                if v > col[best] {
                    best = c;
                }
            }
            best
        })
        .collect())
}

// Re-exported so config code can reference the sigmoid choice.
pub use crate::sparse_ae::sigmoid as activation;
