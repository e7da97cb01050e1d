//! Bagged subspace ensemble: each member draws a bootstrap sample and a
//! feature subspace, fits a locality-preserving discriminant projection on
//! it, and trains an SVM on the projected data. Fusion happens at decision
//! level as a weighted vote whose weights are searched on an inner
//! validation split.

use ndarray::Array2;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::data::stratified_split;
use crate::error::{Error, Result};
use crate::reduction::{
    build_graph, make_subsets, median_pairwise_distance, scatter_matrices, solve_wlpdp,
    SigmaPolicy, SubsetSpec, WlpdpConfig, WlpdpModel,
};
use crate::seeding::derive_seed;
use crate::svm::{train_svm, SvmConfig, SvmModel};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EnsembleConfig {
    /// Number of bagged members T.
    pub subsets: usize,
    /// Bootstrap sample ratio.
    pub delta_s: f64,
    /// Feature subspace ratio.
    pub delta_f: f64,
    pub wlpdp: WlpdpConfig,
    pub svm: SvmConfig,
    /// Dirichlet candidates tried by the weight search (uniform and
    /// accuracy-proportional seeds are always included on top).
    pub weight_candidates: usize,
    /// Fraction of the training data held out for the weight search.
    pub validation_fraction: f64,
    pub seed: u64,
}

impl Default for EnsembleConfig {
    fn default() -> Self {
        EnsembleConfig {
            subsets: 10,
            delta_s: 0.7,
            delta_f: 0.5,
            wlpdp: WlpdpConfig::default(),
            svm: SvmConfig::default(),
            weight_candidates: 200,
            validation_fraction: 0.2,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EnsembleMember {
    pub subset: SubsetSpec,
    pub projection: WlpdpModel,
    pub svm: SvmModel,
    pub weight: f64,
    pub train_accuracy: f64,
}

impl EnsembleMember {
    /// Slice this member's feature subset out of the reduced matrix,
    /// project, and predict.
    pub fn predict(&self, x: &Array2<f64>) -> Result<Vec<usize>> {
        let sliced = x.select(ndarray::Axis(1), &self.subset.feature_indices);
        let projected = self.projection.project(&sliced)?;
        self.svm.predict(&projected)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EnsembleModel {
    pub members: Vec<EnsembleMember>,
    pub class_count: usize,
    /// Width of the reduced feature matrix members index into.
    pub feature_count: usize,
}

/// Fit one projection + SVM on the full data with all features: the
/// standalone (non-bagged) second-stage path, also used by ablations.
pub fn fit_single_path(
    x: &Array2<f64>,
    y: &[usize],
    class_count: usize,
    wlpdp_cfg: &WlpdpConfig,
    svm_cfg: &SvmConfig,
) -> Result<(WlpdpModel, SvmModel)> {
    let (s_b, s_w) = scatter_matrices(x, y, class_count)?;
    let k_nn = wlpdp_cfg.k_nn.min(x.nrows().saturating_sub(1)).max(1);
    let sigma = match wlpdp_cfg.sigma {
        SigmaPolicy::Median => median_pairwise_distance(x),
        SigmaPolicy::Fixed(s) => s,
    };
    let affinity = build_graph(x, k_nn, sigma)?;
    let projection = solve_wlpdp(
        &s_b,
        &s_w,
        x,
        &affinity.laplacian,
        wlpdp_cfg,
        class_count,
        (0..x.ncols()).collect(),
    )?;
    let projected = projection.project(x)?;
    let svm = train_svm(&projected, y, svm_cfg)?;
    Ok((projection, svm))
}

fn fit_member(
    x: &Array2<f64>,
    y: &[usize],
    class_count: usize,
    spec: &SubsetSpec,
    cfg: &EnsembleConfig,
) -> Result<EnsembleMember> {
    let sub_x = x
        .select(ndarray::Axis(0), &spec.sample_indices)
        .select(ndarray::Axis(1), &spec.feature_indices);
    let sub_y: Vec<usize> = spec.sample_indices.iter().map(|&i| y[i]).collect();

    let (s_b, s_w) = scatter_matrices(&sub_x, &sub_y, class_count)?;
    let k_nn = cfg.wlpdp.k_nn.min(sub_x.nrows().saturating_sub(1)).max(1);
    let sigma = match cfg.wlpdp.sigma {
        SigmaPolicy::Median => median_pairwise_distance(&sub_x),
        SigmaPolicy::Fixed(s) => s,
    };
    let affinity = build_graph(&sub_x, k_nn, sigma)?;
    let projection = solve_wlpdp(
        &s_b,
        &s_w,
        &sub_x,
        &affinity.laplacian,
        &cfg.wlpdp,
        class_count,
        spec.feature_indices.clone(),
    )?;
    let projected = projection.project(&sub_x)?;

    let mut svm_cfg = cfg.svm.clone();
    svm_cfg.seed = derive_seed(spec.seed, "svm", 0);
    let svm = train_svm(&projected, &sub_y, &svm_cfg)?;
    let train_accuracy = svm.train_accuracy;

    Ok(EnsembleMember {
        subset: spec.clone(),
        projection,
        svm,
        weight: 0.0,
        train_accuracy,
    })
}

/// Fit the ensemble on an already-reduced feature matrix. With a single
/// member the full data trains it and the weight is 1; otherwise members
/// train on a stratified 80% pool and the remaining rows drive the weight
/// search.
pub fn fit_ensemble(
    x: &Array2<f64>,
    y: &[usize],
    class_count: usize,
    cfg: &EnsembleConfig,
) -> Result<EnsembleModel> {
    if cfg.subsets == 0 {
        return Err(Error::invalid("ensemble needs at least one member"));
    }
    if x.nrows() != y.len() {
        return Err(Error::shape("label count mismatch"));
    }

    let (pool_idx, val_idx) = if cfg.subsets == 1 {
        ((0..x.nrows()).collect::<Vec<_>>(), Vec::new())
    } else {
        stratified_split(
            y,
            class_count,
            cfg.validation_fraction,
            derive_seed(cfg.seed, "weight-val", 0),
        )?
    };

    let pool_x = x.select(ndarray::Axis(0), &pool_idx);
    let pool_y: Vec<usize> = pool_idx.iter().map(|&i| y[i]).collect();

    let specs = make_subsets(
        &pool_y,
        class_count,
        x.ncols(),
        cfg.delta_s,
        cfg.delta_f,
        cfg.subsets,
        derive_seed(cfg.seed, "bagging", 0),
    )?;

    let mut members = Vec::with_capacity(specs.len());
    for (t, spec) in specs.iter().enumerate() {
        // A draw can defeat the projection (e.g. a class collapsing to one
        // point); retry with fresh sample draws before giving up.
        let mut fitted = fit_member(&pool_x, &pool_y, class_count, spec, cfg);
        if fitted.is_err() {
            for retry in 1..=20u64 {
                let respec = make_subsets(
                    &pool_y,
                    class_count,
                    x.ncols(),
                    cfg.delta_s,
                    cfg.delta_f,
                    1,
                    derive_seed(spec.seed, "retry", retry),
                )?
                .pop()
                .expect("one spec requested");
                log::warn!("member {t}: refit after failure ({retry})");
                fitted = fit_member(&pool_x, &pool_y, class_count, &respec, cfg);
                if fitted.is_ok() {
                    break;
                }
            }
        }
        members.push(fitted?);
    }

    let weights = if members.len() == 1 || val_idx.is_empty() {
        vec![1.0 / members.len() as f64; members.len()]
    } else {
        let val_x = x.select(ndarray::Axis(0), &val_idx);
        let val_y: Vec<usize> = val_idx.iter().map(|&i| y[i]).collect();
        let votes: Vec<Vec<usize>> = members
            .iter()
            .map(|m| m.predict(&val_x))
            .collect::<Result<_>>()?;
        optimize_subspace_weights(
            &votes,
            &val_y,
            class_count,
            cfg.weight_candidates,
            derive_seed(cfg.seed, "weights", 0),
        )?
    };
    for (member, w) in members.iter_mut().zip(&weights) {
        member.weight = *w;
    }

    Ok(EnsembleModel {
        members,
        class_count,
        feature_count: x.ncols(),
    })
}

/// Weighted-vote accuracy of fixed member votes under candidate weights.
fn vote_accuracy(votes: &[Vec<usize>], weights: &[f64], y: &[usize], class_count: usize) -> f64 {
    let mut correct = 0usize;
    for (i, &truth) in y.iter().enumerate() {
        let label = weighted_vote(votes.iter().map(|v| v[i]), weights, class_count);
        if label == truth {
            correct += 1;
        }
    }
    correct as f64 / y.len() as f64
}

fn weighted_vote(
    member_votes: impl Iterator<Item = usize>,
    weights: &[f64],
    class_count: usize,
) -> usize {
    let mut scores = vec![0.0f64; class_count];
    for (vote, &w) in member_votes.zip(weights) {
        scores[vote] += w;
    }
    // Strict comparison: ties resolve to the lowest class index.
    let mut best = 0;
    for (c, &s) in scores.iter().enumerate() {
        if s > scores[best] {
            best = c;
        }
    }
    best
}

/// Search fusion weights over `candidates` Dirichlet draws plus the uniform
/// and accuracy-proportional seeds, maximizing validation accuracy. The
/// uniform candidate is scanned first and displaced only by strictly better
/// ones, so ties resolve to uniform and the search never underperforms it.
pub fn optimize_subspace_weights(
    votes: &[Vec<usize>],
    y_val: &[usize],
    class_count: usize,
    candidates: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    let t = votes.len();
    if t == 0 {
        return Err(Error::invalid("no members to weight"));
    }
    if y_val.is_empty() {
        return Err(Error::invalid("empty validation set"));
    }
    if votes.iter().any(|v| v.len() != y_val.len()) {
        return Err(Error::shape("vote/label length mismatch"));
    }
    if t == 1 {
        return Ok(vec![1.0]);
    }

    let uniform = vec![1.0 / t as f64; t];
    let mut best_weights = uniform.clone();
    let mut best_acc = vote_accuracy(votes, &uniform, y_val, class_count);

    // Accuracy-proportional seed.
    let accs: Vec<f64> = votes
        .iter()
        .map(|v| {
            v.iter().zip(y_val).filter(|(p, l)| p == l).count() as f64 / y_val.len() as f64
        })
        .collect();
    let total: f64 = accs.iter().sum();
    if total > 0.0 {
        let proportional: Vec<f64> = accs.iter().map(|a| a / total).collect();
        let acc = vote_accuracy(votes, &proportional, y_val, class_count);
        if acc > best_acc {
            best_acc = acc;
            best_weights = proportional;
        }
    }

    // Flat Dirichlet draws: normalized unit-exponential samples.
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    for _ in 0..candidates {
        let raw: Vec<f64> = (0..t)
            .map(|_| -rng.random_range(f64::MIN_POSITIVE..1.0f64).ln())
            .collect();
        let sum: f64 = raw.iter().sum();
        let w: Vec<f64> = raw.iter().map(|v| v / sum).collect();
        let acc = vote_accuracy(votes, &w, y_val, class_count);
        if acc > best_acc {
            best_acc = acc;
            best_weights = w;
        }
    }

    let sum: f64 = best_weights.iter().sum();
    Ok(best_weights.iter().map(|w| w / sum).collect())
}

/// Weighted vote over member predictions; ties resolve to the lowest class
/// index, and the result is invariant to member order.
pub fn predict_ensemble(model: &EnsembleModel, x: &Array2<f64>) -> Result<Vec<usize>> {
    if x.ncols() != model.feature_count {
        return Err(Error::shape(format!(
            "{} features vs ensemble's {}",
            x.ncols(),
            model.feature_count
        )));
    }
    let votes: Vec<Vec<usize>> = model
        .members
        .iter()
        .map(|m| m.predict(x))
        .collect::<Result<_>>()?;
    let weights: Vec<f64> = model.members.iter().map(|m| m.weight).collect();
    Ok((0..x.nrows())
        .map(|i| weighted_vote(votes.iter().map(|v| v[i]), &weights, model.class_count))
        .collect())
}
