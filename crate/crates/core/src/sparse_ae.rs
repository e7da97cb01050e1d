//! A single sparse autoencoder unit: sigmoid encoder/decoder, composite
//! loss (reconstruction + weight decay + KL sparsity + group L1), analytic
//! gradients, and full-batch gradient descent training.
//!
//! Sample matrices here are column-major in the sample sense: an input is
//! `features x N`, one column per sample.

use ndarray::{Array1, Array2, Axis};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const RHO_EPS: f64 = 1e-8;

/// Two disjoint hidden-unit index groups covering `0..hidden_dim`. The L1
/// penalty is reported per group; a group may be empty.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupPartition {
    pub first: Vec<usize>,
    pub second: Vec<usize>,
}

impl GroupPartition {
    /// Contiguous split: units `0..split` in the first group, the rest in
    /// the second.
    pub fn contiguous(split: usize, hidden_dim: usize) -> Result<GroupPartition> {
        if split > hidden_dim {
            return Err(Error::invalid(format!(
                "group split {split} exceeds hidden dim {hidden_dim}"
            )));
        }
        Ok(GroupPartition {
            first: (0..split).collect(),
            second: (split..hidden_dim).collect(),
        })
    }

    pub fn validate(&self, hidden_dim: usize) -> Result<()> {
        let mut seen = vec![false; hidden_dim];
        for &i in self.first.iter().chain(self.second.iter()) {
            if i >= hidden_dim {
                return Err(Error::invalid(format!(
                    "group index {i} outside 0..{hidden_dim}"
                )));
            }
            if seen[i] {
                return Err(Error::invalid(format!("group index {i} appears twice")));
            }
            seen[i] = true;
        }
        if let Some(missing) = seen.iter().position(|s| !s) {
            return Err(Error::invalid(format!(
                "hidden unit {missing} not covered by either group"
            )));
        }
        Ok(())
    }
}

/// Configuration of one autoencoder unit.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AeConfig {
    pub input_dim: usize,
    pub hidden_dim: usize,
    /// Weight-decay coefficient on the squared Frobenius norms of both
    /// weight matrices.
    pub lambda: f64,
    /// Sparsity coefficient scaling the KL and group-L1 terms.
    pub beta: f64,
    /// Target mean hidden activation, in (0, 1).
    pub rho: f64,
    /// Hidden-unit grouping for the L1 term; `None` drops the term (used by
    /// the first stack layer, where only one feature type exists).
    pub partition: Option<GroupPartition>,
    pub max_iterations: usize,
    pub learn_rate: f64,
    /// Momentum factor; 0 disables it.
    pub momentum: f64,
    pub seed: u64,
}

impl AeConfig {
    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.hidden_dim == 0 {
            return Err(Error::invalid("autoencoder dims must be positive"));
        }
        if !(self.rho > 0.0 && self.rho < 1.0) {
            return Err(Error::invalid(format!("rho {} must be in (0, 1)", self.rho)));
        }
        if self.lambda < 0.0 || self.beta < 0.0 {
            return Err(Error::invalid("lambda and beta must be non-negative"));
        }
        if self.learn_rate <= 0.0 {
            return Err(Error::invalid("learn_rate must be positive"));
        }
        if let Some(p) = &self.partition {
            p.validate(self.hidden_dim)?;
        }
        Ok(())
    }
}

/// Encoder/decoder weights of one unit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AeWeights {
    /// hidden_dim x input_dim
    pub w1: Array2<f64>,
    pub b1: Array1<f64>,
    /// input_dim x hidden_dim
    pub w2: Array2<f64>,
    pub b2: Array1<f64>,
}

impl AeWeights {
    /// Seeded uniform initialization in [-r, r], r = sqrt(6 / (fan_in + fan_out)).
    pub fn init(input_dim: usize, hidden_dim: usize, seed: u64) -> AeWeights {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let r = (6.0 / (input_dim + hidden_dim) as f64).sqrt();
        let mut sample = |rows: usize, cols: usize| {
            Array2::from_shape_fn((rows, cols), |_| rng.random_range(-r..r))
        };
        AeWeights {
            w1: sample(hidden_dim, input_dim),
            b1: Array1::zeros(hidden_dim),
            w2: sample(input_dim, hidden_dim),
            b2: Array1::zeros(input_dim),
        }
    }

    pub fn hidden_dim(&self) -> usize {
        self.w1.nrows()
    }

    pub fn input_dim(&self) -> usize {
        self.w1.ncols()
    }

    fn check_input(&self, x: &Array2<f64>) -> Result<()> {
        if x.nrows() != self.input_dim() {
            return Err(Error::shape(format!(
                "input has {} rows, weights expect {}",
                x.nrows(),
                self.input_dim()
            )));
        }
        Ok(())
    }
}

/// Gradient of the composite loss, same shape as the weights.
#[derive(Debug, Clone)]
pub struct AeGradient {
    pub w1: Array2<f64>,
    pub b1: Array1<f64>,
    pub w2: Array2<f64>,
    pub b2: Array1<f64>,
}

pub fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

fn affine_sigmoid(w: &Array2<f64>, b: &Array1<f64>, x: &Array2<f64>) -> Array2<f64> {
    let mut z = w.dot(x);
    for mut col in z.columns_mut() {
        col += b;
    }
    z.mapv_inplace(sigmoid);
    z
}

/// Hidden activations `sigma(W1 x + b1)`, one column per sample.
pub fn encode(w: &AeWeights, x: &Array2<f64>) -> Result<Array2<f64>> {
    w.check_input(x)?;
    Ok(affine_sigmoid(&w.w1, &w.b1, x))
}

/// Reconstruction `sigma(W2 h + b2)`.
pub fn decode(w: &AeWeights, h: &Array2<f64>) -> Result<Array2<f64>> {
    if h.nrows() != w.hidden_dim() {
        return Err(Error::shape(format!(
            "hidden input has {} rows, weights expect {}",
            h.nrows(),
            w.hidden_dim()
        )));
    }
    Ok(affine_sigmoid(&w.w2, &w.b2, h))
}

/// KL divergence between the Bernoulli target activation `rho` and each
/// observed mean activation, summed over hidden units. Observed values are
/// clamped into [eps, 1-eps] before the logs.
pub fn kl_sparsity(rho: f64, rho_hat: &Array1<f64>) -> f64 {
    rho_hat
        .iter()
        .map(|&r| {
            let r = clamp_rho(r);
            rho * (rho / r).ln() + (1.0 - rho) * ((1.0 - rho) / (1.0 - r)).ln()
        })
        .sum()
}

fn clamp_rho(r: f64) -> f64 {
    if !(RHO_EPS..=1.0 - RHO_EPS).contains(&r) {
        log::warn!("mean activation {r} clamped into ({RHO_EPS}, {})", 1.0 - RHO_EPS);
        r.clamp(RHO_EPS, 1.0 - RHO_EPS)
    } else {
        r
    }
}

/// Sum over groups of the entrywise L1 norm of the group's rows of `h`.
/// When the groups partition all rows this equals the entrywise L1 of `h`.
pub fn group_sparsity(h: &Array2<f64>, partition: &GroupPartition) -> Result<f64> {
    partition.validate(h.nrows())?;
    let group_sum = |rows: &[usize]| -> f64 {
        rows.iter()
            .map(|&r| h.row(r).iter().map(|v| v.abs()).sum::<f64>())
            .sum()
    };
    Ok(group_sum(&partition.first) + group_sum(&partition.second))
}

/// The four loss terms, kept separate so tests can check the additive
/// structure.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossTerms {
    pub reconstruction: f64,
    pub weight_decay: f64,
    pub kl: f64,
    pub group_l1: f64,
}

impl LossTerms {
    pub fn total(&self) -> f64 {
        self.reconstruction + self.weight_decay + self.kl + self.group_l1
    }
}

/// Composite loss: mean squared reconstruction error over samples, plus
/// `lambda` times the squared Frobenius norms of the weights, plus `beta`
/// times (KL sparsity + group L1 scaled by 1/N).
pub fn ae_loss_terms(w: &AeWeights, x: &Array2<f64>, cfg: &AeConfig) -> Result<LossTerms> {
    cfg.validate()?;
    w.check_input(x)?;
    let n = x.ncols() as f64;
    let h = encode(w, x)?;
    let x_rec = decode(w, &h)?;

    let reconstruction = (&x_rec - x).mapv(|d| d * d).sum() / n;
    let weight_decay = cfg.lambda * (frob_sq(&w.w1) + frob_sq(&w.w2));

    let rho_hat = h.mean_axis(Axis(1)).expect("non-empty batch");
    let kl = cfg.beta * kl_sparsity(cfg.rho, &rho_hat);

    let group_l1 = match &cfg.partition {
        Some(p) => cfg.beta * group_sparsity(&h, p)? / n,
        None => 0.0,
    };

    Ok(LossTerms {
        reconstruction,
        weight_decay,
        kl,
        group_l1,
    })
}

pub fn ae_loss(w: &AeWeights, x: &Array2<f64>, cfg: &AeConfig) -> Result<f64> {
    Ok(ae_loss_terms(w, x, cfg)?.total())
}

fn frob_sq(m: &Array2<f64>) -> f64 {
    m.iter().map(|v| v * v).sum()
}

/// Analytic gradient of [`ae_loss`] with respect to all weights and biases.
/// The KL term is backpropagated through the batch-mean activations; the L1
/// subgradient is taken as 0 at exact zeros.
pub fn ae_gradient(w: &AeWeights, x: &Array2<f64>, cfg: &AeConfig) -> Result<AeGradient> {
    cfg.validate()?;
    w.check_input(x)?;
    let n = x.ncols() as f64;

    let h = encode(w, x)?;
    let x_rec = decode(w, &h)?;

    // Output layer: d(recon)/d(z2) = (2/N) (x' - x) sigma'(z2).
    let mut delta2 = (&x_rec - x) * (2.0 / n);
    delta2 = delta2 * &x_rec.mapv(|v| v * (1.0 - v));

    let grad_w2 = delta2.dot(&h.t()) + &(w.w2.mapv(|v| 2.0 * cfg.lambda * v));
    let grad_b2 = delta2.sum_axis(Axis(1));

    // Backprop into hidden activations.
    let mut d_h = w.w2.t().dot(&delta2);

    if cfg.beta > 0.0 {
        let rho_hat = h.mean_axis(Axis(1)).expect("non-empty batch");
        // KL term: d/d rho_hat_j = beta (-rho/rho_hat + (1-rho)/(1-rho_hat)),
        // spread uniformly over the N samples contributing to the mean.
        let kl_row = rho_hat.mapv(|r| {
            let r = clamp_rho(r);
            cfg.beta * (-cfg.rho / r + (1.0 - cfg.rho) / (1.0 - r)) / n
        });
        for (j, mut row) in d_h.rows_mut().into_iter().enumerate() {
            row += kl_row[j];
        }
        if cfg.partition.is_some() {
            // Group L1: beta/N * sign(h); groups partition the rows, so the
            // subgradient covers every entry.
            d_h = d_h + &h.mapv(|v| cfg.beta * sign0(v) / n);
        }
    }

    let delta1 = d_h * &h.mapv(|v| v * (1.0 - v));
    let grad_w1 = delta1.dot(&x.t()) + &(w.w1.mapv(|v| 2.0 * cfg.lambda * v));
    let grad_b1 = delta1.sum_axis(Axis(1));

    Ok(AeGradient {
        w1: grad_w1,
        b1: grad_b1,
        w2: grad_w2,
        b2: grad_b2,
    })
}

fn sign0(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Outcome of a training run.
#[derive(Debug, Clone)]
pub struct AeTraining {
    pub weights: AeWeights,
    pub initial_loss: f64,
    pub final_loss: f64,
    pub iterations: usize,
}

/// Full-batch gradient descent with optional momentum. A step is accepted
/// only if it does not increase the loss; rejected steps shrink the rate
/// and reset momentum, so the loss history is non-increasing. Deterministic
/// under `cfg.seed`.
pub fn train_autoencoder(x: &Array2<f64>, cfg: &AeConfig) -> Result<AeTraining> {
    cfg.validate()?;
    if cfg.max_iterations == 0 {
        return Err(Error::invalid("max_iterations must be >= 1"));
    }
    if x.ncols() == 0 {
        return Err(Error::invalid("empty training batch"));
    }
    let mut w = AeWeights::init(cfg.input_dim, cfg.hidden_dim, cfg.seed);
    let initial_loss = ae_loss(&w, x, cfg)?;
    if !initial_loss.is_finite() {
        return Err(Error::numerical(format!(
            "initial loss {initial_loss} is not finite"
        )));
    }

    let mut loss = initial_loss;
    let mut vel: Option<AeGradient> = None;
    let mut iterations = 0;

    'outer: for _ in 0..cfg.max_iterations {
        let grad = ae_gradient(&w, x, cfg)?;
        let step = match (&mut vel, cfg.momentum > 0.0) {
            (Some(v), true) => {
                scale_add(v, cfg.momentum, &grad);
                v.clone()
            }
            (None, true) => {
                vel = Some(grad.clone());
                grad
            }
            (_, false) => grad,
        };

        let mut rate = cfg.learn_rate;
        for _ in 0..30 {
            let candidate = apply_step(&w, &step, rate);
            let cand_loss = ae_loss(&candidate, x, cfg)?;
            if cand_loss.is_finite() && cand_loss <= loss {
                w = candidate;
                loss = cand_loss;
                iterations += 1;
                continue 'outer;
            }
            rate *= 0.5;
        }
        // No usable step at any rate: converged (or stuck).
        break;
    }

    Ok(AeTraining {
        weights: w,
        initial_loss,
        final_loss: loss,
        iterations,
    })
}

fn scale_add(v: &mut AeGradient, momentum: f64, g: &AeGradient) {
    v.w1 = &v.w1 * momentum + &g.w1;
    v.b1 = &v.b1 * momentum + &g.b1;
    v.w2 = &v.w2 * momentum + &g.w2;
    v.b2 = &v.b2 * momentum + &g.b2;
}

fn apply_step(w: &AeWeights, g: &AeGradient, rate: f64) -> AeWeights {
    AeWeights {
        w1: &w.w1 - &(&g.w1 * rate),
        b1: &w.b1 - &(&g.b1 * rate),
        w2: &w.w2 - &(&g.w2 * rate),
        b2: &w.b2 - &(&g.b2 * rate),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn cfg(input: usize, hidden: usize) -> AeConfig {
        AeConfig {
            input_dim: input,
            hidden_dim: hidden,
            lambda: 0.0,
            beta: 0.0,
            rho: 0.05,
            partition: None,
            max_iterations: 100,
            learn_rate: 0.5,
            momentum: 0.0,
            seed: 1,
        }
    }

    #[test]
    fn zero_weights_encode_to_half() {
        let w = AeWeights {
            w1: Array2::zeros((3, 2)),
            b1: Array1::zeros(3),
            w2: Array2::zeros((2, 3)),
            b2: Array1::zeros(2),
        };
        let x = array![[0.3, 0.9], [0.1, 0.4]];
        let h = encode(&w, &x).unwrap();
        assert!(h.iter().all(|&v| v == 0.5));
    }

    #[test]
    fn sigmoid_saturates_for_large_bias() {
        let w = AeWeights {
            w1: array![[0.0]],
            b1: array![10.0],
            w2: array![[0.0]],
            b2: array![0.0],
        };
        let x = array![[0.7]];
        let h = encode(&w, &x).unwrap();
        assert!((h[[0, 0]] - 1.0).abs() < 1e-4);
    }

    #[test]
    fn encode_shape_contract() {
        let w = AeWeights::init(5, 3, 42);
        let x = Array2::from_shape_fn((5, 7), |(i, j)| ((i * 7 + j) as f64).sin().abs());
        let h = encode(&w, &x).unwrap();
        assert_eq!(h.dim(), (3, 7));
        assert!(h.iter().all(|&v| v > 0.0 && v < 1.0));
        assert!(encode(&w, &Array2::zeros((4, 7))).is_err());
    }

    #[test]
    fn kl_zero_iff_equal() {
        assert_eq!(kl_sparsity(0.05, &array![0.05, 0.05]), 0.0);
        // Direct evaluation of the two-term closed form as oracle.
        let rho: f64 = 0.05;
        let r: f64 = 0.5;
        let expected = rho * (rho / r).ln() + (1.0 - rho) * ((1.0 - rho) / (1.0 - r)).ln();
        let got = kl_sparsity(rho, &array![r]);
        assert!((got - expected).abs() < 1e-15);
        assert!(got > 0.0);
    }

    #[test]
    fn kl_monotone_in_distance() {
        let far = kl_sparsity(0.05, &array![0.5]);
        let near = kl_sparsity(0.05, &array![0.3]);
        assert!(far > near);
        // Also on the low side.
        assert!(kl_sparsity(0.05, &array![0.001]) > kl_sparsity(0.05, &array![0.01]));
    }

    #[test]
    fn group_sparsity_cases() {
        let zeros = Array2::<f64>::zeros((2, 3));
        let p = GroupPartition::contiguous(1, 2).unwrap();
        assert_eq!(group_sparsity(&zeros, &p).unwrap(), 0.0);

        let h = array![[1.0, -2.0], [3.0, 0.0]];
        assert_eq!(group_sparsity(&h, &p).unwrap(), 6.0);

        let all_first = GroupPartition::contiguous(2, 2).unwrap();
        assert_eq!(group_sparsity(&h, &all_first).unwrap(), 6.0);

        let overlapping = GroupPartition {
            first: vec![0, 1],
            second: vec![1],
        };
        assert!(group_sparsity(&h, &overlapping).is_err());
        let incomplete = GroupPartition {
            first: vec![0],
            second: vec![],
        };
        assert!(group_sparsity(&h, &incomplete).is_err());
    }

    #[test]
    fn loss_is_zero_at_perfect_reconstruction() {
        // With W=0 and b2 chosen so sigma(b2)=x for a constant input of 0.5,
        // every term vanishes when rho_hat == rho is impossible; instead use
        // beta=0, lambda=0 and x=0.5 so x' = sigma(0) = 0.5 = x.
        let w = AeWeights {
            w1: Array2::zeros((2, 2)),
            b1: Array1::zeros(2),
            w2: Array2::zeros((2, 2)),
            b2: Array1::zeros(2),
        };
        let x = Array2::from_elem((2, 3), 0.5);
        let c = cfg(2, 2);
        assert_eq!(ae_loss(&w, &x, &c).unwrap(), 0.0);
    }

    #[test]
    fn loss_reduces_to_mse_when_penalties_off() {
        let w = AeWeights::init(3, 2, 5);
        let x = Array2::from_shape_fn((3, 4), |(i, j)| 0.1 + 0.2 * ((i + j) as f64 % 3.0));
        let c = cfg(3, 2);
        let h = encode(&w, &x).unwrap();
        let xr = decode(&w, &h).unwrap();
        let mse = (&xr - &x).mapv(|d| d * d).sum() / 4.0;
        let loss = ae_loss(&w, &x, &c).unwrap();
        assert!((loss - mse).abs() < 1e-14);
    }

    #[test]
    fn loss_decomposes_additively() {
        let w = AeWeights::init(4, 3, 9);
        let x = Array2::from_shape_fn((4, 6), |(i, j)| 0.05 + 0.9 * (((i * 6 + j) % 7) as f64 / 7.0));
        let mut c = cfg(4, 3);
        c.lambda = 0.3;
        c.beta = 1.7;
        c.partition = Some(GroupPartition::contiguous(2, 3).unwrap());

        let terms = ae_loss_terms(&w, &x, &c).unwrap();

        let mut only_recon = c.clone();
        only_recon.lambda = 0.0;
        only_recon.beta = 0.0;
        let recon = ae_loss(&w, &x, &only_recon).unwrap();

        let mut no_beta = c.clone();
        no_beta.beta = 0.0;
        let recon_l2 = ae_loss(&w, &x, &no_beta).unwrap();

        let mut no_lambda = c.clone();
        no_lambda.lambda = 0.0;
        let recon_sparse = ae_loss(&w, &x, &no_lambda).unwrap();

        let total = ae_loss(&w, &x, &c).unwrap();
        assert!((terms.total() - total).abs() < 1e-12);
        assert!((recon - terms.reconstruction).abs() < 1e-12);
        assert!(((recon_l2 - recon) - terms.weight_decay).abs() < 1e-12);
        assert!(((recon_sparse - recon) - (terms.kl + terms.group_l1)).abs() < 1e-12);
        assert!(((total - recon) - (terms.weight_decay + terms.kl + terms.group_l1)).abs() < 1e-12);
    }

    /// Central finite-difference gradient of the loss; the independent
    /// oracle for the analytic backprop.
    fn finite_diff(w: &AeWeights, x: &Array2<f64>, cfg: &AeConfig, step: f64) -> AeGradient {
        let mut perturb = |f: &mut dyn FnMut(&mut AeWeights) -> &mut f64| {
            let mut wp = w.clone();
            let mut wm = w.clone();
            *f(&mut wp) += step;
            *f(&mut wm) -= step;
            (ae_loss(&wp, x, cfg).unwrap() - ae_loss(&wm, x, cfg).unwrap()) / (2.0 * step)
        };
        let g_mat = |m: fn(&mut AeWeights) -> &mut Array2<f64>,
                     perturb: &mut dyn FnMut(&mut dyn FnMut(&mut AeWeights) -> &mut f64) -> f64,
                     shape: (usize, usize)| {
            Array2::from_shape_fn(shape, |(i, j)| perturb(&mut |w| &mut m(w)[[i, j]]))
        };
        let g_vec = |v: fn(&mut AeWeights) -> &mut Array1<f64>,
                     perturb: &mut dyn FnMut(&mut dyn FnMut(&mut AeWeights) -> &mut f64) -> f64,
                     len: usize| { Array1::from_shape_fn(len, |i| perturb(&mut |w| &mut v(w)[i])) };
        AeGradient {
            w1: g_mat(|w| &mut w.w1, &mut perturb, w.w1.dim()),
            b1: g_vec(|w| &mut w.b1, &mut perturb, w.b1.len()),
            w2: g_mat(|w| &mut w.w2, &mut perturb, w.w2.dim()),
            b2: g_vec(|w| &mut w.b2, &mut perturb, w.b2.len()),
        }
    }

    pub(crate) fn max_rel_err(a: &AeGradient, b: &AeGradient) -> f64 {
        let pair = |x: f64, y: f64| (x - y).abs() / x.abs().max(y.abs()).max(1e-8);
        let mut worst: f64 = 0.0;
        for (x, y) in a.w1.iter().zip(b.w1.iter()) {
            worst = worst.max(pair(*x, *y));
        }
        for (x, y) in a.b1.iter().zip(b.b1.iter()) {
            worst = worst.max(pair(*x, *y));
        }
        for (x, y) in a.w2.iter().zip(b.w2.iter()) {
            worst = worst.max(pair(*x, *y));
        }
        for (x, y) in a.b2.iter().zip(b.b2.iter()) {
            worst = worst.max(pair(*x, *y));
        }
        worst
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut c = cfg(5, 3);
        c.lambda = 0.01;
        c.beta = 2.0;
        c.rho = 0.07;
        c.partition = Some(GroupPartition::contiguous(2, 3).unwrap());
        let w = AeWeights::init(5, 3, 17);
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        let x = Array2::from_shape_fn((5, 11), |_| rng.random_range(0.05..0.95));

        let analytic = ae_gradient(&w, &x, &c).unwrap();
        let numeric = finite_diff(&w, &x, &c, 1e-6);
        let err = max_rel_err(&analytic, &numeric);
        assert!(err < 1e-5, "max relative error {err}");
    }

    #[test]
    fn gradient_zero_at_reconstruction_minimum() {
        let w = AeWeights {
            w1: Array2::zeros((2, 2)),
            b1: Array1::zeros(2),
            w2: Array2::zeros((2, 2)),
            b2: Array1::zeros(2),
        };
        let x = Array2::from_elem((2, 3), 0.5);
        let g = ae_gradient(&w, &x, &cfg(2, 2)).unwrap();
        assert!(g.w1.iter().all(|&v| v.abs() < 1e-15));
        assert!(g.w2.iter().all(|&v| v.abs() < 1e-15));
        assert!(g.b1.iter().all(|&v| v.abs() < 1e-15));
        assert!(g.b2.iter().all(|&v| v.abs() < 1e-15));
    }

    #[test]
    fn doubling_lambda_doubles_decay_gradient() {
        let w = AeWeights::init(3, 2, 11);
        let x = Array2::from_shape_fn((3, 5), |(i, j)| 0.2 + 0.1 * ((i + 2 * j) as f64 % 5.0));
        let mut c0 = cfg(3, 2);
        let mut c1 = c0.clone();
        let mut c2 = c0.clone();
        c0.lambda = 0.0;
        c1.lambda = 0.05;
        c2.lambda = 0.10;
        let g0 = ae_gradient(&w, &x, &c0).unwrap();
        let g1 = ae_gradient(&w, &x, &c1).unwrap();
        let g2 = ae_gradient(&w, &x, &c2).unwrap();
        for ((a, b), c) in g0.w1.iter().zip(g1.w1.iter()).zip(g2.w1.iter()) {
            assert!(((c - a) - 2.0 * (b - a)).abs() < 1e-12);
        }
    }

    #[test]
    fn training_descends_and_is_deterministic() {
        let mut c = cfg(4, 2);
        c.max_iterations = 60;
        c.momentum = 0.9;
        let mut rng = ChaCha20Rng::seed_from_u64(8);
        let x = Array2::from_shape_fn((4, 30), |_| rng.random_range(0.1..0.9));
        let run1 = train_autoencoder(&x, &c).unwrap();
        let run2 = train_autoencoder(&x, &c).unwrap();
        assert!(run1.final_loss <= run1.initial_loss);
        assert_eq!(run1.weights, run2.weights);
    }

    #[test]
    fn duplicated_column_data_beats_constant_predictor() {
        // Two identical features; a 1-unit bottleneck should reconstruct
        // better than always predicting 0.5.
        let mut rng = ChaCha20Rng::seed_from_u64(21);
        let base: Vec<f64> = (0..50).map(|_| rng.random_range(0.05..0.95)).collect();
        let x = Array2::from_shape_fn((2, 50), |(_, j)| base[j]);

        // Independent oracle: MSE of the constant-0.5 predictor.
        let constant_mse = x.mapv(|v| (v - 0.5) * (v - 0.5)).sum() / 50.0;

        let mut c = cfg(2, 1);
        c.max_iterations = 2000;
        c.learn_rate = 1.0;
        c.momentum = 0.9;
        let trained = train_autoencoder(&x, &c).unwrap();
        let h = encode(&trained.weights, &x).unwrap();
        let xr = decode(&trained.weights, &h).unwrap();
        let mse = (&xr - &x).mapv(|d| d * d).sum() / 50.0;
        assert!(
            mse < constant_mse,
            "autoencoder mse {mse} not below constant-predictor mse {constant_mse}"
        );
    }
}
