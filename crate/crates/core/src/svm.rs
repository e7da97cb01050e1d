//! Soft-margin binary SVM trained by sequential minimal optimization on
//! the dual problem. Labels are class indices {0, 1}; class 1 maps to the
//! +1 side of the decision function.

use ndarray::{Array2, ArrayView1};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Kernel {
    Linear,
    Rbf { gamma: f64 },
}

impl Kernel {
    pub fn eval(&self, a: ArrayView1<f64>, b: ArrayView1<f64>) -> f64 {
        match self {
            Kernel::Linear => a.dot(&b),
            Kernel::Rbf { gamma } => {
                let d: f64 = a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum();
                (-gamma * d).exp()
            }
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SvmConfig {
    pub kernel: Kernel,
    /// Box constraint.
    pub c: f64,
    /// KKT tolerance.
    pub tol: f64,
    /// Consecutive no-progress passes before stopping.
    pub max_passes: usize,
    /// Hard cap on total passes over the data.
    pub max_total_passes: usize,
    pub seed: u64,
}

impl Default for SvmConfig {
    fn default() -> Self {
        SvmConfig {
            kernel: Kernel::Rbf { gamma: 0.0 },
            c: 1.0,
            tol: 1e-3,
            max_passes: 5,
            max_total_passes: 400,
            seed: 0,
        }
    }
}

impl SvmConfig {
    /// Resolve an RBF gamma of 0 (or below) to the `1 / feature_count`
    /// convention at the point of use.
    pub fn with_auto_gamma(mut self, feature_count: usize) -> SvmConfig {
        if let Kernel::Rbf { gamma } = self.kernel {
            if gamma <= 0.0 {
                self.kernel = Kernel::Rbf {
                    gamma: 1.0 / feature_count.max(1) as f64,
                };
            }
        }
        self
    }
}

/// Trained model: support vectors with their signed dual coefficients
/// `alpha_i y_i` and the bias.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SvmModel {
    pub kernel: Kernel,
    pub c: f64,
    pub support_vectors: Array2<f64>,
    /// alpha_i * y_i per support vector; |coeff| <= C.
    pub coefficients: Vec<f64>,
    pub bias: f64,
    pub train_accuracy: f64,
}

impl SvmModel {
    pub fn decision(&self, x: ArrayView1<f64>) -> f64 {
        let mut sum = self.bias;
        for (row, &coeff) in self.support_vectors.rows().into_iter().zip(&self.coefficients) {
            sum += coeff * self.kernel.eval(row, x);
        }
        sum
    }

    pub fn predict_row(&self, x: ArrayView1<f64>) -> usize {
        usize::from(self.decision(x) > 0.0)
    }

    pub fn predict(&self, x: &Array2<f64>) -> Result<Vec<usize>> {
        if x.ncols() != self.support_vectors.ncols() {
            return Err(Error::shape(format!(
                "{} features vs model's {}",
                x.ncols(),
                self.support_vectors.ncols()
            )));
        }
        Ok(x.rows().into_iter().map(|r| self.predict_row(r)).collect())
    }
}

/// Train by simplified SMO: pick a KKT-violating multiplier, pair it with a
/// random second one, and solve the two-variable subproblem analytically.
/// Deterministic under `cfg.seed`.
pub fn train_svm(x: &Array2<f64>, y: &[usize], cfg: &SvmConfig) -> Result<SvmModel> {
    let n = x.nrows();
    if y.len() != n {
        return Err(Error::shape("label count mismatch"));
    }
    if n < 2 {
        return Err(Error::invalid("need at least two samples"));
    }
    if cfg.c <= 0.0 {
        return Err(Error::invalid("C must be positive"));
    }
    let pos = y.iter().filter(|&&l| l == 1).count();
    if pos == 0 || pos == n {
        return Err(Error::invalid("training data contains a single class"));
    }
    if y.iter().any(|&l| l > 1) {
        return Err(Error::invalid(
            "SVM is binary; wrap it one-vs-rest for more classes",
        ));
    }
    let cfg = cfg.clone().with_auto_gamma(x.ncols());
    let cfg = &cfg;

    let signed: Vec<f64> = y.iter().map(|&l| if l == 1 { 1.0 } else { -1.0 }).collect();

    // Dense kernel matrix; subset sizes stay small enough for this.
    let mut k = Array2::<f64>::zeros((n, n));
    for i in 0..n {
        for j in i..n {
            let v = cfg.kernel.eval(x.row(i), x.row(j));
            k[[i, j]] = v;
            k[[j, i]] = v;
        }
    }

    let mut alpha = vec![0.0f64; n];
    let mut bias = 0.0f64;
    let mut rng = ChaCha20Rng::seed_from_u64(cfg.seed);

    let decision = |alpha: &[f64], bias: f64, k: &Array2<f64>, idx: usize| -> f64 {
        let mut sum = bias;
        for i in 0..n {
            if alpha[i] != 0.0 {
                sum += alpha[i] * signed[i] * k[[i, idx]];
            }
        }
        sum
    };

    let mut quiet_passes = 0;
    let mut total_passes = 0;
    while quiet_passes < cfg.max_passes && total_passes < cfg.max_total_passes {
        let mut changed = 0;
        for i in 0..n {
            let e_i = decision(&alpha, bias, &k, i) - signed[i];
            let r_i = signed[i] * e_i;
            if !((r_i < -cfg.tol && alpha[i] < cfg.c) || (r_i > cfg.tol && alpha[i] > 0.0)) {
                continue;
            }
            let mut j = rng.random_range(0..n - 1);
            if j >= i {
                j += 1;
            }
            let e_j = decision(&alpha, bias, &k, j) - signed[j];

            let (a_i_old, a_j_old) = (alpha[i], alpha[j]);
            let (lo, hi) = if signed[i] != signed[j] {
                (
                    (a_j_old - a_i_old).max(0.0),
                    (cfg.c + a_j_old - a_i_old).min(cfg.c),
                )
            } else {
                (
                    (a_i_old + a_j_old - cfg.c).max(0.0),
                    (a_i_old + a_j_old).min(cfg.c),
                )
            };
            if lo >= hi {
                continue;
            }
            let eta = 2.0 * k[[i, j]] - k[[i, i]] - k[[j, j]];
            if eta >= 0.0 {
                continue;
            }
            let mut a_j = a_j_old - signed[j] * (e_i - e_j) / eta;
            a_j = a_j.clamp(lo, hi);
            if (a_j - a_j_old).abs() < 1e-7 {
                continue;
            }
            let a_i = a_i_old + signed[i] * signed[j] * (a_j_old - a_j);

            let b1 = bias
                - e_i
                - signed[i] * (a_i - a_i_old) * k[[i, i]]
                - signed[j] * (a_j - a_j_old) * k[[i, j]];
            let b2 = bias
                - e_j
                - signed[i] * (a_i - a_i_old) * k[[i, j]]
                - signed[j] * (a_j - a_j_old) * k[[j, j]];
            bias = if a_i > 0.0 && a_i < cfg.c {
                b1
            } else if a_j > 0.0 && a_j < cfg.c {
                b2
            } else {
                (b1 + b2) / 2.0
            };

            alpha[i] = a_i;
            alpha[j] = a_j;
            changed += 1;
        }
        total_passes += 1;
        if changed == 0 {
            quiet_passes += 1;
        } else {
            quiet_passes = 0;
        }
    }
    if total_passes >= cfg.max_total_passes {
        log::warn!("SMO hit the pass cap ({}) before settling", cfg.max_total_passes);
    }

    // Keep only the support vectors.
    let sv_idx: Vec<usize> = (0..n).filter(|&i| alpha[i] > 0.0).collect();
    let support_vectors = x.select(ndarray::Axis(0), &sv_idx);
    let coefficients: Vec<f64> = sv_idx.iter().map(|&i| alpha[i] * signed[i]).collect();

    let mut model = SvmModel {
        kernel: cfg.kernel,
        c: cfg.c,
        support_vectors,
        coefficients,
        bias,
        train_accuracy: 0.0,
    };
    let preds = model.predict(x)?;
    let correct = preds.iter().zip(y).filter(|(p, l)| p == l).count();
    model.train_accuracy = correct as f64 / n as f64;
    Ok(model)
}
