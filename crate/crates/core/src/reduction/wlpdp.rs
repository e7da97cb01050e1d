//! Weighted locality-preserving discriminant projection.
//!
//! Builds between/within-class scatter matrices and a k-NN heat-kernel
//! graph Laplacian, then solves the symmetric-definite pencil
//! `S_W q = eta (S_B - gamma X L X^T) q` for the directions with the
//! smallest eta: minimal within-class scatter relative to the constrained
//! between-class-minus-locality term.

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Between-class and within-class scatter of a sample matrix (rows are
/// samples). `S_B` sums (class mean - global mean) outer products over
/// classes; `S_W` sums (sample - class mean) outer products over samples.
pub fn scatter_matrices(
    x: &Array2<f64>,
    labels: &[usize],
    class_count: usize,
) -> Result<(Array2<f64>, Array2<f64>)> {
    let n = x.nrows();
    let m = x.ncols();
    if labels.len() != n {
        return Err(Error::shape("label count mismatch"));
    }
    let mut counts = vec![0usize; class_count];
    for &l in labels {
        if l >= class_count {
            return Err(Error::invalid(format!("label {l} outside 0..{class_count}")));
        }
        counts[l] += 1;
    }
    if let Some(c) = counts.iter().position(|&c| c == 0) {
        return Err(Error::numerical(format!(
            "class {c} has no samples in this subset (resample)"
        )));
    }

    let global_mean = x.sum_axis(ndarray::Axis(0)) / n as f64;
    let mut class_means = vec![Array1::<f64>::zeros(m); class_count];
    for (row, &l) in x.rows().into_iter().zip(labels) {
        class_means[l] = &class_means[l] + &row;
    }
    for (mean, &count) in class_means.iter_mut().zip(&counts) {
        *mean /= count as f64;
    }

    let mut s_b = Array2::<f64>::zeros((m, m));
    for mean in &class_means {
        let d = mean - &global_mean;
        outer_add(&mut s_b, &d, 1.0);
    }

    let mut s_w = Array2::<f64>::zeros((m, m));
    for (row, &l) in x.rows().into_iter().zip(labels) {
        let d = &row - &class_means[l];
        outer_add(&mut s_w, &d, 1.0);
    }

    Ok((s_b, s_w))
}

fn outer_add(acc: &mut Array2<f64>, v: &Array1<f64>, scale: f64) {
    let m = v.len();
    for i in 0..m {
        for j in 0..m {
            acc[[i, j]] += scale * v[i] * v[j];
        }
    }
}

/// Symmetrized k-NN heat-kernel affinity and its Laplacian.
#[derive(Debug, Clone)]
pub struct Affinity {
    pub weights: Array2<f64>,
    pub degrees: Array1<f64>,
    pub laplacian: Array2<f64>,
}

/// Median of all pairwise Euclidean distances; the default heat-kernel
/// width. Returns at least the 1e-6 floor so duplicate-heavy subsets stay
/// usable.
pub fn median_pairwise_distance(x: &Array2<f64>) -> f64 {
    let n = x.nrows();
    let mut dists = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in (i + 1)..n {
            dists.push(euclidean(x, i, j));
        }
    }
    if dists.is_empty() {
        return 1e-6;
    }
    dists.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    dists[dists.len() / 2].max(1e-6)
}

fn euclidean(x: &Array2<f64>, i: usize, j: usize) -> f64 {
    x.row(i)
        .iter()
        .zip(x.row(j))
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt()
}

/// Build the affinity graph: `W_ij = exp(-|x_i - x_j|^2 / (2 sigma^2))`
/// when `j` is among `i`'s k nearest neighbors or vice versa, zero
/// otherwise (and on the diagonal). `L = D - W`.
pub fn build_graph(x: &Array2<f64>, k_nn: usize, sigma: f64) -> Result<Affinity> {
    let n = x.nrows();
    if k_nn == 0 || k_nn >= n {
        return Err(Error::invalid(format!(
            "k_nn {k_nn} must be in 1..{n} for {n} samples"
        )));
    }
    let sigma = sigma.max(1e-6);
    let denom = 2.0 * sigma * sigma;

    let mut dist = Array2::<f64>::zeros((n, n));
    for i in 0..n {
        for j in (i + 1)..n {
            let d = euclidean(x, i, j);
            dist[[i, j]] = d;
            dist[[j, i]] = d;
        }
    }

    // Neighbor sets; ties broken by index for determinism.
    let mut neighbor = vec![vec![false; n]; n];
    for i in 0..n {
        let mut order: Vec<usize> = (0..n).filter(|&j| j != i).collect();
        order.sort_by(|&a, &b| {
            dist[[i, a]]
                .partial_cmp(&dist[[i, b]])
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(a.cmp(&b))
        });
        for &j in order.iter().take(k_nn) {
            neighbor[i][j] = true;
        }
    }

    let mut weights = Array2::<f64>::zeros((n, n));
    for i in 0..n {
        for j in (i + 1)..n {
            if neighbor[i][j] || neighbor[j][i] {
                let w = (-dist[[i, j]] * dist[[i, j]] / denom).exp();
                weights[[i, j]] = w;
                weights[[j, i]] = w;
            }
        }
    }

    let degrees = weights.sum_axis(ndarray::Axis(1));
    let mut laplacian = Array2::<f64>::zeros((n, n));
    for i in 0..n {
        laplacian[[i, i]] = degrees[i];
    }
    laplacian -= &weights;

    Ok(Affinity {
        weights,
        degrees,
        laplacian,
    })
}

/// Heat-kernel width policy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "value")]
pub enum SigmaPolicy {
    /// Median pairwise distance of the data the graph is built on.
    Median,
    Fixed(f64),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WlpdpConfig {
    /// Lagrange penalty factor on the locality term.
    pub gamma: f64,
    /// Requested output dimension l; reduced with a warning when the data
    /// cannot support it.
    pub output_dim: usize,
    pub k_nn: usize,
    pub sigma: SigmaPolicy,
    /// Within-scatter ridge, as a fraction of trace(S_W)/m.
    pub eigen_reg_scale: f64,
}

impl Default for WlpdpConfig {
    fn default() -> Self {
        WlpdpConfig {
            gamma: 0.1,
            output_dim: 0, // auto: min(4 * class_count, m - 1)
            k_nn: 7,
            sigma: SigmaPolicy::Median,
            eigen_reg_scale: 1e-6,
        }
    }
}

/// A fitted projection: columns of `projection` are the chosen generalized
/// eigenvectors, ordered by ascending eigenvalue.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WlpdpModel {
    /// m x l
    pub projection: Array2<f64>,
    pub eigenvalues: Vec<f64>,
    /// Column indices (into the reduced feature space) this model applies to.
    pub feature_indices: Vec<usize>,
    /// Largest relative residual among the returned eigenpairs.
    pub max_residual: f64,
}

impl WlpdpModel {
    /// Project samples (rows) into the discriminant subspace: `X Q`.
    pub fn project(&self, x: &Array2<f64>) -> Result<Array2<f64>> {
        if x.ncols() != self.projection.nrows() {
            return Err(Error::shape(format!(
                "{} features vs projection rows {}",
                x.ncols(),
                self.projection.nrows()
            )));
        }
        Ok(x.dot(&self.projection))
    }

    pub fn output_dim(&self) -> usize {
        self.projection.ncols()
    }
}

fn to_nalgebra(a: &Array2<f64>) -> nalgebra::DMatrix<f64> {
    nalgebra::DMatrix::from_fn(a.nrows(), a.ncols(), |i, j| a[[i, j]])
}

/// Symmetric eigendecomposition with ascending eigenvalues and
/// sign-normalized eigenvectors (largest-magnitude component positive).
fn sym_eigen(a: &Array2<f64>) -> (Vec<f64>, Array2<f64>) {
    let m = a.nrows();
    let sym = to_nalgebra(a);
    let decomp = nalgebra::SymmetricEigen::new(sym);
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&i, &j| {
        decomp.eigenvalues[i]
            .partial_cmp(&decomp.eigenvalues[j])
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let values: Vec<f64> = order.iter().map(|&i| decomp.eigenvalues[i]).collect();
    let mut vectors = Array2::<f64>::zeros((m, m));
    for (col, &src) in order.iter().enumerate() {
        let v = decomp.eigenvectors.column(src);
        // Fix the sign so runs are byte-identical across platforms.
        let mut lead = 0;
        for r in 0..m {
            if v[r].abs() > v[lead].abs() {
                lead = r;
            }
        }
        let flip = if v[lead] < 0.0 { -1.0 } else { 1.0 };
        for r in 0..m {
            vectors[[r, col]] = flip * v[r];
        }
    }
    (values, vectors)
}

fn symmetrize(a: &Array2<f64>) -> Array2<f64> {
    (a + &a.t()) * 0.5
}

fn spectral_norm_est(a: &Array2<f64>) -> f64 {
    // For symmetric matrices the spectral norm is the largest |eigenvalue|;
    // a cheap bound via the Frobenius norm is enough for residual scaling.
    a.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Solve the symmetric-definite pencil `S_W q = eta * B q` after ridging
/// `S_W` and clipping `B`'s negative eigenvalues to zero. Returns the
/// `l` pairs with the smallest eta (largest inverse), each satisfying
/// `|S_W q - eta B q| <= 1e-8 (|S_W| + |eta| |B|)` against the effective
/// (regularized, clipped) matrices.
pub fn solve_pencil(
    s_w: &Array2<f64>,
    rhs: &Array2<f64>,
    l: usize,
    eigen_reg: f64,
) -> Result<(Vec<f64>, Array2<f64>, f64)> {
    let m = s_w.nrows();
    if s_w.ncols() != m || rhs.nrows() != m || rhs.ncols() != m {
        return Err(Error::shape("pencil matrices must be square and agree"));
    }
    if l == 0 {
        return Err(Error::invalid("output dimension must be >= 1"));
    }

    let mut sw_reg = symmetrize(s_w);
    for i in 0..m {
        sw_reg[[i, i]] += eigen_reg;
    }

    // Clip the right-hand side to PSD: it can be indefinite when the
    // locality term outweighs the between-class scatter.
    let rhs_sym = symmetrize(rhs);
    let (b_vals, b_vecs) = sym_eigen(&rhs_sym);
    let mut b_psd = Array2::<f64>::zeros((m, m));
    for (idx, &val) in b_vals.iter().enumerate() {
        if val > 0.0 {
            let col = b_vecs.column(idx).to_owned();
            outer_add(&mut b_psd, &col, val);
        }
    }

    // Whitening transform of the (SPD) within-scatter.
    let (w_vals, w_vecs) = sym_eigen(&sw_reg);
    if w_vals.iter().any(|&v| v <= 0.0) {
        return Err(Error::numerical(
            "within-class scatter is not positive definite after regularization",
        ));
    }
    let mut w_inv_half = Array2::<f64>::zeros((m, m));
    for (idx, &val) in w_vals.iter().enumerate() {
        let col = w_vecs.column(idx).to_owned();
        outer_add(&mut w_inv_half, &col, 1.0 / val.sqrt());
    }

    // Standard symmetric problem: C u = mu u with mu = 1/eta.
    let c = symmetrize(&w_inv_half.dot(&b_psd).dot(&w_inv_half));
    let (mu_vals, mu_vecs) = sym_eigen(&c);

    let mu_max = mu_vals.iter().cloned().fold(0.0f64, f64::max);
    if mu_max <= 0.0 {
        return Err(Error::numerical(
            "right-hand side of the pencil has no positive directions",
        ));
    }
    let mu_floor = mu_max * 1e-12;
    let usable: Vec<usize> = (0..m)
        .rev() // descending mu = ascending eta
        .filter(|&i| mu_vals[i] > mu_floor)
        .collect();

    let l_eff = l.min(usable.len());
    if l_eff < l {
        log::warn!("requested {l} projection directions, only {l_eff} usable");
    }

    let mut eigenvalues = Vec::with_capacity(l_eff);
    let mut projection = Array2::<f64>::zeros((m, l_eff));
    let sw_norm = spectral_norm_est(&sw_reg);
    let b_norm = spectral_norm_est(&b_psd);
    let mut max_residual = 0.0f64;

    for (col, &idx) in usable.iter().take(l_eff).enumerate() {
        let eta = 1.0 / mu_vals[idx];
        let u = mu_vecs.column(idx).to_owned();
        let mut q = w_inv_half.dot(&u);
        let norm = q.mapv(|v| v * v).sum().sqrt();
        if norm == 0.0 {
            return Err(Error::numerical("zero eigenvector from pencil solve"));
        }
        q /= norm;
        // Sign normalization on q itself.
        let mut lead = 0;
        for r in 0..m {
            if q[r].abs() > q[lead].abs() {
                lead = r;
            }
        }
        if q[lead] < 0.0 {
            q.mapv_inplace(|v| -v);
        }

        let residual_vec = sw_reg.dot(&q) - &(b_psd.dot(&q) * eta);
        let residual = residual_vec.mapv(|v| v * v).sum().sqrt();
        let bound = 1e-8 * (sw_norm + eta.abs() * b_norm);
        if residual > bound {
            return Err(Error::numerical(format!(
                "eigenpair residual {residual} exceeds bound {bound}"
            )));
        }
        max_residual = max_residual.max(residual / (sw_norm + eta.abs() * b_norm));

        eigenvalues.push(eta);
        projection.column_mut(col).assign(&q);
    }

    Ok((eigenvalues, projection, max_residual))
}

/// Build the right-hand side `S_B - gamma X^T L X` (rows of `x` are
/// samples, so the matrix form of the locality term is `X^T L X`) and solve
/// the pencil.
pub fn solve_wlpdp(
    s_b: &Array2<f64>,
    s_w: &Array2<f64>,
    x: &Array2<f64>,
    laplacian: &Array2<f64>,
    cfg: &WlpdpConfig,
    class_count: usize,
    feature_indices: Vec<usize>,
) -> Result<WlpdpModel> {
    let m = s_w.nrows();
    let locality = x.t().dot(laplacian).dot(x);
    let rhs = s_b - &(locality * cfg.gamma);

    let l = if cfg.output_dim == 0 {
        (4 * class_count).min(m.saturating_sub(1)).max(1)
    } else {
        cfg.output_dim.min(m)
    };

    let eigen_reg = cfg.eigen_reg_scale * s_w.diag().sum() / m as f64;
    let (eigenvalues, projection, max_residual) = solve_pencil(s_w, &rhs, l, eigen_reg)?;
    Ok(WlpdpModel {
        projection,
        eigenvalues,
        feature_indices,
        max_residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn hand_example() -> (Array2<f64>, Vec<usize>) {
        (
            array![[0.0, 0.0], [2.0, 0.0], [0.0, 2.0], [0.0, 4.0]],
            vec![0, 0, 1, 1],
        )
    }

    #[test]
    fn scatter_hand_computed() {
        let (x, labels) = hand_example();
        let (s_b, s_w) = scatter_matrices(&x, &labels, 2).unwrap();
        let expect_b = array![[0.5, -1.5], [-1.5, 4.5]];
        let expect_w = array![[2.0, 0.0], [0.0, 2.0]];
        for (a, b) in s_b.iter().zip(expect_b.iter()) {
            assert!((a - b).abs() < 1e-12);
        }
        for (a, b) in s_w.iter().zip(expect_w.iter()) {
            assert!((a - b).abs() < 1e-12);
        }

        // Brute-force loop cross-check.
        let global = x.sum_axis(ndarray::Axis(0)) / 4.0;
        let mut brute_b = Array2::<f64>::zeros((2, 2));
        for class in 0..2 {
            let rows: Vec<_> = labels
                .iter()
                .enumerate()
                .filter(|(_, &l)| l == class)
                .map(|(i, _)| i)
                .collect();
            let mut mean = Array1::<f64>::zeros(2);
            for &r in &rows {
                mean = mean + x.row(r);
            }
            mean /= rows.len() as f64;
            let d = &mean - &global;
            for i in 0..2 {
                for j in 0..2 {
                    brute_b[[i, j]] += d[i] * d[j];
                }
            }
        }
        for (a, b) in s_b.iter().zip(brute_b.iter()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn degenerate_scatter_cases() {
        let x = array![[1.0, 2.0], [1.0, 2.0], [1.0, 2.0], [1.0, 2.0]];
        let (s_b, s_w) = scatter_matrices(&x, &[0, 0, 1, 1], 2).unwrap();
        assert!(s_b.iter().all(|&v| v.abs() < 1e-12));
        assert!(s_w.iter().all(|&v| v.abs() < 1e-12));

        // One sample per class: S_W = 0.
        let x = array![[0.0, 1.0], [3.0, 5.0]];
        let (_, s_w) = scatter_matrices(&x, &[0, 1], 2).unwrap();
        assert!(s_w.iter().all(|&v| v.abs() < 1e-12));

        // Missing class in subset is a resample signal.
        assert!(scatter_matrices(&x, &[0, 0], 2).is_err());
    }

    #[test]
    fn scatter_psd_and_rank() {
        use rand::Rng;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(5);
        let x = Array2::from_shape_fn((20, 4), |_| rng.random_range(-1.0..1.0));
        let labels: Vec<usize> = (0..20).map(|i| i % 3).collect();
        let (s_b, s_w) = scatter_matrices(&x, &labels, 3).unwrap();
        // PSD via random quadratic forms.
        for _ in 0..20 {
            let v = Array1::from_shape_fn(4, |_| rng.random_range(-1.0..1.0));
            assert!(v.dot(&s_b.dot(&v)) >= -1e-10);
            assert!(v.dot(&s_w.dot(&v)) >= -1e-10);
        }
        // rank(S_B) <= C: the (C+1)-th eigenvalue must vanish.
        let (vals, _) = sym_eigen(&s_b);
        let scale = vals.iter().cloned().fold(0.0f64, f64::max).max(1e-30);
        assert!(vals[0] / scale > -1e-10);
        // 4x4 matrix, rank <= 3, so the smallest eigenvalue is ~0.
        assert!(vals[0].abs() / scale < 1e-8);
    }

    #[test]
    fn laplacian_identities() {
        use rand::Rng;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(6);
        let x = Array2::from_shape_fn((12, 3), |_| rng.random_range(-1.0..1.0));
        let aff = build_graph(&x, 3, median_pairwise_distance(&x)).unwrap();
        let n = 12;
        // Symmetry and zero diagonal of W.
        for i in 0..n {
            assert_eq!(aff.weights[[i, i]], 0.0);
            for j in 0..n {
                assert_eq!(aff.weights[[i, j]], aff.weights[[j, i]]);
            }
        }
        // L * 1 = 0.
        let ones = Array1::from_elem(n, 1.0);
        let l1 = aff.laplacian.dot(&ones);
        assert!(l1.iter().all(|&v| v.abs() < 1e-10));
        // x^T L x >= 0 for random x.
        for _ in 0..10 {
            let v = Array1::from_shape_fn(n, |_| rng.random_range(-1.0..1.0));
            assert!(v.dot(&aff.laplacian.dot(&v)) >= -1e-10);
        }
    }

    #[test]
    fn duplicate_points_get_full_affinity() {
        let x = array![[1.0, 1.0], [1.0, 1.0], [5.0, 5.0]];
        // Zero median distance would blow up; the sigma floor keeps the
        // duplicate pair at weight exactly 1.
        let aff = build_graph(&x, 1, 0.0).unwrap();
        assert_eq!(aff.weights[[0, 1]], 1.0);
    }

    #[test]
    fn quadratic_form_law() {
        use rand::Rng;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(7);
        for trial in 0..5 {
            let n = 10;
            let m = 4;
            let x = Array2::from_shape_fn((n, m), |_| rng.random_range(-2.0..2.0));
            let aff = build_graph(&x, 3, 0.8).unwrap();
            let q = Array2::from_shape_fn((m, 2), |_| rng.random_range(-1.0..1.0));
            // tr(Q^T X^T L X Q)
            let lhs = {
                let proj = x.dot(&q); // n x 2
                let t = proj.t().dot(&aff.laplacian).dot(&proj);
                t.diag().sum()
            };
            // 1/2 sum_ij W_ij |Q^T x_i - Q^T x_j|^2
            let proj = x.dot(&q);
            let mut rhs = 0.0;
            for i in 0..n {
                for j in 0..n {
                    let d: f64 = proj
                        .row(i)
                        .iter()
                        .zip(proj.row(j))
                        .map(|(a, b)| (a - b) * (a - b))
                        .sum();
                    rhs += aff.weights[[i, j]] * d;
                }
            }
            rhs *= 0.5;
            assert!((lhs - rhs).abs() < 1e-10, "trial {trial}: {lhs} vs {rhs}");
        }
    }

    #[test]
    fn fisher_direction_recovered_at_gamma_zero() {
        let (x, labels) = hand_example();
        let (s_b, s_w) = scatter_matrices(&x, &labels, 2).unwrap();
        let laplacian = Array2::<f64>::zeros((4, 4));
        let cfg = WlpdpConfig {
            gamma: 0.0,
            output_dim: 1,
            eigen_reg_scale: 0.0,
            ..WlpdpConfig::default()
        };
        let model = solve_wlpdp(&s_b, &s_w, &x, &laplacian, &cfg, 2, vec![0, 1]).unwrap();

        // Independent oracle: the Fisher direction S_W^{-1} (mu0 - mu1).
        let mu0 = array![1.0, 0.0];
        let mu1 = array![0.0, 3.0];
        let diff = &mu0 - &mu1;
        // S_W = 2I here, so the direction is just diff (scaled).
        let norm: f64 = diff.mapv(|v| v * v).sum();
        let fisher = diff / norm.sqrt();
        let q = model.projection.column(0).to_owned();
        let cosine = q.dot(&fisher).abs();
        let angle = cosine.min(1.0).acos();
        assert!(angle < 1e-6, "angle {angle}");
    }

    #[test]
    fn one_dimensional_projection_is_scalar() {
        let x = array![[0.1], [0.9], [0.2], [0.8]];
        let labels = vec![0, 1, 0, 1];
        let (s_b, s_w) = scatter_matrices(&x, &labels, 2).unwrap();
        let aff = build_graph(&x, 1, median_pairwise_distance(&x)).unwrap();
        let cfg = WlpdpConfig {
            output_dim: 1,
            ..WlpdpConfig::default()
        };
        let model = solve_wlpdp(&s_b, &s_w, &x, &aff.laplacian, &cfg, 2, vec![0]).unwrap();
        assert_eq!(model.projection.dim(), (1, 1));
        assert!(model.projection[[0, 0]] != 0.0);
        let projected = model.project(&x).unwrap();
        assert_eq!(projected.dim(), (4, 1));
    }

    /// Hand-rolled Cholesky + Jacobi eigensolver: the independent dense
    /// oracle for the pencil solve (also used by the acceptance suite).
    pub(crate) mod dense_oracle {
        use ndarray::Array2;

        /// Cholesky factor R (lower) of an SPD matrix.
        pub fn cholesky(a: &Array2<f64>) -> Option<Array2<f64>> {
            let n = a.nrows();
            let mut l = Array2::<f64>::zeros((n, n));
            for i in 0..n {
                for j in 0..=i {
                    let mut sum = a[[i, j]];
                    for k in 0..j {
                        sum -= l[[i, k]] * l[[j, k]];
                    }
                    if i == j {
                        if sum <= 0.0 {
                            return None;
                        }
                        l[[i, j]] = sum.sqrt();
                    } else {
                        l[[i, j]] = sum / l[[j, j]];
                    }
                }
            }
            Some(l)
        }

        /// Forward substitution L z = b, column-wise for a matrix B.
        pub fn forward_solve(l: &Array2<f64>, b: &Array2<f64>) -> Array2<f64> {
            let n = l.nrows();
            let cols = b.ncols();
            let mut z = Array2::<f64>::zeros((n, cols));
            for c in 0..cols {
                for i in 0..n {
                    let mut sum = b[[i, c]];
                    for k in 0..i {
                        sum -= l[[i, k]] * z[[k, c]];
                    }
                    z[[i, c]] = sum / l[[i, i]];
                }
            }
            z
        }

        /// Cyclic Jacobi rotations on a symmetric matrix; returns
        /// eigenvalues (unordered) and eigenvectors as columns.
        pub fn jacobi_eigen(a: &Array2<f64>) -> (Vec<f64>, Array2<f64>) {
            let n = a.nrows();
            let mut m = a.clone();
            let mut v = Array2::<f64>::eye(n);
            for _ in 0..100 {
                let mut off = 0.0;
                for i in 0..n {
                    for j in (i + 1)..n {
                        off += m[[i, j]] * m[[i, j]];
                    }
                }
                if off.sqrt() < 1e-14 {
                    break;
                }
                for p in 0..n {
                    for q in (p + 1)..n {
                        if m[[p, q]].abs() < 1e-300 {
                            continue;
                        }
                        let theta = (m[[q, q]] - m[[p, p]]) / (2.0 * m[[p, q]]);
                        let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                        let c = 1.0 / (t * t + 1.0).sqrt();
                        let s = t * c;
                        for k in 0..n {
                            let mkp = m[[k, p]];
                            let mkq = m[[k, q]];
                            m[[k, p]] = c * mkp - s * mkq;
                            m[[k, q]] = s * mkp + c * mkq;
                        }
                        for k in 0..n {
                            let mpk = m[[p, k]];
                            let mqk = m[[q, k]];
                            m[[p, k]] = c * mpk - s * mqk;
                            m[[q, k]] = s * mpk + c * mqk;
                        }
                        for k in 0..n {
                            let vkp = v[[k, p]];
                            let vkq = v[[k, q]];
                            v[[k, p]] = c * vkp - s * vkq;
                            v[[k, q]] = s * vkp + c * vkq;
                        }
                    }
                }
            }
            ((0..n).map(|i| m[[i, i]]).collect(), v)
        }

        /// Generalized eigenvalues of `S_W q = eta B q` with B SPD, via
        /// B = R R^T and the standard reduction to R^{-1} S_W R^{-T}.
        /// Returns ascending eta.
        pub fn generalized_eigenvalues(s_w: &Array2<f64>, b: &Array2<f64>) -> Option<Vec<f64>> {
            let r = cholesky(b)?;
            let z = forward_solve(&r, s_w); // R^{-1} S_W
            let zt = forward_solve(&r, &z.t().to_owned()); // R^{-1} (R^{-1} S_W)^T
            let sym = (&zt + &zt.t()) * 0.5;
            let (mut vals, _) = jacobi_eigen(&sym);
            vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
            Some(vals)
        }
    }

    #[test]
    fn pencil_matches_dense_oracle_on_spd_instances() {
        use rand::Rng;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(31);
        for trial in 0..10 {
            let m = 2 + (trial % 6);
            let rand_spd = |rng: &mut rand_chacha::ChaCha20Rng| {
                let a = Array2::from_shape_fn((m, m), |_| rng.random_range(-1.0..1.0));
                let mut spd = a.t().dot(&a);
                for i in 0..m {
                    spd[[i, i]] += 0.5;
                }
                spd
            };
            let s_w = rand_spd(&mut rng);
            let b = rand_spd(&mut rng);
            let l = 1 + trial % 2;
            let (etas, q, _) = solve_pencil(&s_w, &b, l, 0.0).unwrap();
            let oracle = dense_oracle::generalized_eigenvalues(&s_w, &b).unwrap();
            for (i, &eta) in etas.iter().enumerate() {
                assert!(
                    (eta - oracle[i]).abs() < 1e-8 * (1.0 + eta.abs()),
                    "trial {trial}: eta {eta} vs oracle {}",
                    oracle[i]
                );
            }
            // Residual bound against the inputs (no clipping triggered).
            for (i, &eta) in etas.iter().enumerate() {
                let qi = q.column(i).to_owned();
                let res = s_w.dot(&qi) - &(b.dot(&qi) * eta);
                let bound = 1e-8 * (spectral_norm_est(&s_w) + eta.abs() * spectral_norm_est(&b));
                let norm = res.mapv(|v| v * v).sum().sqrt();
                assert!(norm <= bound, "trial {trial} pair {i}: {norm} > {bound}");
            }
        }
    }

    #[test]
    fn requested_dim_reduced_when_unavailable() {
        // 2x2 problem with rank-1 rhs: only one usable direction.
        let s_w = array![[2.0, 0.0], [0.0, 2.0]];
        let rhs = array![[1.0, 0.0], [0.0, 0.0]];
        let (etas, q, _) = solve_pencil(&s_w, &rhs, 2, 0.0).unwrap();
        assert_eq!(etas.len(), 1);
        assert_eq!(q.ncols(), 1);
    }
}
