//! Generic minimizers over flat parameter vectors: scaled conjugate
//! gradient (the fine-tuning default) and a backtracking gradient-descent
//! fallback. Both only ever accept steps that do not increase the
//! objective, so accepted values form a non-increasing sequence.

/// Objective evaluation: value and gradient at a point.
pub trait Objective {
    fn eval(&mut self, x: &[f64]) -> (f64, Vec<f64>);
}

impl<F> Objective for F
where
    F: FnMut(&[f64]) -> (f64, Vec<f64>),
{
    fn eval(&mut self, x: &[f64]) -> (f64, Vec<f64>) {
        self(x)
    }
}

#[derive(Debug, Clone)]
pub struct ScgOptions {
    pub max_iterations: usize,
    /// Step used to estimate Hessian-vector products.
    pub sigma: f64,
    pub lambda_init: f64,
    /// Stop when the gradient norm drops below this.
    pub grad_tol: f64,
}

impl Default for ScgOptions {
    fn default() -> Self {
        ScgOptions {
            max_iterations: 200,
            sigma: 1e-5,
            lambda_init: 1e-7,
            grad_tol: 1e-8,
        }
    }
}

#[derive(Debug, Clone)]
pub struct MinimizeResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub initial_value: f64,
    pub iterations: usize,
    pub grad_norm: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm_sq(a: &[f64]) -> f64 {
    dot(a, a)
}

fn axpy(y: &mut [f64], a: f64, x: &[f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

/// Scaled conjugate gradient (Moller). Model-trust-region scaling replaces
/// a line search; `lambda` grows when the local quadratic model is poor and
/// shrinks when it is good.
pub fn minimize_scg<O: Objective>(obj: &mut O, x0: Vec<f64>, opts: &ScgOptions) -> MinimizeResult {
    let n = x0.len();
    let mut x = x0;
    let (mut f, mut grad) = obj.eval(&x);
    let initial_value = f;
    let mut r: Vec<f64> = grad.iter().map(|g| -g).collect();
    let mut p = r.clone();

    let mut lambda = opts.lambda_init;
    let mut lambda_bar = 0.0;
    let mut success = true;
    let mut delta = 0.0;
    let mut s_dir = vec![0.0; n];
    let mut iterations = 0;

    for k in 1..=opts.max_iterations {
        let p_norm_sq = norm_sq(&p);
        if p_norm_sq == 0.0 || !p_norm_sq.is_finite() {
            break;
        }

        if success {
            // Second-order information along p via a forward difference.
            let sigma_k = opts.sigma / p_norm_sq.sqrt();
            let mut x_probe = x.clone();
            axpy(&mut x_probe, sigma_k, &p);
            let (_, g_probe) = obj.eval(&x_probe);
            for i in 0..n {
                s_dir[i] = (g_probe[i] - grad[i]) / sigma_k;
            }
            delta = dot(&p, &s_dir);
        }

        delta += (lambda - lambda_bar) * p_norm_sq;
        if delta <= 0.0 {
            // Make the scaled Hessian positive definite.
            lambda_bar = 2.0 * (lambda - delta / p_norm_sq);
            delta = -delta + lambda * p_norm_sq;
            lambda = lambda_bar;
        }

        let mu = dot(&p, &r);
        let alpha = mu / delta;

        let mut x_new = x.clone();
        axpy(&mut x_new, alpha, &p);
        let (f_new, grad_new) = obj.eval(&x_new);

        let comparison = if f_new.is_finite() {
            2.0 * delta * (f - f_new) / (mu * mu)
        } else {
            -1.0
        };

        if comparison >= 0.0 {
            // Accepted step: objective did not increase.
            x = x_new;
            f = f_new;
            let r_new: Vec<f64> = grad_new.iter().map(|g| -g).collect();
            grad = grad_new;
            lambda_bar = 0.0;
            success = true;
            iterations = k;

            if k % n == 0 {
                p = r_new.clone();
            } else {
                let beta = (norm_sq(&r_new) - dot(&r_new, &r)) / mu;
                for i in 0..n {
                    p[i] = r_new[i] + beta * p[i];
                }
            }
            r = r_new;

            if comparison >= 0.75 {
                lambda *= 0.25;
            }
        } else {
            lambda_bar = lambda;
            success = false;
        }

        if comparison < 0.25 {
            lambda += delta * (1.0 - comparison) / p_norm_sq;
        }
        if !lambda.is_finite() || lambda > 1e300 {
            break;
        }
        if norm_sq(&r).sqrt() <= opts.grad_tol {
            iterations = k;
            break;
        }
    }

    let grad_norm = norm_sq(&grad).sqrt();
    MinimizeResult {
        x,
        value: f,
        initial_value,
        iterations,
        grad_norm,
    }
}

/// Backtracking gradient descent used as a debugging fallback for
/// fine-tuning. Halves the rate until the step does not increase the
/// objective; stops when no such step exists.
pub fn minimize_gd<O: Objective>(
    obj: &mut O,
    x0: Vec<f64>,
    learn_rate: f64,
    max_iterations: usize,
) -> MinimizeResult {
    let mut x = x0;
    let (mut f, mut grad) = obj.eval(&x);
    let initial_value = f;
    let mut iterations = 0;

    'outer: for k in 1..=max_iterations {
        let mut rate = learn_rate;
        for _ in 0..30 {
            let mut x_new = x.clone();
            axpy(&mut x_new, -rate, &grad);
            let (f_new, g_new) = obj.eval(&x_new);
            if f_new.is_finite() && f_new <= f {
                x = x_new;
                f = f_new;
                grad = g_new;
                iterations = k;
                continue 'outer;
            }
            rate *= 0.5;
        }
        break;
    }

    let grad_norm = norm_sq(&grad).sqrt();
    MinimizeResult {
        x,
        value: f,
        initial_value,
        iterations,
        grad_norm,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quadratic(x: &[f64]) -> (f64, Vec<f64>) {
        // f = sum_i c_i (x_i - i)^2 with c_i = i+1
        let mut f = 0.0;
        let mut g = vec![0.0; x.len()];
        for (i, &xi) in x.iter().enumerate() {
            let c = (i + 1) as f64;
            let d = xi - i as f64;
            f += c * d * d;
            g[i] = 2.0 * c * d;
        }
        (f, g)
    }

    fn rosenbrock(x: &[f64]) -> (f64, Vec<f64>) {
        let (a, b) = (x[0], x[1]);
        let f = (1.0 - a).powi(2) + 100.0 * (b - a * a).powi(2);
        let g = vec![
            -2.0 * (1.0 - a) - 400.0 * a * (b - a * a),
            200.0 * (b - a * a),
        ];
        (f, g)
    }

    #[test]
    fn scg_solves_quadratic() {
        let mut f = quadratic;
        let res = minimize_scg(&mut f, vec![5.0, -3.0, 2.0, 8.0], &ScgOptions::default());
        for (i, &xi) in res.x.iter().enumerate() {
            assert!((xi - i as f64).abs() < 1e-5, "coord {i}: {xi}");
        }
        assert!(res.value <= res.initial_value);
    }

    #[test]
    fn scg_solves_rosenbrock() {
        let mut f = rosenbrock;
        let opts = ScgOptions {
            max_iterations: 2000,
            ..ScgOptions::default()
        };
        let res = minimize_scg(&mut f, vec![-1.2, 1.0], &opts);
        assert!((res.x[0] - 1.0).abs() < 1e-3, "{:?}", res.x);
        assert!((res.x[1] - 1.0).abs() < 1e-3, "{:?}", res.x);
    }

    #[test]
    fn scg_accepted_values_non_increasing() {
        // Wrap the objective to log accepted values via a monotone check on
        // the reported result instead; here we just assert improvement.
        let mut f = rosenbrock;
        let res = minimize_scg(&mut f, vec![3.0, -2.0], &ScgOptions::default());
        assert!(res.value < res.initial_value);
    }

    #[test]
    fn gd_descends_on_quadratic() {
        let mut f = quadratic;
        let res = minimize_gd(&mut f, vec![4.0, 4.0, 4.0], 0.05, 500);
        assert!(res.value < 1e-6);
    }

    #[test]
    fn zero_iterations_is_identity() {
        let mut f = quadratic;
        let x0 = vec![1.5, 2.5];
        let res = minimize_scg(&mut f, x0.clone(), &ScgOptions {
            max_iterations: 0,
            ..ScgOptions::default()
        });
        assert_eq!(res.x, x0);
        let res = minimize_gd(&mut f, x0.clone(), 0.1, 0);
        assert_eq!(res.x, x0);
    }
}
