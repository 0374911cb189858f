//! Binary logistic regression with a small ridge penalty.
//!
//! The objective is the mean Bernoulli log-likelihood minus
//! `λ/2 · Σ_j w_j²` (the intercept is not penalized). It is maximized by
//! full-batch gradient ascent with Armijo backtracking. Internally the
//! features are centered and scaled; this is an exact reparameterization of
//! the same objective that keeps the step sizes well conditioned.

use ndarray::{Array1, Array2, ArrayView2, Axis};

use crate::error::{Error, Result};

pub const DEFAULT_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogisticOptions {
    pub max_iter: usize,
    /// Convergence threshold on the ∞-norm of the objective gradient.
    pub tolerance: f64,
    pub l2: f64,
}

impl Default for LogisticOptions {
    fn default() -> Self {
        Self {
            max_iter: 5000,
            tolerance: 1e-6,
            l2: 1e-4,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LogisticFit {
    /// `[intercept, w_1, …, w_k]`.
    pub weights: Array1<f64>,
    pub converged: bool,
    pub iterations: usize,
    /// Penalized objective after each accepted step, starting from the
    /// initial point.
    pub objective_trace: Vec<f64>,
}

impl LogisticFit {
    pub fn n_features(&self) -> usize {
        self.weights.len() - 1
    }
}

fn log1p_exp(eta: f64) -> f64 {
    if eta > 0.0 {
        eta + (-eta).exp().ln_1p()
    } else {
        eta.exp().ln_1p()
    }
}

fn sigmoid(eta: f64) -> f64 {
    if eta >= 0.0 {
        1.0 / (1.0 + (-eta).exp())
    } else {
        let e = eta.exp();
        e / (1.0 + e)
    }
}

struct Standardized {
    z: Array2<f64>,
    means: Vec<f64>,
    scales: Vec<f64>,
}

fn standardize(features: ArrayView2<f64>) -> Standardized {
    let (n, k) = features.dim();
    let means: Vec<f64> = features.mean_axis(Axis(0)).map(|m| m.to_vec()).unwrap_or(vec![0.0; k]);
    let scales: Vec<f64> = (0..k)
        .map(|j| {
            let var = features
                .column(j)
                .iter()
                .map(|v| (v - means[j]).powi(2))
                .sum::<f64>()
                / n as f64;
            if var > 0.0 {
                var.sqrt()
            } else {
                1.0
            }
        })
        .collect();
    let mut z = features.to_owned();
    for (j, mut col) in z.axis_iter_mut(Axis(1)).enumerate() {
        col.mapv_inplace(|v| (v - means[j]) / scales[j]);
    }
    Standardized { z, means, scales }
}

/// Objective and gradient in the standardized parameterization `v`.
fn objective_and_gradient(
    z: &Array2<f64>,
    y: &[f64],
    v: &Array1<f64>,
    penalty: &[f64],
    want_gradient: bool,
) -> (f64, Option<Array1<f64>>) {
    let n = y.len() as f64;
    let k = z.ncols();
    let eta = z.dot(&v.slice(ndarray::s![1..])) + v[0];
    let mut loglik = 0.0;
    let mut resid = Array1::zeros(y.len());
    for (i, &e) in eta.iter().enumerate() {
        loglik += y[i] * e - log1p_exp(e);
        if want_gradient {
            resid[i] = y[i] - sigmoid(e);
        }
    }
    let pen: f64 = (0..k).map(|j| penalty[j] * v[j + 1] * v[j + 1]).sum::<f64>() / 2.0;
    let objective = loglik / n - pen;
    if !want_gradient {
        return (objective, None);
    }
    let mut grad = Array1::zeros(k + 1);
    grad[0] = resid.sum() / n;
    let zr = z.t().dot(&resid);
    for j in 0..k {
        grad[j + 1] = zr[j] / n - penalty[j] * v[j + 1];
    }
    (objective, Some(grad))
}

/// Fits `P(y = 1 | x) = σ(w₀ + xᵀw)`.
pub fn logistic_fit(features: ArrayView2<f64>, labels: &[u8], options: &LogisticOptions) -> Result<LogisticFit> {
    let (n, k) = features.dim();
    if labels.len() != n {
        return Err(Error::Shape {
            context: "logistic labels",
            expected: n,
            found: labels.len(),
        });
    }
    if n == 0 {
        return Err(Error::Domain("logistic regression on an empty sample".into()));
    }
    if labels.iter().any(|&l| l > 1) {
        return Err(Error::Domain("logistic labels must be 0 or 1".into()));
    }
    let positives = labels.iter().filter(|&&l| l == 1).count();
    if positives == 0 || positives == n {
        return Err(Error::DegenerateLabels);
    }
    if features.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain("logistic features contain non-finite values".into()));
    }

    let std = standardize(features);
    let y: Vec<f64> = labels.iter().map(|&l| l as f64).collect();
    // λ/2·w_j² with w_j = v_j / s_j.
    let penalty: Vec<f64> = std.scales.iter().map(|s| options.l2 / (s * s)).collect();

    let to_original = |v: &Array1<f64>| -> Array1<f64> {
        let mut w = Array1::zeros(k + 1);
        let mut intercept = v[0];
        for j in 0..k {
            w[j + 1] = v[j + 1] / std.scales[j];
            intercept -= w[j + 1] * std.means[j];
        }
        w[0] = intercept;
        w
    };
    // ∂J/∂w_j = s_j ∂J/∂v_j + m_j ∂J/∂v₀.
    let original_grad_norm = |g: &Array1<f64>| -> f64 {
        let mut norm = g[0].abs();
        for j in 0..k {
            norm = norm.max((std.scales[j] * g[j + 1] + std.means[j] * g[0]).abs());
        }
        norm
    };

    let mut v = Array1::<f64>::zeros(k + 1);
    let (mut obj, grad) = objective_and_gradient(&std.z, &y, &v, &penalty, true);
    let mut grad = grad.expect("gradient requested");
    let mut trace = vec![obj];
    let mut step: f64 = 1.0;
    let mut converged = original_grad_norm(&grad) < options.tolerance;
    let mut iterations = 0;

    while !converged && iterations < options.max_iter {
        iterations += 1;
        let g2 = grad.dot(&grad);
        step = (step * 2.0).min(1e6);
        let mut accepted = None;
        while step > 1e-20 {
            let candidate = &v + &(&grad * step);
            let (cand_obj, _) = objective_and_gradient(&std.z, &y, &candidate, &penalty, false);
            if cand_obj >= obj + 1e-4 * step * g2 {
                accepted = Some((candidate, cand_obj));
                break;
            }
            step /= 2.0;
        }
        let Some((next, _)) = accepted else {
            // No ascent direction left at machine precision.
            break;
        };
        v = next;
        let (o, g) = objective_and_gradient(&std.z, &y, &v, &penalty, true);
        obj = o;
        grad = g.expect("gradient requested");
        trace.push(obj);
        converged = original_grad_norm(&grad) < options.tolerance;
    }

    Ok(LogisticFit {
        weights: to_original(&v),
        converged,
        iterations,
        objective_trace: trace,
    })
}

/// Positive-class probabilities `1 / (1 + exp(−(w₀ + xᵀw)))`.
pub fn predict_proba(fit: &LogisticFit, features: ArrayView2<f64>) -> Result<Array1<f64>> {
    if features.ncols() != fit.n_features() {
        return Err(Error::Shape {
            context: "logistic prediction features",
            expected: fit.n_features(),
            found: features.ncols(),
        });
    }
    let eta = features.dot(&fit.weights.slice(ndarray::s![1..])) + fit.weights[0];
    Ok(eta.mapv(sigmoid))
}

/// 1 where the probability is at least `threshold`, else 0.
pub fn classify(probabilities: &[f64], threshold: f64) -> Vec<u8> {
    probabilities.iter().map(|&p| u8::from(p >= threshold)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn classify_ties_go_to_one() {
        assert_eq!(classify(&[0.5, 0.49, 0.51], DEFAULT_THRESHOLD), vec![1, 0, 1]);
    }

    #[test]
    fn null_model_predicts_one_half() {
        let fit = LogisticFit {
            weights: array![0.0, 0.0, 0.0],
            converged: true,
            iterations: 0,
            objective_trace: vec![],
        };
        let p = predict_proba(&fit, array![[1.0, -3.0], [100.0, 2.0]].view()).unwrap();
        assert!(p.iter().all(|&v| v == 0.5));

        let unit = LogisticFit {
            weights: array![0.0, 1.0],
            ..fit.clone()
        };
        assert_eq!(predict_proba(&unit, array![[0.0]].view()).unwrap()[0], 0.5);
        let big = predict_proba(&unit, array![[50.0], [-50.0]].view()).unwrap();
        assert!(big[0] > 1.0 - 1e-15 && big[1] < 1e-15 && big[1] > 0.0);
        assert!(predict_proba(&unit, array![[0.0, 1.0]].view()).is_err());
    }

    #[test]
    fn separable_fit_is_bounded_and_perfect() {
        let x = Array2::from_shape_fn((40, 1), |(i, _)| if i < 20 { -1.0 - i as f64 * 0.05 } else { 1.0 + i as f64 * 0.05 });
        let labels: Vec<u8> = (0..40).map(|i| u8::from(i >= 20)).collect();
        let fit = logistic_fit(x.view(), &labels, &LogisticOptions::default()).unwrap();
        assert!(fit.converged, "iterations {}", fit.iterations);
        assert!(fit.weights.iter().all(|w| w.is_finite() && w.abs() < 1e3));
        let preds = classify(predict_proba(&fit, x.view()).unwrap().as_slice().unwrap(), 0.5);
        assert_eq!(preds, labels);
    }

    #[test]
    fn single_class_is_rejected() {
        let x = array![[1.0], [2.0], [3.0]];
        assert!(matches!(
            logistic_fit(x.view(), &[1, 1, 1], &LogisticOptions::default()),
            Err(Error::DegenerateLabels)
        ));
    }

    #[test]
    fn objective_never_decreases() {
        let x = Array2::from_shape_fn((200, 3), |(i, j)| ((i * 7 + j * 13) % 17) as f64 - 8.0 + j as f64 * 10.0);
        let labels: Vec<u8> = (0..200).map(|i| u8::from((i * 7) % 17 > 6)).collect();
        let fit = logistic_fit(x.view(), &labels, &LogisticOptions::default()).unwrap();
        assert!(fit.objective_trace.windows(2).all(|w| w[1] >= w[0]));
        assert!(fit.converged);
    }

    #[test]
    fn iteration_cap_reports_non_convergence() {
        let x = array![[0.0], [1.0], [2.0], [3.0], [1.5]];
        let opts = LogisticOptions { max_iter: 1, ..Default::default() };
        let fit = logistic_fit(x.view(), &[0, 0, 1, 1, 0], &opts).unwrap();
        assert!(!fit.converged);
        assert_eq!(fit.iterations, 1);
    }
}
