//! Ordinary least squares through a Householder QR factorization.
//!
//! Columns are scaled to unit Euclidean norm before factorizing. A design is
//! rejected when the smallest singular value of the scaled design falls below
//! [`SINGULAR_TOLERANCE`].

use ndarray::{Array1, ArrayView1, ArrayView2};

use crate::error::{Error, Result};

pub const SINGULAR_TOLERANCE: f64 = 1e-8;

/// QR factorization of a fixed `n × p` design, reusable across responses.
#[derive(Debug, Clone)]
pub struct QrDecomposition {
    n: usize,
    p: usize,
    /// Householder vectors; `reflectors[j]` acts on rows `j..n`.
    reflectors: Vec<Vec<f64>>,
    taus: Vec<f64>,
    /// Upper-triangular factor of the scaled design, row-major `p × p`.
    r: Vec<f64>,
    scales: Vec<f64>,
    names: Vec<String>,
}

impl QrDecomposition {
    pub fn new(design: ArrayView2<f64>, names: &[String]) -> Result<Self> {
        let (n, p) = design.dim();
        if names.len() != p {
            return Err(Error::Shape {
                context: "design column names",
                expected: p,
                found: names.len(),
            });
        }
        if n <= p {
            return Err(Error::Domain(format!(
                "least squares needs more rows than columns ({n} rows, {p} columns)"
            )));
        }
        if design.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("design contains non-finite values".into()));
        }

        let mut columns: Vec<Vec<f64>> = (0..p).map(|j| design.column(j).to_vec()).collect();
        let mut scales = Vec::with_capacity(p);
        for (j, col) in columns.iter_mut().enumerate() {
            let norm = col.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm == 0.0 {
                return Err(Error::SingularDesign {
                    column: names[j].clone(),
                    min_singular_value: 0.0,
                });
            }
            col.iter_mut().for_each(|v| *v /= norm);
            scales.push(norm);
        }

        let mut reflectors = Vec::with_capacity(p);
        let mut taus = Vec::with_capacity(p);
        let mut r = vec![0.0; p * p];
        for j in 0..p {
            let x = &columns[j][j..];
            let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
            let alpha = if x[0] > 0.0 { -norm } else { norm };
            let mut v = x.to_vec();
            v[0] -= alpha;
            let vtv: f64 = v.iter().map(|t| t * t).sum();
            let tau = if vtv > 0.0 { 2.0 / vtv } else { 0.0 };
            for col in columns.iter_mut().skip(j) {
                apply_reflector(&v, tau, &mut col[j..]);
            }
            for (i, col) in columns.iter().enumerate().skip(j) {
                r[j * p + i] = col[j];
            }
            r[j * p + j] = alpha;
            reflectors.push(v);
            taus.push(tau);
        }

        let qr = Self {
            n,
            p,
            reflectors,
            taus,
            r,
            scales,
            names: names.to_vec(),
        };
        let sigma_min = qr.min_singular_value();
        if sigma_min < SINGULAR_TOLERANCE {
            let worst = (0..p)
                .min_by(|&a, &b| qr.r_at(a, a).abs().total_cmp(&qr.r_at(b, b).abs()))
                .unwrap_or(0);
            return Err(Error::SingularDesign {
                column: qr.names[worst].clone(),
                min_singular_value: sigma_min,
            });
        }
        Ok(qr)
    }

    fn r_at(&self, i: usize, j: usize) -> f64 {
        self.r[i * self.p + j]
    }

    pub fn rows(&self) -> usize {
        self.n
    }

    pub fn cols(&self) -> usize {
        self.p
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    /// Smallest singular value of the unit-norm-scaled design, from a
    /// one-sided Jacobi sweep over the columns of `R`.
    pub fn min_singular_value(&self) -> f64 {
        let p = self.p;
        let mut cols: Vec<Vec<f64>> = (0..p).map(|j| (0..p).map(|i| self.r_at(i, j)).collect()).collect();
        for _sweep in 0..100 {
            let mut rotated = false;
            for i in 0..p {
                for j in i + 1..p {
                    let alpha: f64 = cols[i].iter().map(|v| v * v).sum();
                    let beta: f64 = cols[j].iter().map(|v| v * v).sum();
                    let gamma: f64 = cols[i].iter().zip(&cols[j]).map(|(a, b)| a * b).sum();
                    if gamma.abs() <= 1e-15 * (alpha * beta).sqrt() || gamma == 0.0 {
                        continue;
                    }
                    rotated = true;
                    let zeta = (beta - alpha) / (2.0 * gamma);
                    let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                    let c = 1.0 / (1.0 + t * t).sqrt();
                    let s = c * t;
                    for k in 0..p {
                        let (a, b) = (cols[i][k], cols[j][k]);
                        cols[i][k] = c * a - s * b;
                        cols[j][k] = s * a + c * b;
                    }
                }
            }
            if !rotated {
                break;
            }
        }
        cols.iter()
            .map(|c| c.iter().map(|v| v * v).sum::<f64>().sqrt())
            .fold(f64::INFINITY, f64::min)
    }

    /// Least-squares coefficients for one response.
    pub fn solve(&self, response: ArrayView1<f64>) -> Result<Vec<f64>> {
        if response.len() != self.n {
            return Err(Error::Shape {
                context: "least-squares response",
                expected: self.n,
                found: response.len(),
            });
        }
        let mut qty = response.to_vec();
        for (j, (v, &tau)) in self.reflectors.iter().zip(&self.taus).enumerate() {
            apply_reflector(v, tau, &mut qty[j..]);
        }
        let p = self.p;
        let mut scaled = vec![0.0; p];
        for i in (0..p).rev() {
            let tail: f64 = (i + 1..p).map(|k| self.r_at(i, k) * scaled[k]).sum();
            scaled[i] = (qty[i] - tail) / self.r_at(i, i);
        }
        Ok(scaled.iter().zip(&self.scales).map(|(b, s)| b / s).collect())
    }

    /// Diagonal of `(XᵀX)⁻¹` for the unscaled design.
    pub fn inverse_gram_diagonal(&self) -> Vec<f64> {
        let p = self.p;
        // Rinv is upper triangular; (XᵀX)⁻¹ = D⁻¹ Rinv Rinvᵀ D⁻¹.
        let mut rinv = vec![0.0; p * p];
        for j in 0..p {
            rinv[j * p + j] = 1.0 / self.r_at(j, j);
            for i in (0..j).rev() {
                let s: f64 = (i + 1..=j).map(|k| self.r_at(i, k) * rinv[k * p + j]).sum();
                rinv[i * p + j] = -s / self.r_at(i, i);
            }
        }
        (0..p)
            .map(|i| {
                let row: f64 = (i..p).map(|k| rinv[i * p + k].powi(2)).sum();
                row / (self.scales[i] * self.scales[i])
            })
            .collect()
    }

    pub fn fit(&self, response: ArrayView1<f64>, design: ArrayView2<f64>) -> Result<OlsFit> {
        let coefficients = Array1::from(self.solve(response)?);
        let residuals = &response - &design.dot(&coefficients);
        let dof = (self.n - self.p) as f64;
        let sigma2 = residuals.dot(&residuals) / dof;
        let standard_errors = self
            .inverse_gram_diagonal()
            .into_iter()
            .map(|d| (sigma2 * d).sqrt())
            .collect();
        Ok(OlsFit {
            coefficients,
            residuals,
            standard_errors,
            design_columns: self.names.clone(),
        })
    }
}

fn apply_reflector(v: &[f64], tau: f64, x: &mut [f64]) {
    if tau == 0.0 {
        return;
    }
    let dot: f64 = v.iter().zip(x.iter()).map(|(a, b)| a * b).sum();
    let k = tau * dot;
    x.iter_mut().zip(v).for_each(|(xi, vi)| *xi -= k * vi);
}

/// Result of a least-squares fit.
#[derive(Debug, Clone)]
pub struct OlsFit {
    pub coefficients: Array1<f64>,
    pub residuals: Array1<f64>,
    /// Classical standard errors `sqrt(σ̂² · diag((XᵀX)⁻¹))`, with
    /// `σ̂² = RSS / (n − p)`.
    pub standard_errors: Vec<f64>,
    pub design_columns: Vec<String>,
}

/// Regresses `response` on `design` (which should include an intercept
/// column when one is wanted).
pub fn ols_fit(response: ArrayView1<f64>, design: ArrayView2<f64>, names: &[String]) -> Result<OlsFit> {
    QrDecomposition::new(design, names)?.fit(response, design)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{array, Array2};

    fn names(p: usize) -> Vec<String> {
        (0..p).map(|j| format!("x{j}")).collect()
    }

    #[test]
    fn noiseless_fit_is_exact() {
        let y = array![0.0, 1.0, 1.0, 0.0, 1.0, 0.0];
        let design = Array2::from_shape_fn((6, 2), |(i, j)| if j == 0 { 1.0 } else { y[i] });
        let response = y.mapv(|v| 0.7 - 2.5 * v);
        let fit = ols_fit(response.view(), design.view(), &names(2)).unwrap();
        assert!((fit.coefficients[0] - 0.7).abs() < 1e-12);
        assert!((fit.coefficients[1] + 2.5).abs() < 1e-12);
        assert!(fit.residuals.iter().all(|r| r.abs() < 1e-10));
    }

    #[test]
    fn duplicate_column_is_singular() {
        let design = array![[1.0, 2.0, 2.0], [1.0, 3.0, 3.0], [1.0, 5.0, 5.0], [1.0, 1.0, 1.0]];
        let cols = vec!["intercept".to_string(), "a".into(), "a_copy".into()];
        let err = ols_fit(array![1.0, 2.0, 3.0, 4.0].view(), design.view(), &cols).unwrap_err();
        match err {
            Error::SingularDesign { column, .. } => assert_eq!(column, "a_copy"),
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn zero_column_is_singular() {
        let design = array![[1.0, 0.0], [1.0, 0.0], [1.0, 0.0]];
        assert!(matches!(
            ols_fit(array![1.0, 2.0, 3.0].view(), design.view(), &names(2)),
            Err(Error::SingularDesign { .. })
        ));
    }

    #[test]
    fn too_few_rows() {
        let design = array![[1.0, 0.0], [1.0, 1.0]];
        assert!(matches!(
            ols_fit(array![1.0, 2.0].view(), design.view(), &names(2)),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn standard_errors_of_simple_regression() {
        // For y = a + b x with residual variance s², se(b) = s / sqrt(Σ(x - x̄)²).
        let x = array![1.0, 2.0, 4.0, 5.0, 7.0, 8.0];
        let response = array![1.2, 1.9, 4.3, 4.8, 7.4, 7.7];
        let design = Array2::from_shape_fn((6, 2), |(i, j)| if j == 0 { 1.0 } else { x[i] });
        let fit = ols_fit(response.view(), design.view(), &names(2)).unwrap();
        let mean = x.mean().unwrap();
        let sxx: f64 = x.iter().map(|v| (v - mean).powi(2)).sum();
        let s2 = fit.residuals.dot(&fit.residuals) / 4.0;
        assert!((fit.standard_errors[1] - (s2 / sxx).sqrt()).abs() < 1e-12);
        let se_a = (s2 * (1.0 / 6.0 + mean * mean / sxx)).sqrt();
        assert!((fit.standard_errors[0] - se_a).abs() < 1e-12);
    }
}
