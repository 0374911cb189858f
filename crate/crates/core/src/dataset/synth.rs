//! Synthetic data from the linear structural model
//! `x_j = μ_j + β_XY,j·y + β_XC,j·c + w_j`, with `(y, c)` drawn from a 2×2
//! joint table. Used as a ground-truth oracle for the adjustment.

use ndarray::Array2;
use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::rng;

/// Joint probabilities of `(C, Y)`, indexed `[c][y]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JointTable(pub [[f64; 2]; 2]);

impl JointTable {
    pub fn uniform() -> Self {
        JointTable([[0.25; 2]; 2])
    }

    /// Balanced labels with `P(C=1 | Y=1) = P(C=0 | Y=0) = pr`, the same
    /// coupling the colorization uses.
    pub fn from_coupling(pr: f64) -> Self {
        JointTable([[pr / 2.0, (1.0 - pr) / 2.0], [(1.0 - pr) / 2.0, pr / 2.0]])
    }

    pub fn validate(&self) -> Result<()> {
        let cells = self.0.iter().flatten();
        if cells.clone().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::Domain(format!("joint table {:?} has a negative entry", self.0)));
        }
        let total: f64 = cells.sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::Domain(format!("joint table sums to {total}, not 1")));
        }
        Ok(())
    }

    fn sample<R: Rng>(&self, rng: &mut R) -> (u8, u8) {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for c in 0..2u8 {
            for y in 0..2u8 {
                acc += self.0[c as usize][y as usize];
                if u < acc {
                    return (c, y);
                }
            }
        }
        // Rounding left u above the cumulative total; take the last nonzero cell.
        let last = (0..4).rev().find(|&i| self.0[i / 2][i % 2] > 0.0).unwrap_or(3);
        ((last / 2) as u8, (last % 2) as u8)
    }
}

/// True coefficients of one synthetic feature.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScmCoefficients {
    pub intercept: f64,
    pub label: f64,
    pub confounder: f64,
}

#[derive(Debug, Clone)]
pub struct SynthScmDataset {
    pub y: Vec<u8>,
    pub c: Vec<u8>,
    /// `n × k` features.
    pub x: Array2<f64>,
    pub true_coefs: Vec<ScmCoefficients>,
    pub noise_sd: f64,
}

impl SynthScmDataset {
    pub fn y_column(&self) -> Vec<f64> {
        self.y.iter().map(|&v| v as f64).collect()
    }

    pub fn c_column(&self) -> Vec<f64> {
        self.c.iter().map(|&v| v as f64).collect()
    }
}

/// Draws `n` examples with one feature per entry of `coefs`.
pub fn synth_scm(
    n: usize,
    joint: JointTable,
    coefs: &[ScmCoefficients],
    noise_sd: f64,
    seed: u64,
) -> Result<SynthScmDataset> {
    joint.validate()?;
    if !(noise_sd > 0.0 && noise_sd.is_finite()) {
        return Err(Error::Domain(format!("noise sd {noise_sd} must be positive")));
    }
    let normal = Normal::new(0.0, noise_sd).map_err(|e| Error::Domain(e.to_string()))?;
    let mut rng = rng::rng_from_seed(seed);
    let k = coefs.len();
    let mut y = Vec::with_capacity(n);
    let mut c = Vec::with_capacity(n);
    let mut x = Array2::zeros((n, k));
    for i in 0..n {
        let (ci, yi) = joint.sample(&mut rng);
        for (j, coef) in coefs.iter().enumerate() {
            x[[i, j]] = coef.intercept
                + coef.label * yi as f64
                + coef.confounder * ci as f64
                + normal.sample(&mut rng);
        }
        y.push(yi);
        c.push(ci);
    }
    Ok(SynthScmDataset {
        y,
        c,
        x,
        true_coefs: coefs.to_vec(),
        noise_sd,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn coefs() -> Vec<ScmCoefficients> {
        vec![
            ScmCoefficients { intercept: 1.0, label: 2.0, confounder: -1.5 },
            ScmCoefficients { intercept: 0.0, label: -0.5, confounder: 0.0 },
        ]
    }

    #[test]
    fn rejects_bad_tables_and_noise() {
        let bad = JointTable([[0.5, 0.5], [0.5, 0.0]]);
        assert!(matches!(synth_scm(10, bad, &coefs(), 0.1, 0), Err(Error::Domain(_))));
        let neg = JointTable([[1.1, -0.1], [0.0, 0.0]]);
        assert!(matches!(synth_scm(10, neg, &coefs(), 0.1, 0), Err(Error::Domain(_))));
        assert!(synth_scm(10, JointTable::uniform(), &coefs(), 0.0, 0).is_err());
    }

    #[test]
    fn residual_noise_matches_structural_equation() {
        let data = synth_scm(20_000, JointTable::from_coupling(0.8), &coefs(), 0.3, 4).unwrap();
        for (j, coef) in data.true_coefs.iter().enumerate() {
            let resid: Vec<f64> = (0..data.y.len())
                .map(|i| {
                    data.x[[i, j]]
                        - coef.intercept
                        - coef.label * data.y[i] as f64
                        - coef.confounder * data.c[i] as f64
                })
                .collect();
            let mean = resid.iter().sum::<f64>() / resid.len() as f64;
            let sd = (resid.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / resid.len() as f64).sqrt();
            assert!(mean.abs() < 0.01, "{mean}");
            assert!((sd - 0.3).abs() < 0.01, "{sd}");
        }
    }

    #[test]
    fn joint_table_frequencies() {
        let table = JointTable([[0.1, 0.2], [0.3, 0.4]]);
        let data = synth_scm(40_000, table, &coefs(), 0.1, 8).unwrap();
        let mut counts = [[0usize; 2]; 2];
        for (&c, &y) in data.c.iter().zip(&data.y) {
            counts[c as usize][y as usize] += 1;
        }
        for c in 0..2 {
            for y in 0..2 {
                let freq = counts[c][y] as f64 / 40_000.0;
                assert!((freq - table.0[c][y]).abs() < 0.01);
            }
        }
    }
}
