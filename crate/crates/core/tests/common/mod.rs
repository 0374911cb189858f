//! Oracles shared by the integration tests and the acceptance target. They
//! are deliberately implemented differently from the library code.

#![allow(dead_code)]

use std::path::PathBuf;

use learned_deconfound::dataset::{synth_scm, JointTable, ScmCoefficients, SynthScmDataset};
use learned_deconfound::nn::{gradient_check, Network, NetworkConfig};
use learned_deconfound::rng;
use ndarray::{Array1, Array2};
use rand::Rng;

/// Solves `XᵀX β = Xᵀy` by Gaussian elimination with partial pivoting.
pub fn normal_equations(design: &Array2<f64>, response: &[f64]) -> Vec<f64> {
    let p = design.ncols();
    let mut a = vec![vec![0.0; p + 1]; p];
    for i in 0..p {
        for j in 0..p {
            a[i][j] = design.column(i).dot(&design.column(j));
        }
        a[i][p] = design.column(i).iter().zip(response).map(|(x, y)| x * y).sum();
    }
    for col in 0..p {
        let pivot = (col..p)
            .max_by(|&r, &s| a[r][col].abs().total_cmp(&a[s][col].abs()))
            .unwrap();
        a.swap(col, pivot);
        for row in col + 1..p {
            let factor = a[row][col] / a[col][col];
            for k in col..=p {
                a[row][k] -= factor * a[col][k];
            }
        }
    }
    let mut beta = vec![0.0; p];
    for row in (0..p).rev() {
        let tail: f64 = (row + 1..p).map(|k| a[row][k] * beta[k]).sum();
        beta[row] = (a[row][p] - tail) / a[row][row];
    }
    beta
}

/// Random design `[1, U(-1,1)…]` with a response from known coefficients.
pub fn random_regression(n: usize, p: usize, seed: u64) -> (Array2<f64>, Vec<f64>) {
    let mut rng = rng::rng_from_seed(seed);
    let design = Array2::from_shape_fn((n, p), |(_, j)| if j == 0 { 1.0 } else { rng.random_range(-1.0..1.0) });
    let beta: Vec<f64> = (0..p).map(|_| rng.random_range(-3.0..3.0)).collect();
    let response = (0..n)
        .map(|i| (0..p).map(|j| design[[i, j]] * beta[j]).sum::<f64>() + rng.random_range(-0.5..0.5))
        .collect();
    (design, response)
}

fn residualize(v: &[f64], z: &[f64]) -> Vec<f64> {
    let n = v.len() as f64;
    let mv = v.iter().sum::<f64>() / n;
    let mz = z.iter().sum::<f64>() / n;
    let szz: f64 = z.iter().map(|x| (x - mz).powi(2)).sum();
    let szv: f64 = z.iter().zip(v).map(|(x, y)| (x - mz) * (y - mv)).sum();
    let slope = szv / szz;
    v.iter().zip(z).map(|(y, x)| y - mv - slope * (x - mz)).collect()
}

fn plain_corr(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
    cov / (va * vb).sqrt()
}

/// Partial correlation as the correlation of residuals after regressing
/// each variable on `[1, z]`.
pub fn residual_partial_corr(a: &[f64], b: &[f64], z: &[f64]) -> f64 {
    plain_corr(&residualize(a, z), &residualize(b, z))
}

/// Three correlated variables with a random mixing.
pub fn correlated_triple(n: usize, seed: u64) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let mut rng = rng::rng_from_seed(seed);
    let mix: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
    let mut a = Vec::with_capacity(n);
    let mut b = Vec::with_capacity(n);
    let mut z = Vec::with_capacity(n);
    for _ in 0..n {
        let zi: f64 = rng.random_range(-1.0..1.0);
        let ai = mix[0] * zi + rng.random_range(-1.0..1.0);
        let bi = mix[1] * zi + mix[2] * ai + rng.random_range(-1.0..1.0);
        a.push(ai);
        b.push(bi);
        z.push(zi);
    }
    (a, b, z)
}

/// Features with label and confounder effects spread over a range.
pub fn scm_coefficients(k: usize, seed: u64) -> Vec<ScmCoefficients> {
    let mut rng = rng::rng_from_seed(seed);
    (0..k)
        .map(|_| ScmCoefficients {
            intercept: rng.random_range(-2.0..2.0),
            label: rng.random_range(-2.0..2.0),
            confounder: rng.random_range(-2.0..2.0),
        })
        .collect()
}

pub fn scm(n: usize, pr: f64, coefs: &[ScmCoefficients], noise_sd: f64, seed: u64) -> SynthScmDataset {
    synth_scm(n, JointTable::from_coupling(pr), coefs, noise_sd, seed).expect("valid synthetic model")
}

pub fn column(values: &[f64]) -> Array1<f64> {
    Array1::from(values.to_vec())
}

/// `[1, y, c]`.
pub fn label_confounder_design(y: &[f64], c: &[f64]) -> Array2<f64> {
    Array2::from_shape_fn((y.len(), 3), |(i, j)| match j {
        0 => 1.0,
        1 => y[i],
        _ => c[i],
    })
}

pub fn names(list: &[&str]) -> Vec<String> {
    list.iter().map(|s| s.to_string()).collect()
}

/// Gradient check on a random small network with random widths.
pub fn random_gradient_check(seed: u64) -> f64 {
    let mut rng = rng::rng_from_seed(seed);
    let input = rng.random_range(2..8);
    let hidden: Vec<usize> = (0..rng.random_range(1..3)).map(|_| rng.random_range(2..7)).collect();
    let classes = rng.random_range(2..4);
    let mut config = NetworkConfig::mlp(input, &hidden, classes);
    config.seed = seed;
    let mut net = Network::new(config).expect("valid config");
    // Nonzero biases keep pre-activations off the rectifier kink.
    for b in net.biases_mut() {
        b.mapv_inplace(|_| rng.random_range(-0.5..0.5));
    }
    let n = rng.random_range(2..=10);
    let batch = Array2::from_shape_simple_fn((n, input), || rng.random_range(-1.0..1.0));
    let labels: Vec<u8> = (0..n).map(|_| rng.random_range(0..classes as u8)).collect();
    gradient_check(&net, batch.view(), &labels, 1e-4, 200, seed)
        .expect("gradient check runs")
        .max_relative_error
}

/// MNIST directory from `MNIST_DIR`, else `data/mnist` at the workspace root.
pub fn mnist_dir() -> Option<PathBuf> {
    let dir = std::env::var_os("MNIST_DIR")
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/mnist"));
    dir.join("train-images-idx3-ubyte").exists().then_some(dir)
}
