//! One replication trains two feature learners (on the confounded training
//! set and on its balanced version) and evaluates three methods on the six
//! shifted test sets:
//!
//! - `none`: logistic regression on the raw learned features.
//! - `smote`: logistic regression on features from the balanced learner.
//! - `causal`: logistic regression on counterfactual features.

use std::fmt;
use std::str::FromStr;

use ndarray::{Array1, Array2, ArrayView2};
use rayon::prelude::*;

use crate::balance::{smote_balance, BalanceConfig};
use crate::dataset::{load_mnist_dir, make_shift_suite, ColoredDataset, RawMnist, ShiftLevel};
use crate::deconfound::{adjust_test, confounder_column, fit_and_adjust_train};
use crate::diagnostics::{ci_report, CiReport};
use crate::error::{Error, Result};
use crate::harness::config::ExperimentConfig;
use crate::nn::Network;
use crate::rng::derive_seed;
use crate::stats::{classify, logistic_fit, predict_proba, LogisticFit, DEFAULT_THRESHOLD};

/// Distance between consecutive replication seeds.
pub const SEED_STRIDE: u64 = 1_000_003;

// Streams of the base seed, shared by every replication so that all
// replications see the same MNIST subsets.
const STREAM_TRAIN_SUBSET: u64 = 0;
const STREAM_TEST_SUBSET: u64 = 1;

// Streams of the replication seed.
const STREAM_COLOR: u64 = 2;
const STREAM_NET_BIASED: u64 = 3;
const STREAM_BALANCE: u64 = 4;
const STREAM_NET_BALANCED: u64 = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    None,
    Smote,
    Causal,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::None, Method::Smote, Method::Causal];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::None => "none",
            Method::Smote => "smote",
            Method::Causal => "causal",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::Parse(format!("unknown method '{s}'")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub replication: usize,
    pub shift: ShiftLevel,
    pub method: Method,
    pub accuracy: f64,
    pub report: CiReport,
}

/// Per-example output for one (shift, method) cell.
#[derive(Debug, Clone, PartialEq)]
pub struct Predictions {
    pub replication: usize,
    pub shift: ShiftLevel,
    pub method: Method,
    pub probabilities: Vec<f64>,
    pub labels: Vec<u8>,
    pub colors: Vec<u8>,
}

#[derive(Debug, Clone)]
pub struct ReplicationOutput {
    /// Six shifts × three methods, shift-major.
    pub rows: Vec<ResultRow>,
    pub predictions: Vec<Predictions>,
    /// Whether each logistic fit met its tolerance, by method.
    pub converged: [bool; 3],
}

/// MNIST pools the replications draw their subsets from.
#[derive(Debug, Clone)]
pub struct MnistPools {
    pub train: RawMnist,
    pub test: RawMnist,
}

impl MnistPools {
    pub fn load(config: &ExperimentConfig) -> Result<Self> {
        let (train, test) = load_mnist_dir(&config.mnist_dir)?;
        Ok(Self { train, test })
    }
}

pub fn replication_seed(base_seed: u64, replication: usize) -> u64 {
    base_seed.wrapping_add((replication as u64).wrapping_mul(SEED_STRIDE))
}

fn prepare(pool: &RawMnist, n: usize, seed: u64, downscale: bool) -> Result<RawMnist> {
    let subset = pool.subset(n, seed)?;
    if downscale {
        subset.downscale_2x2()
    } else {
        Ok(subset)
    }
}

fn train_learner(config: &ExperimentConfig, data: &ColoredDataset, seed: u64) -> Result<Network> {
    let mut net = Network::new(config.learner.network(data.image_size(), seed)?)?;
    let report = net.train(data, data.labels())?;
    log::debug!("learner losses {:?}", report.epoch_losses);
    Ok(net)
}

fn label_column(labels: &[u8]) -> Array1<f64> {
    labels.iter().map(|&y| y as f64).collect()
}

struct Evaluator<'a> {
    config: &'a ExperimentConfig,
    replication: usize,
    rows: Vec<ResultRow>,
    predictions: Vec<Predictions>,
}

impl Evaluator<'_> {
    fn evaluate(
        &mut self,
        method: Method,
        shift: ShiftLevel,
        fit: &LogisticFit,
        features: ArrayView2<f64>,
        test: &ColoredDataset,
    ) -> Result<()> {
        let probs = predict_proba(fit, features)?.to_vec();
        let predicted = classify(&probs, DEFAULT_THRESHOLD);
        let hits = predicted.iter().zip(test.labels()).filter(|(p, y)| p == y).count();
        let accuracy = hits as f64 / test.len() as f64;
        let report = ci_report(
            &probs,
            &test.color_column(),
            &label_column(test.labels()).to_vec(),
            &self.config.thresholds,
            Some(shift),
        )?;
        self.rows.push(ResultRow {
            replication: self.replication,
            shift,
            method,
            accuracy,
            report,
        });
        if self.config.write_predictions {
            self.predictions.push(Predictions {
                replication: self.replication,
                shift,
                method,
                probabilities: probs,
                labels: test.labels().to_vec(),
                colors: test.colors().to_vec(),
            });
        }
        Ok(())
    }
}

/// Runs the full protocol for one replication. The MNIST subsets depend only
/// on the base seed; coloring, training and balancing use the replication
/// seed.
pub fn run_replication(config: &ExperimentConfig, pools: &MnistPools, replication: usize) -> Result<ReplicationOutput> {
    let seed = replication_seed(config.base_seed, replication);
    let ctx = |step: &'static str| move |e: Error| e.in_replication(replication, step);

    let train_raw = prepare(&pools.train, config.n_train, derive_seed(config.base_seed, STREAM_TRAIN_SUBSET), config.downscale)
        .map_err(ctx("sampling training images"))?;
    let test_raw = prepare(&pools.test, config.n_test, derive_seed(config.base_seed, STREAM_TEST_SUBSET), config.downscale)
        .map_err(ctx("sampling test images"))?;
    let suite = make_shift_suite(&train_raw, &test_raw, derive_seed(seed, STREAM_COLOR)).map_err(ctx("coloring"))?;
    let train = &suite.train;

    let biased = train_learner(config, train, derive_seed(seed, STREAM_NET_BIASED)).map_err(ctx("training learner"))?;
    let train_features = biased.extract_features(train).map_err(ctx("extracting features"))?;
    let test_features = suite
        .tests
        .iter()
        .map(|(_, d)| biased.extract_features(d).map(|f| f.into_inner()))
        .collect::<Result<Vec<Array2<f64>>>>()
        .map_err(ctx("extracting features"))?;

    let balance_config = BalanceConfig {
        seed: derive_seed(seed, STREAM_BALANCE),
        ..config.balance.clone()
    };
    let balanced = smote_balance(train, &balance_config).map_err(ctx("balancing"))?.dataset;
    let balanced_net =
        train_learner(config, &balanced, derive_seed(seed, STREAM_NET_BALANCED)).map_err(ctx("training balanced learner"))?;
    let balanced_train_features = balanced_net.extract_features(&balanced).map_err(ctx("extracting balanced features"))?;
    let balanced_test_features = suite
        .tests
        .iter()
        .map(|(_, d)| balanced_net.extract_features(d).map(|f| f.into_inner()))
        .collect::<Result<Vec<Array2<f64>>>>()
        .map_err(ctx("extracting balanced features"))?;

    let (adjusted_train, deconfound) = fit_and_adjust_train(
        train_features.values().view(),
        label_column(train.labels()).view(),
        confounder_column(&train.color_column()).view(),
    )
    .map_err(ctx("deconfounding"))?;
    let adjusted_tests = suite
        .tests
        .iter()
        .zip(&test_features)
        .map(|((_, d), f)| adjust_test(f.view(), confounder_column(&d.color_column()).view(), &deconfound).map(|a| a.values))
        .collect::<Result<Vec<_>>>()
        .map_err(ctx("deconfounding"))?;

    let fit_none = logistic_fit(train_features.values().view(), train.labels(), &config.logistic).map_err(ctx("fitting none"))?;
    let fit_smote = logistic_fit(balanced_train_features.values().view(), balanced.labels(), &config.logistic)
        .map_err(ctx("fitting smote"))?;
    let fit_causal =
        logistic_fit(adjusted_train.values.view(), train.labels(), &config.logistic).map_err(ctx("fitting causal"))?;
    let converged = [fit_none.converged, fit_smote.converged, fit_causal.converged];
    for (method, ok) in Method::ALL.iter().zip(converged) {
        if !ok {
            log::warn!("replication {replication}: logistic fit for '{method}' hit the iteration cap");
        }
    }

    let mut eval = Evaluator {
        config,
        replication,
        rows: Vec::with_capacity(18),
        predictions: Vec::new(),
    };
    for (i, (shift, test)) in suite.tests.iter().enumerate() {
        eval.evaluate(Method::None, *shift, &fit_none, test_features[i].view(), test)
            .map_err(ctx("evaluating none"))?;
        eval.evaluate(Method::Smote, *shift, &fit_smote, balanced_test_features[i].view(), test)
            .map_err(ctx("evaluating smote"))?;
        eval.evaluate(Method::Causal, *shift, &fit_causal, adjusted_tests[i].view(), test)
            .map_err(ctx("evaluating causal"))?;
    }
    Ok(ReplicationOutput {
        rows: eval.rows,
        predictions: eval.predictions,
        converged,
    })
}

/// A replication that failed and was skipped.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplicationWarning {
    pub replication: usize,
    pub message: String,
}

#[derive(Debug, Clone)]
pub struct ExperimentResult {
    /// Ordered by replication, then shift, then method.
    pub rows: Vec<ResultRow>,
    pub predictions: Vec<Predictions>,
    pub warnings: Vec<ReplicationWarning>,
}

impl ExperimentResult {
    pub fn rows_for(&self, shift: ShiftLevel, method: Method) -> impl Iterator<Item = &ResultRow> {
        self.rows.iter().filter(move |r| r.shift == shift && r.method == method)
    }

    pub fn replications(&self) -> Vec<usize> {
        let mut reps: Vec<usize> = self.rows.iter().map(|r| r.replication).collect();
        reps.dedup();
        reps
    }
}

/// Runs every replication in parallel and merges them in replication order.
/// Failed replications become warnings; the run fails only if none succeed.
pub fn run_experiment_with_pools(config: &ExperimentConfig, pools: &MnistPools) -> Result<ExperimentResult> {
    config.validate()?;
    let outputs: Vec<Result<ReplicationOutput>> = (0..config.replications)
        .into_par_iter()
        .map(|rep| {
            log::info!("replication {rep} started");
            let out = run_replication(config, pools, rep);
            log::info!("replication {rep} finished");
            out
        })
        .collect();

    let mut result = ExperimentResult {
        rows: Vec::new(),
        predictions: Vec::new(),
        warnings: Vec::new(),
    };
    for (rep, out) in outputs.into_iter().enumerate() {
        match out {
            Ok(out) => {
                result.rows.extend(out.rows);
                result.predictions.extend(out.predictions);
            }
            Err(e) => {
                log::warn!("{e}");
                result.warnings.push(ReplicationWarning {
                    replication: rep,
                    message: e.to_string(),
                });
            }
        }
    }
    if result.rows.is_empty() {
        return Err(Error::Consistency(format!(
            "all {} replications failed; first error: {}",
            config.replications,
            result.warnings.first().map_or("", |w| w.message.as_str())
        )));
    }
    Ok(result)
}

/// Loads MNIST from the configured directory, runs the experiment and
/// writes every output file to the configured output directory.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentResult> {
    config.validate()?;
    let pools = MnistPools::load(config)?;
    let result = run_experiment_with_pools(config, &pools)?;
    crate::harness::output::write_outputs(config, &result)?;
    Ok(result)
}
