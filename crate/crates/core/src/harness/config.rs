//! Experiment configuration and its `key = value` text format.
//!
//! Blank lines and lines starting with `#` are ignored. Unknown keys are
//! rejected so typos surface immediately.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::balance::{BalanceConfig, BalanceTarget};
use crate::diagnostics::CiThresholds;
use crate::error::{Error, Result};
use crate::nn::NetworkConfig;
use crate::stats::LogisticOptions;

/// Feature-learner settings independent of the input width.
#[derive(Debug, Clone, PartialEq)]
pub struct LearnerConfig {
    pub hidden: Vec<usize>,
    /// Dropout after each hidden layer.
    pub dropout: Vec<f64>,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub rmsprop_decay: f64,
    pub rmsprop_epsilon: f64,
}

impl Default for LearnerConfig {
    fn default() -> Self {
        Self {
            hidden: vec![64, 16],
            dropout: vec![0.25, 0.0],
            epochs: 10,
            batch_size: 128,
            learning_rate: 1e-3,
            rmsprop_decay: 0.9,
            rmsprop_epsilon: 1e-8,
        }
    }
}

impl LearnerConfig {
    pub fn network(&self, input: usize, seed: u64) -> Result<NetworkConfig> {
        let mut config = NetworkConfig::mlp(input, &self.hidden, 2);
        config.dropout_rates = self.dropout.clone();
        config.epochs = self.epochs;
        config.batch_size = self.batch_size;
        config.learning_rate = self.learning_rate;
        config.rmsprop_decay = self.rmsprop_decay;
        config.rmsprop_epsilon = self.rmsprop_epsilon;
        config.seed = seed;
        config.validate()?;
        Ok(config)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub replications: usize,
    /// Training images drawn from the MNIST training file per replication.
    pub n_train: usize,
    /// Test images drawn from the MNIST test file per replication.
    pub n_test: usize,
    /// Average-pool images 2×2 before coloring.
    pub downscale: bool,
    pub learner: LearnerConfig,
    /// The seed field is replaced per replication.
    pub balance: BalanceConfig,
    pub logistic: LogisticOptions,
    pub thresholds: CiThresholds,
    pub base_seed: u64,
    pub mnist_dir: PathBuf,
    pub output_dir: PathBuf,
    /// Also write per-example predicted probabilities.
    pub write_predictions: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            replications: 10,
            n_train: 12_000,
            n_test: 2_000,
            downscale: false,
            learner: LearnerConfig::default(),
            balance: BalanceConfig::default(),
            logistic: LogisticOptions::default(),
            thresholds: CiThresholds::default(),
            base_seed: 2024,
            mnist_dir: PathBuf::from("data/mnist"),
            output_dir: PathBuf::from("results"),
            write_predictions: false,
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Parse(format!("invalid value '{value}' for '{key}'")))
}

fn parse_list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>> {
    value
        .split(',')
        .map(str::trim)
        .filter(|v| !v.is_empty())
        .map(|v| parse(key, v))
        .collect()
}

fn join<T: ToString>(values: &[T]) -> String {
    values.iter().map(T::to_string).collect::<Vec<_>>().join(",")
}

impl ExperimentConfig {
    /// Overrides one field from its textual form.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        match key.trim() {
            "replications" => self.replications = parse(key, value)?,
            "n_train" => self.n_train = parse(key, value)?,
            "n_test" => self.n_test = parse(key, value)?,
            "downscale" => self.downscale = parse(key, value)?,
            "hidden" => self.learner.hidden = parse_list(key, value)?,
            "dropout" => self.learner.dropout = parse_list(key, value)?,
            "epochs" => self.learner.epochs = parse(key, value)?,
            "batch_size" => self.learner.batch_size = parse(key, value)?,
            "learning_rate" => self.learner.learning_rate = parse(key, value)?,
            "rmsprop_decay" => self.learner.rmsprop_decay = parse(key, value)?,
            "rmsprop_epsilon" => self.learner.rmsprop_epsilon = parse(key, value)?,
            "balance_target" => {
                self.balance.target = if value == "equalized" {
                    BalanceTarget::Equalized
                } else {
                    BalanceTarget::PerCategory(parse(key, value)?)
                }
            }
            "copies_per_minority_image" => self.balance.copies_per_minority_image = parse(key, value)?,
            "rotation_range" => self.balance.rotation_range = parse(key, value)?,
            "logistic_max_iter" => self.logistic.max_iter = parse(key, value)?,
            "logistic_tolerance" => self.logistic.tolerance = parse(key, value)?,
            "logistic_l2" => self.logistic.l2 = parse(key, value)?,
            "independence_threshold" => self.thresholds.independence = parse(key, value)?,
            "dependence_threshold" => self.thresholds.dependence = parse(key, value)?,
            "base_seed" => self.base_seed = parse(key, value)?,
            "mnist_dir" => self.mnist_dir = PathBuf::from(value),
            "output_dir" => self.output_dir = PathBuf::from(value),
            "write_predictions" => self.write_predictions = parse(key, value)?,
            other => return Err(Error::Config(format!("unknown configuration key '{other}'"))),
        }
        Ok(())
    }

    /// Applies every `key = value` line of `text` on top of `self`.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("line {}: expected 'key = value', got '{line}'", lineno + 1)))?;
            self.set(key, value)
                .map_err(|e| Error::Parse(format!("line {}: {e}", lineno + 1)))?;
        }
        Ok(())
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut config = Self::default();
        config.apply_text(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_text(&std::fs::read_to_string(path)?)
    }

    /// Text form accepted by [`ExperimentConfig::from_text`].
    pub fn to_text(&self) -> String {
        let target = match self.balance.target {
            BalanceTarget::Equalized => "equalized".to_string(),
            BalanceTarget::PerCategory(n) => n.to_string(),
        };
        let mut out = String::new();
        let mut line = |k: &str, v: String| {
            let _ = writeln!(out, "{k} = {v}");
        };
        line("replications", self.replications.to_string());
        line("n_train", self.n_train.to_string());
        line("n_test", self.n_test.to_string());
        line("downscale", self.downscale.to_string());
        line("hidden", join(&self.learner.hidden));
        line("dropout", join(&self.learner.dropout));
        line("epochs", self.learner.epochs.to_string());
        line("batch_size", self.learner.batch_size.to_string());
        line("learning_rate", format!("{:?}", self.learner.learning_rate));
        line("rmsprop_decay", format!("{:?}", self.learner.rmsprop_decay));
        line("rmsprop_epsilon", format!("{:?}", self.learner.rmsprop_epsilon));
        line("balance_target", target);
        line("copies_per_minority_image", self.balance.copies_per_minority_image.to_string());
        line("rotation_range", format!("{:?}", self.balance.rotation_range));
        line("logistic_max_iter", self.logistic.max_iter.to_string());
        line("logistic_tolerance", format!("{:?}", self.logistic.tolerance));
        line("logistic_l2", format!("{:?}", self.logistic.l2));
        line("independence_threshold", format!("{:?}", self.thresholds.independence));
        line("dependence_threshold", format!("{:?}", self.thresholds.dependence));
        line("base_seed", self.base_seed.to_string());
        line("mnist_dir", self.mnist_dir.display().to_string());
        line("output_dir", self.output_dir.display().to_string());
        line("write_predictions", self.write_predictions.to_string());
        out
    }

    pub fn validate(&self) -> Result<()> {
        if self.replications == 0 {
            return Err(Error::Config("at least one replication is required".into()));
        }
        if self.n_train == 0 || self.n_test == 0 {
            return Err(Error::Config("training and test sizes must be positive".into()));
        }
        self.learner.network(1, 0)?;
        self.balance.validate()?;
        self.thresholds.validate()?;
        if self.logistic.max_iter == 0 || !(self.logistic.tolerance > 0.0) || !(self.logistic.l2 >= 0.0) {
            return Err(Error::Config(format!("invalid logistic options {:?}", self.logistic)));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn text_round_trip() {
        let mut config = ExperimentConfig::default();
        config.replications = 3;
        config.learner.hidden = vec![32, 8];
        config.balance.target = BalanceTarget::PerCategory(500);
        config.thresholds.independence = 0.05;
        config.write_predictions = true;
        let parsed = ExperimentConfig::from_text(&config.to_text()).unwrap();
        assert_eq!(parsed, config);
    }

    #[test]
    fn comments_and_overrides() {
        let config = ExperimentConfig::from_text("# desk run\n\nreplications = 2\nn_test=500\n").unwrap();
        assert_eq!(config.replications, 2);
        assert_eq!(config.n_test, 500);
        assert_eq!(config.n_train, 12_000);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(ExperimentConfig::from_text("replicas = 3").is_err());
        assert!(ExperimentConfig::from_text("replications").is_err());
        assert!(ExperimentConfig::from_text("replications = many").is_err());
        assert!(ExperimentConfig::from_text("replications = 0").is_err());
        assert!(ExperimentConfig::from_text("hidden = 64\ndropout = 0.25,0").is_err());
        assert!(ExperimentConfig::from_text("independence_threshold = 0.5").is_err());
    }
}
