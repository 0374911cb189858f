//! Replicated experiment across the shift ladder, its configuration and
//! CSV outputs.

pub mod config;
pub mod experiment;
pub mod output;

pub use config::{ExperimentConfig, LearnerConfig};
pub use experiment::{
    replication_seed, run_experiment, run_experiment_with_pools, run_replication, ExperimentResult, Method, MnistPools,
    Predictions, ReplicationOutput, ReplicationWarning, ResultRow, SEED_STRIDE,
};
pub use output::{summarize, write_outputs, Quantiles, SummaryRow, RESULTS_HEADER};
