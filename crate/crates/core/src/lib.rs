//! Counterfactual deconfounding of learned feature representations.
//!
//! A small softmax network is trained on colored MNIST, its penultimate-layer
//! activations are taken as features, and the direct effect of the color
//! confounder is removed from each feature by a per-feature linear
//! regression on `[1, Y, C]`. Coefficients estimated on the training set are
//! reused to adjust test features, so test labels are never needed.
//!
//! Modules:
//! - [`dataset`]: IDX loading, label binarization, colorization, shift suites
//!   and a synthetic linear structural model for oracle tests.
//! - [`nn`]: feed-forward network with RMSprop training and feature extraction.
//! - [`stats`]: QR least squares, logistic regression, Pearson/partial correlation.
//! - [`deconfound`]: the counterfactual feature adjustment.
//! - [`balance`]: the rotation-based balancing baseline.
//! - [`diagnostics`]: marginal/partial correlation checks on predictions.
//! - [`harness`]: replicated experiment, configuration and CSV output.

pub mod balance;
pub mod dataset;
pub mod deconfound;
pub mod diagnostics;
pub mod error;
pub mod harness;
pub mod nn;
pub mod rng;
pub mod stats;

pub use error::{Error, Result};
