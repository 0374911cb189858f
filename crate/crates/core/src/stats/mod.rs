//! Least squares, binary logistic regression and correlations.

mod corr;
mod logistic;
mod ols;

pub use corr::{partial_corr, pearson_corr};
pub use logistic::{classify, logistic_fit, predict_proba, LogisticFit, LogisticOptions, DEFAULT_THRESHOLD};
pub use ols::{ols_fit, OlsFit, QrDecomposition, SINGULAR_TOLERANCE};
