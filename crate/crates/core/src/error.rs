use std::io;

use thiserror::Error;

/// Errors raised anywhere in the pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error: {0}")]
    Io(#[from] io::Error),

    #[error("format error: {0}")]
    Format(String),

    #[error("consistency error: {0}")]
    Consistency(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("shape mismatch in {context}: expected {expected}, found {found}")]
    Shape {
        context: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("non-finite loss at epoch {epoch}, batch {batch}")]
    Divergence { epoch: usize, batch: usize },

    #[error("singular design: column '{column}' is (nearly) collinear with the others (smallest singular value {min_singular_value:e})")]
    SingularDesign {
        column: String,
        min_singular_value: f64,
    },

    #[error("labels contain a single class")]
    DegenerateLabels,

    #[error("degenerate variance: {0}")]
    DegenerateVariance(String),

    #[error("collinearity: {0}")]
    Collinearity(String),

    #[error("cannot balance: {0}")]
    CannotBalance(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("replication {replication}, {step}: {source}")]
    Replication {
        replication: usize,
        step: &'static str,
        #[source]
        source: Box<Error>,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn in_replication(self, replication: usize, step: &'static str) -> Self {
        Error::Replication {
            replication,
            step,
            source: Box::new(self),
        }
    }
}
