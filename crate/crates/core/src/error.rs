use thiserror::Error;

/// Errors raised by the numerical routines and the Monte Carlo harness.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    Parameter { name: &'static str, reason: String },

    #[error("design matrix is rank deficient (rank {rank} < {cols} columns)")]
    SingularDesign { rank: usize, cols: usize },

    #[error("degenerate design: regressor sum of squares is {0}")]
    DegenerateDesign(f64),

    #[error("degenerate split at t = {split}: each segment needs at least {min_obs} observations")]
    DegenerateSplit { split: usize, min_obs: usize },

    #[error("degenerate normalization: scale of the series is zero")]
    DegenerateNormalization,

    #[error("F statistic is infinite: unrestricted fit is perfect at t = {split}")]
    InfiniteF { split: usize },

    #[error("empty input")]
    EmptyInput,

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("replication {coords:?} failed: {source}")]
    Replication {
        coords: Vec<u64>,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::Parameter {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn at(self, coords: Vec<u64>) -> Self {
        Error::Replication {
            coords,
            source: Box::new(self),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
