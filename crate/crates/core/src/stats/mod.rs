//! Validation statistics: correlations and their comparison, interrater
//! reliability, two-group comparisons, power analysis and the model/prompt
//! selection rule.

pub mod corr;
pub mod dist;
pub mod icc;
pub mod power;
pub mod select;
pub mod ttest;

use thiserror::Error;

pub use corr::{
    corr_p_value, fisher_z_independent, pearson, steiger_z_dependent, CorrResult, ZTest,
};
pub use icc::{icc_2k, IccResult};
pub use power::{min_n_per_group, power_two_sample, PowerRequest, PowerResult, Tails};
pub use select::{select_models, CorrKey, Selection};
pub use ttest::{
    t_test_from_summary, t_test_pooled, Alternative, DCiMethod, GroupComparison, TTestOptions,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StatsError {
    #[error("zero variance")]
    ZeroVariance,
    #[error("misaligned inputs: {0}")]
    AlignmentError(String),
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("correlation of magnitude 1 cannot be Fisher-transformed")]
    DegenerateCorrelation,
    #[error("correlations do not form a positive semidefinite matrix")]
    InvalidCorrelationMatrix,
    #[error("rating matrix has missing or ragged cells")]
    IncompleteMatrix,
    #[error("ICC denominator is zero")]
    DegenerateAnova,
    #[error("target power not reached below n = {0} per group")]
    NotAttainable(u64),
    #[error("correlation table incomplete: {0}")]
    IncompleteTable(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub(crate) fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample (n - 1) standard deviation.
pub(crate) fn sample_sd(xs: &[f64]) -> f64 {
    let m = mean(xs);
    (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() as f64 - 1.0)).sqrt()
}
