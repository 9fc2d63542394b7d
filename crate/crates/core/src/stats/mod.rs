//! Numerical statistics used throughout the crate.

mod binomial;
mod bootstrap;
mod linalg;
mod regression;

pub use binomial::{binom_cdf, binom_pmf, ground_truth_prob, ln_choose, BinomialSpec, BinomialTable};
pub use bootstrap::{bootstrap_proportion, percentile, percentile_interval, BootstrapConfig, BootstrapEstimate};
pub use regression::{logistic_fit, ols_fit, Design, LogisticOptions, RegressionFit};

use thiserror::Error;

/// Numerically stable `1 / (1 + e^-z)`.
pub fn logistic(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `ln(p / (1 - p))`.
pub fn logit(p: f64) -> f64 {
    p.ln() - (-p).ln_1p()
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StatsError {
    #[error("invalid binomial parameters: n = {n}, p = {p}")]
    InvalidBinomial { n: u64, p: f64 },
    #[error("k = {k} is outside 0..={n}")]
    KOutOfRange { k: u64, n: u64 },
    #[error("empty input")]
    EmptyInput,
    #[error("invalid bootstrap configuration: {0}")]
    InvalidConfig(String),
    #[error("design matrix is rank deficient (column `{0}`)")]
    RankDeficient(String),
    #[error("design has {rows} rows but {cols} columns")]
    Underdetermined { rows: usize, cols: usize },
    #[error("response length {response} does not match design rows {rows}")]
    LengthMismatch { rows: usize, response: usize },
    #[error("responses must be 0 or 1 (row {0})")]
    NonBinaryResponse(usize),
    #[error("complete or quasi-complete separation: maximum-likelihood estimate does not exist")]
    Separation,
    #[error("IRLS did not converge in {0} iterations")]
    NotConverged(usize),
}
