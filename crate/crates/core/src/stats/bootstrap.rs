//! Percentile bootstrap for proportions.

use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use super::StatsError;
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BootstrapConfig {
    /// Size of each resample.
    pub group_size: u32,
    pub replications: u32,
    pub coverage: f64,
    pub seed: u64,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        BootstrapConfig { group_size: 30, replications: 1000, coverage: 0.95, seed: 0 }
    }
}

impl BootstrapConfig {
    pub fn validate(&self) -> Result<(), StatsError> {
        if self.group_size == 0 {
            return Err(StatsError::InvalidConfig("group_size must be >= 1".into()));
        }
        if self.replications == 0 {
            return Err(StatsError::InvalidConfig("replications must be >= 1".into()));
        }
        if !(self.coverage > 0.0 && self.coverage < 1.0) {
            return Err(StatsError::InvalidConfig(format!("coverage {} must lie in (0, 1)", self.coverage)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BootstrapEstimate {
    /// Full-sample proportion.
    pub estimate: f64,
    pub lo: f64,
    pub hi: f64,
    /// Proportion of each resample, in draw order.
    pub replicates: Vec<f64>,
}

/// Linear-interpolation quantile of sorted data (Hyndman-Fan type 7).
pub fn percentile(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty());
    let h = (sorted.len() - 1) as f64 * q.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Central percentile interval of `values` at `coverage`.
pub fn percentile_interval(values: &[f64], coverage: f64) -> (f64, f64) {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let tail = (1.0 - coverage) / 2.0;
    (percentile(&sorted, tail), percentile(&sorted, 1.0 - tail))
}

/// Bootstraps the proportion of `true` values.
///
/// Resampling `group_size` items with replacement from a 0/1 sample is
/// distributed exactly as `Binomial(group_size, k / len)`, so each replicate
/// is drawn that way. The result therefore depends only on the sample's
/// proportion and the seed.
pub fn bootstrap_proportion(choices: &[bool], cfg: &BootstrapConfig) -> Result<BootstrapEstimate, StatsError> {
    cfg.validate()?;
    if choices.is_empty() {
        return Err(StatsError::EmptyInput);
    }
    let hits = choices.iter().filter(|&&c| c).count();
    let estimate = hits as f64 / choices.len() as f64;
    let resample = Binomial::new(u64::from(cfg.group_size), estimate).map_err(|_| StatsError::InvalidBinomial {
        n: u64::from(cfg.group_size),
        p: estimate,
    })?;
    let mut rng = rng::stream(cfg.seed, "bootstrap-proportion", 0);
    let size = f64::from(cfg.group_size);
    let replicates: Vec<f64> =
        (0..cfg.replications).map(|_| resample.sample(&mut rng) as f64 / size).collect();
    let (lo, hi) = percentile_interval(&replicates, cfg.coverage);
    Ok(BootstrapEstimate { estimate, lo, hi, replicates })
}
