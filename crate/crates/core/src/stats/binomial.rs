//! Binomial probabilities computed in log space.

use statrs::function::gamma::ln_gamma;

use super::StatsError;
use crate::game::{CongestionGame, Location};

/// Largest `n` for which `C(n, k)` is formed exactly in integer arithmetic
/// before taking its logarithm.
const EXACT_CHOOSE_MAX_N: u64 = 100;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BinomialSpec {
    n: u64,
    p: f64,
}

impl BinomialSpec {
    pub fn new(n: u64, p: f64) -> Result<Self, StatsError> {
        if n == 0 || !(0.0..=1.0).contains(&p) {
            return Err(StatsError::InvalidBinomial { n, p });
        }
        Ok(BinomialSpec { n, p })
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn p(&self) -> f64 {
        self.p
    }
}

/// `ln C(n, k)`. Exact up to the final rounding for `n <= 100`, log-gamma based
/// beyond.
pub fn ln_choose(n: u64, k: u64) -> f64 {
    debug_assert!(k <= n);
    let k = k.min(n - k);
    if n <= EXACT_CHOOSE_MAX_N {
        let mut c: u128 = 1;
        for i in 0..k {
            c = c * u128::from(n - i) / u128::from(i + 1);
        }
        (c as f64).ln()
    } else {
        ln_gamma(n as f64 + 1.0) - ln_gamma(k as f64 + 1.0) - ln_gamma((n - k) as f64 + 1.0)
    }
}

fn ln_pmf_with(ln_c: f64, k: u64, n: u64, p: f64) -> f64 {
    if p == 0.0 {
        return if k == 0 { 0.0 } else { f64::NEG_INFINITY };
    }
    if p == 1.0 {
        return if k == n { 0.0 } else { f64::NEG_INFINITY };
    }
    ln_c + k as f64 * p.ln() + (n - k) as f64 * (-p).ln_1p()
}

pub fn binom_pmf(k: u64, spec: BinomialSpec) -> Result<f64, StatsError> {
    if k > spec.n {
        return Err(StatsError::KOutOfRange { k, n: spec.n });
    }
    Ok(ln_pmf_with(ln_choose(spec.n, k), k, spec.n, spec.p).exp())
}

/// `P(K <= k)`; exactly 1 at `k = n`.
pub fn binom_cdf(k: u64, spec: BinomialSpec) -> Result<f64, StatsError> {
    if k > spec.n {
        return Err(StatsError::KOutOfRange { k, n: spec.n });
    }
    if k == spec.n {
        return Ok(1.0);
    }
    let sum: f64 = (0..=k).map(|j| ln_pmf_with(ln_choose(spec.n, j), j, spec.n, spec.p).exp()).sum();
    Ok(sum.min(1.0))
}

/// Cached `ln C(n, k)` for all `k`, for repeatedly evaluating a full
/// probability vector at different `p`.
#[derive(Debug, Clone)]
pub struct BinomialTable {
    n: u64,
    ln_choose: Vec<f64>,
}

impl BinomialTable {
    pub fn new(n: u64) -> Self {
        BinomialTable { n, ln_choose: (0..=n).map(|k| ln_choose(n, k)).collect() }
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    /// `pmf(k)` for `k = 0..=n`.
    pub fn pmf(&self, p: f64) -> Vec<f64> {
        self.ln_choose
            .iter()
            .enumerate()
            .map(|(k, &c)| ln_pmf_with(c, k as u64, self.n, p).exp())
            .collect()
    }
}

/// Probability that `chosen` pays strictly more than the other location when
/// the other players' A-count is `K ~ Binomial(n, p_hat)` and the realized
/// proportion is `K / n`. Ties count one half.
pub fn ground_truth_prob(game: &CongestionGame, chosen: Location, p_hat: f64, n: u64) -> Result<f64, StatsError> {
    let spec = BinomialSpec::new(n, p_hat)?;
    let table = BinomialTable::new(spec.n);
    let (mut win, mut lose, mut tie) = (0.0, 0.0, 0.0);
    for (k, w) in table.pmf(spec.p).into_iter().enumerate() {
        let q = k as f64 / n as f64;
        let own = game.payoff(chosen, q);
        let other = game.payoff(chosen.other(), q);
        let scale = 1.0 + own.abs().max(other.abs());
        if (own - other).abs() <= 1e-12 * scale {
            tie += w;
        } else if own > other {
            win += w;
        } else {
            lose += w;
        }
    }
    // larger side as the complement of the smaller
    let total = if win > lose { 1.0 - (lose + 0.5 * tie) } else { win + 0.5 * tie };
    Ok(total.clamp(0.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Direct product-form binomial mass, independent of the log-space path.
    fn direct_pmf(k: u64, n: u64, p: f64) -> f64 {
        let mut c = 1.0f64;
        for i in 0..k {
            c = c * (n - i) as f64 / (i + 1) as f64;
        }
        c * p.powi(k as i32) * (1.0 - p).powi((n - k) as i32)
    }

    fn spec(n: u64, p: f64) -> BinomialSpec {
        BinomialSpec::new(n, p).unwrap()
    }

    #[test]
    fn pmf_at_zero_of_fair_coin() {
        let want = 2f64.powi(-30);
        assert!((binom_pmf(0, spec(30, 0.5)).unwrap() - want).abs() <= 1e-14 * want);
    }

    #[test]
    fn cdf_total_mass_is_exactly_one() {
        assert_eq!(binom_cdf(30, spec(30, 0.37)).unwrap(), 1.0);
    }

    #[test]
    fn cdf_matches_direct_summation() {
        let oracle: f64 = (0..=6).map(|k| direct_pmf(k, 30, 0.2)).sum();
        let got = binom_cdf(6, spec(30, 0.2)).unwrap();
        assert!((got - oracle).abs() <= 1e-14, "{got} vs {oracle}");
    }

    #[test]
    fn degenerate_probabilities() {
        assert_eq!(binom_pmf(0, spec(30, 0.0)).unwrap(), 1.0);
        assert_eq!(binom_pmf(3, spec(30, 0.0)).unwrap(), 0.0);
        assert_eq!(binom_pmf(30, spec(30, 1.0)).unwrap(), 1.0);
        assert_eq!(binom_cdf(29, spec(30, 1.0)).unwrap(), 0.0);
    }

    #[test]
    fn out_of_range() {
        assert_eq!(binom_pmf(31, spec(30, 0.5)), Err(StatsError::KOutOfRange { k: 31, n: 30 }));
        assert!(binom_cdf(31, spec(30, 0.5)).is_err());
        assert!(BinomialSpec::new(0, 0.5).is_err());
        assert!(BinomialSpec::new(3, 1.5).is_err());
    }

    #[test]
    fn large_n_uses_log_gamma_and_sums_to_one() {
        let t = BinomialTable::new(900);
        let total: f64 = t.pmf(0.3).iter().sum();
        assert!((total - 1.0).abs() < 1e-12);
        let mean: f64 = t.pmf(0.3).iter().enumerate().map(|(k, w)| k as f64 * w).sum();
        assert!((mean - 270.0).abs() < 1e-9);
    }

    #[test]
    fn ground_truth_examples() {
        let g = CongestionGame::paper();
        let oracle: f64 = (0..=6).map(|k| direct_pmf(k, 30, 0.1)).sum();
        assert!((ground_truth_prob(&g, Location::A, 0.1, 30).unwrap() - oracle).abs() < 1e-14);
        assert_eq!(ground_truth_prob(&g, Location::B, 1.0, 30).unwrap(), 1.0);
        assert_eq!(ground_truth_prob(&g, Location::A, 1.0, 30).unwrap(), 0.0);
    }

    #[test]
    fn ground_truth_splits_ties() {
        // n = 9: K = 2 lands exactly on the indifference point 2/9
        let g = CongestionGame::paper();
        let a = ground_truth_prob(&g, Location::A, 0.3, 9).unwrap();
        let b = ground_truth_prob(&g, Location::B, 0.3, 9).unwrap();
        let tie = direct_pmf(2, 9, 0.3);
        let a_wins: f64 = (0..2).map(|k| direct_pmf(k, 9, 0.3)).sum();
        assert!((a - (a_wins + 0.5 * tie)).abs() < 1e-14);
        assert!((a + b - 1.0).abs() < 1e-14);
    }

    proptest! {
        #[test]
        fn cdf_is_cumulative_pmf(n in 1u64..=100, p in 0.0..=1.0f64) {
            let s = spec(n, p);
            let mut acc = 0.0;
            let mut prev = 0.0;
            for k in 0..=n {
                acc += binom_pmf(k, s).unwrap();
                let c = binom_cdf(k, s).unwrap();
                prop_assert!((c - acc.min(1.0)).abs() <= 1e-12);
                prop_assert!(c >= prev);
                prev = c;
            }
        }

        #[test]
        fn pmf_matches_product_form(n in 1u64..=60, p in 0.01..0.99f64, kf in 0.0..1.0f64) {
            let k = (kf * n as f64).floor() as u64;
            let got = binom_pmf(k, spec(n, p)).unwrap();
            let want = direct_pmf(k, n, p);
            prop_assert!((got - want).abs() <= 1e-12 * want.max(1e-300) + 1e-300);
        }

        #[test]
        fn ground_truth_complementary_and_monotone(p in 0.0..0.99f64) {
            let g = CongestionGame::paper();
            let a = ground_truth_prob(&g, Location::A, p, 30).unwrap();
            let b = ground_truth_prob(&g, Location::B, p, 30).unwrap();
            prop_assert!((a + b - 1.0).abs() <= 1e-12);
            let a_next = ground_truth_prob(&g, Location::A, p + 0.01, 30).unwrap();
            prop_assert!(a_next <= a);
            prop_assert!(ground_truth_prob(&g, Location::B, p + 0.01, 30).unwrap() >= b);
        }
    }

    #[test]
    fn ground_truth_monotone_near_one() {
        let g = CongestionGame::paper();
        let v: Vec<f64> = (0..=100).map(|i| ground_truth_prob(&g, Location::B, i as f64 / 100.0, 30).unwrap()).collect();
        assert!(v.windows(2).all(|w| w[1] >= w[0]));
        assert_eq!(v[100], 1.0);
    }
}
