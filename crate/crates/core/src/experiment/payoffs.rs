use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;
use rand_distr::{Binomial, Distribution};

use super::{ExperimentError, TrialRecord};
use crate::game::{CongestionGame, Location};

/// Payoff of a private-access trial: the other `n - 1` players are drawn from
/// `Binomial(n - 1, signal)` and the participant is the `n`-th.
pub fn compute_private_payoff<R: Rng + ?Sized>(
    game: &CongestionGame,
    record: &TrialRecord,
    n: u32,
    rng: &mut R,
) -> Result<f64, ExperimentError> {
    let p = record.signal_prop.ok_or(ExperimentError::MissingSignal {
        participant: record.participant_id,
        trial: record.trial_index,
    })?;
    if n == 0 {
        return Err(ExperimentError::InvalidConfig("group size must be >= 1".into()));
    }
    let others = Binomial::new(u64::from(n - 1), p.value()).expect("valid binomial").sample(rng);
    let at_a = others + u64::from(record.choice == Location::A);
    Ok(game.payoff(record.choice, at_a as f64 / f64::from(n)))
}

/// Assigns public-access payoffs within one cell: records are shuffled and cut
/// into groups of `n`; a short final group is topped up with records drawn
/// from the rest of the cell. Each member is paid at their group's realized
/// proportion.
pub fn compute_public_payoffs<R: Rng + ?Sized>(
    game: &CongestionGame,
    records: &mut [TrialRecord],
    n: usize,
    rng: &mut R,
) -> Result<(), ExperimentError> {
    if n == 0 {
        return Err(ExperimentError::InvalidConfig("group size must be >= 1".into()));
    }
    if records.len() < n {
        return Err(ExperimentError::CellTooSmall { size: records.len(), needed: n });
    }
    let mut order: Vec<usize> = (0..records.len()).collect();
    order.shuffle(rng);
    for group in order.chunks(n) {
        let mut at_a = group.iter().filter(|&&i| records[i].choice == Location::A).count();
        if group.len() < n {
            let outside: Vec<usize> = order[..order.len() - group.len()].to_vec();
            for _ in group.len()..n {
                let &j = outside.choose(rng).expect("cell holds at least n records");
                at_a += usize::from(records[j].choice == Location::A);
            }
        }
        let q = at_a as f64 / n as f64;
        for &i in group {
            records[i].payoff = Some(game.payoff(records[i].choice, q));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::behavior::{BlockOrder, InformationAccess};
    use crate::game::Proportion;
    use crate::rng;
    use crate::signal::VisType;

    fn record(id: u32, choice: Location, signal: Option<f64>) -> TrialRecord {
        TrialRecord {
            participant_id: id,
            vis_type: VisType::Bar,
            access: InformationAccess::Public,
            block_order: BlockOrder::PublicFirst,
            trial_index: 1,
            signal_prop: signal.map(|p| Proportion::new(p).unwrap()),
            choice,
            prob_estimate: 50.0,
            payoff: None,
            strategy_text: None,
            passed_checks: None,
        }
    }

    #[test]
    fn private_degenerate_draws() {
        let g = CongestionGame::paper();
        let mut r = rng::stream(1, "t", 0);
        assert_eq!(compute_private_payoff(&g, &record(0, Location::A, Some(0.0)), 30, &mut r).unwrap(), 39.0);
        assert_eq!(compute_private_payoff(&g, &record(0, Location::B, Some(0.0)), 30, &mut r).unwrap(), 20.0);
        assert!(matches!(
            compute_private_payoff(&g, &record(0, Location::A, None), 30, &mut r),
            Err(ExperimentError::MissingSignal { .. })
        ));
    }

    #[test]
    fn private_matches_seeded_redraw() {
        let g = CongestionGame::paper();
        let got = compute_private_payoff(&g, &record(0, Location::A, Some(0.5)), 30, &mut rng::stream(3, "t", 0)).unwrap();
        let k = Binomial::new(29, 0.5).unwrap().sample(&mut rng::stream(3, "t", 0));
        assert_eq!(got, 40.0 - k as f64 - 1.0);
    }

    #[test]
    fn public_uniform_groups() {
        let g = CongestionGame::paper();
        let mut all_a: Vec<_> = (0..30).map(|i| record(i, Location::A, Some(0.2))).collect();
        compute_public_payoffs(&g, &mut all_a, 30, &mut rng::stream(0, "t", 0)).unwrap();
        assert!(all_a.iter().all(|r| r.payoff == Some(10.0)));
        let mut all_b: Vec<_> = (0..30).map(|i| record(i, Location::B, Some(0.2))).collect();
        compute_public_payoffs(&g, &mut all_b, 30, &mut rng::stream(0, "t", 0)).unwrap();
        assert!(all_b.iter().all(|r| r.payoff == Some(20.0)));
        let mut few: Vec<_> = (0..5).map(|i| record(i, Location::B, None)).collect();
        assert!(matches!(
            compute_public_payoffs(&g, &mut few, 30, &mut rng::stream(0, "t", 0)),
            Err(ExperimentError::CellTooSmall { size: 5, needed: 30 })
        ));
    }

    #[test]
    fn public_groups_are_reproducible_and_consistent() {
        let g = CongestionGame::paper();
        let make = || -> Vec<TrialRecord> {
            (0..73).map(|i| record(i, if i % 3 == 0 { Location::A } else { Location::B }, Some(0.3))).collect()
        };
        let mut a = make();
        let mut b = make();
        compute_public_payoffs(&g, &mut a, 30, &mut rng::stream(8, "t", 0)).unwrap();
        compute_public_payoffs(&g, &mut b, 30, &mut rng::stream(8, "t", 0)).unwrap();
        assert_eq!(a, b);
        // every payoff corresponds to some realized proportion k/30
        for r in &a {
            let pay = r.payoff.unwrap();
            let q = match r.choice {
                Location::A => (40.0 - pay) / 30.0,
                Location::B => (pay - 20.0) / 60.0,
            };
            let k = q * 30.0;
            assert!((k - k.round()).abs() < 1e-9, "{pay}");
        }
    }
}
