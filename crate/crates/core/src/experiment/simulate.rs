use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;

use super::payoffs::{compute_private_payoff, compute_public_payoffs};
use super::types::{CellKey, ExperimentConfig, TrialRecord};
use super::ExperimentError;
use crate::behavior::{
    default_population, llo_weight, AgentModel, DecisionContext, InformationAccess, PopulationMixture, Reading,
};
use crate::game::{CongestionGame, Location, Proportion};
use crate::rng::{self, SimRng};
use crate::signal::{SignalScheme, VisType};
use crate::stats::ground_truth_prob;

/// Which population answers in each condition.
#[derive(Debug, Clone, PartialEq)]
pub struct PopulationPlan {
    no_info: PopulationMixture,
    conditions: BTreeMap<(InformationAccess, VisType), PopulationMixture>,
}

impl PopulationPlan {
    /// The strategy mixtures coded from the study's explanations.
    pub fn study_default() -> Self {
        let mut conditions = BTreeMap::new();
        for access in [InformationAccess::Private, InformationAccess::Public] {
            for vis in VisType::ALL {
                conditions.insert((access, vis), default_population(access, vis));
            }
        }
        PopulationPlan { no_info: default_population(InformationAccess::NoInfo, VisType::Bar), conditions }
    }

    /// `pop` answers every signal trial; no-information trials keep the
    /// default no-information mixture.
    pub fn uniform(pop: PopulationMixture) -> Self {
        let mut plan = PopulationPlan::study_default();
        for v in plan.conditions.values_mut() {
            *v = pop.clone();
        }
        plan
    }

    pub fn with(mut self, access: InformationAccess, vis: VisType, pop: PopulationMixture) -> Self {
        match access {
            InformationAccess::NoInfo => self.no_info = pop,
            _ => {
                self.conditions.insert((access, vis), pop);
            }
        }
        self
    }

    pub fn get(&self, access: InformationAccess, vis: VisType) -> &PopulationMixture {
        match access {
            InformationAccess::NoInfo => &self.no_info,
            _ => &self.conditions[&(access, vis)],
        }
    }
}

/// Everything besides the experiment design that shapes simulated data.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulationSetup {
    pub game: CongestionGame,
    pub populations: PopulationPlan,
    pub bar_scheme: SignalScheme,
    pub hops_scheme: SignalScheme,
}

impl SimulationSetup {
    pub fn new(game: CongestionGame, populations: PopulationPlan) -> Self {
        SimulationSetup {
            game,
            populations,
            bar_scheme: VisType::Bar.default_scheme(),
            hops_scheme: VisType::Hops.default_scheme(),
        }
    }

    pub fn scheme(&self, vis: VisType) -> &SignalScheme {
        match vis {
            VisType::Bar => &self.bar_scheme,
            VisType::Hops => &self.hops_scheme,
        }
    }
}

fn draw_component<'a>(pop: &'a PopulationMixture, rng: &mut SimRng) -> &'a AgentModel {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (model, w) in pop.components() {
        acc += w;
        if u < acc {
            return model;
        }
    }
    &pop.components().last().expect("mixtures are nonempty").0
}

fn choose(prob_a: f64, rng: &mut SimRng) -> Location {
    if rng.random::<f64>() < prob_a {
        Location::A
    } else {
        Location::B
    }
}

fn participant(cfg: &ExperimentConfig, setup: &SimulationSetup, id: u32) -> Result<Vec<TrialRecord>, ExperimentError> {
    let mut rng = rng::stream(cfg.seed, "participant", u64::from(id));
    let mut pay_rng = rng::stream(cfg.seed, "private-payoff", u64::from(id));
    let v = cfg.vis_types.len() as u32;
    let vis = cfg.vis_types[(id % v) as usize];
    let order = cfg.block_orders[((id / v) as usize) % cfg.block_orders.len()];
    let scheme = setup.scheme(vis);
    let game = &setup.game;
    let report = |conf: f64| (100.0 * llo_weight(conf, cfg.llo_gamma, cfg.llo_delta)).round();

    let mut out = Vec::with_capacity(cfg.trials_per_participant());
    let mut trial_index = 0u32;
    for access in order.blocks() {
        let base = TrialRecord {
            participant_id: id,
            vis_type: vis,
            access,
            block_order: order,
            trial_index,
            signal_prop: None,
            choice: Location::A,
            prob_estimate: 50.0,
            payoff: None,
            strategy_text: None,
            passed_checks: None,
        };

        let no_info_ctx = DecisionContext { access: InformationAccess::NoInfo, block_order: order };
        let agent = draw_component(setup.populations.get(InformationAccess::NoInfo, vis), &mut rng);
        let prob = agent.respond(game, None, no_info_ctx)?;
        out.push(TrialRecord { choice: choose(prob, &mut rng), prob_estimate: report(0.5), ..base.clone() });
        trial_index += 1;

        let ctx = DecisionContext { access, block_order: order };
        let agent = draw_component(setup.populations.get(access, vis), &mut rng);
        let mut signals = cfg.signals.clone();
        signals.shuffle(&mut rng);
        for p in signals {
            let p_hat = Proportion::new(p)?;
            let signal = scheme.render(p_hat, &mut rng).map_err(crate::behavior::BehaviorError::from)?;
            let reading = Reading::from(&signal);
            let choice = choose(agent.respond(game, Some(reading), ctx)?, &mut rng);
            let confidence = ground_truth_prob(game, choice, reading.shown, u64::from(cfg.group_size))?;
            let mut rec = TrialRecord {
                trial_index,
                signal_prop: Some(p_hat),
                choice,
                prob_estimate: report(confidence),
                ..base.clone()
            };
            if access == InformationAccess::Private {
                rec.payoff = Some(compute_private_payoff(game, &rec, cfg.group_size, &mut pay_rng)?);
            }
            out.push(rec);
            trial_index += 1;
        }
    }
    Ok(out)
}

/// Simulates the full experiment. Participants run in parallel on their own
/// random streams, so the output depends only on `cfg.seed`.
pub fn simulate_experiment(cfg: &ExperimentConfig, setup: &SimulationSetup) -> Result<Vec<TrialRecord>, ExperimentError> {
    cfg.validate()?;
    for vis in &cfg.vis_types {
        setup.scheme(*vis).validate().map_err(crate::behavior::BehaviorError::from)?;
    }
    let per_participant: Vec<Vec<TrialRecord>> =
        (0..cfg.participants).into_par_iter().map(|id| participant(cfg, setup, id)).collect::<Result<_, _>>()?;
    let mut records: Vec<TrialRecord> = per_participant.into_iter().flatten().collect();

    let mut cells: BTreeMap<CellKey, Vec<usize>> = BTreeMap::new();
    for (i, r) in records.iter().enumerate() {
        if r.access == InformationAccess::Public {
            cells.entry(r.cell()).or_default().push(i);
        }
    }
    let n = cfg.group_size as usize;
    for (key, idx) in cells {
        if idx.len() < n {
            log::warn!("cell {} has {} records, fewer than a group of {n}; payoffs left empty", key.label(), idx.len());
            continue;
        }
        let mut cell: Vec<TrialRecord> = idx.iter().map(|&i| records[i].clone()).collect();
        let mut rng = rng::stream(cfg.seed, &format!("public-payoffs/{}", key.label()), 0);
        compute_public_payoffs(&setup.game, &mut cell, n, &mut rng)?;
        for (&i, r) in idx.iter().zip(cell) {
            records[i].payoff = r.payoff;
        }
    }
    Ok(records)
}
