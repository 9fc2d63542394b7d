use std::collections::BTreeMap;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::types::{CellKey, CellSummary, TrialRecord};
use super::ExperimentError;
use crate::behavior::{BlockOrder, EmpiricalCoefficients, InformationAccess, EMPIRICAL_TERMS};
use crate::game::{CongestionGame, Location};
use crate::rng;
use crate::signal::VisType;
use crate::solver::{fit_fixed_point_from_regression, EquilibriumResult, Method};
use crate::stats::{
    bootstrap_proportion, ground_truth_prob, logistic_fit, ols_fit, percentile_interval, BootstrapConfig, Design,
    LogisticOptions, RegressionFit, StatsError,
};

/// Regressors of the observed-proportion model.
pub const EQ3_TERMS: [&str; 3] = ["intercept", "hops", "visualized_proportion"];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnalysisConfig {
    pub bootstrap: BootstrapConfig,
    /// Participant resamples behind the equilibrium intervals.
    pub equilibrium_replications: u32,
    #[serde(skip)]
    pub game: CongestionGame,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        AnalysisConfig {
            bootstrap: BootstrapConfig::default(),
            equilibrium_replications: 200,
            game: CongestionGame::paper(),
        }
    }
}

/// Groups records into (visualization, access, signal) cells and bootstraps
/// the share choosing A in each. Every cell draws from its own stream.
pub fn summarize(records: &[TrialRecord], cfg: &BootstrapConfig) -> Result<Vec<CellSummary>, ExperimentError> {
    cfg.validate()?;
    if records.is_empty() {
        return Err(ExperimentError::NoData("no trial records".into()));
    }
    let mut cells: BTreeMap<CellKey, Vec<bool>> = BTreeMap::new();
    for r in records {
        cells.entry(r.cell()).or_default().push(r.chose_a());
    }
    cells
        .into_iter()
        .map(|(key, choices)| {
            let cell_cfg = BootstrapConfig { seed: rng::derive_seed(cfg.seed, &key.label(), 0), ..*cfg };
            let est = bootstrap_proportion(&choices, &cell_cfg)?;
            Ok(CellSummary {
                vis_type: key.vis_type,
                access: key.access,
                signal_prop: key.signal_prop(),
                proportion_a: est.estimate,
                ci_lo: est.lo.min(est.estimate),
                ci_hi: est.hi.max(est.estimate),
                n: choices.len(),
                replicates: est.replicates,
            })
        })
        .collect()
}

/// Observed share at A against the visualized proportion, over public cells
/// with a signal. A `hops` shift is included when both visualizations appear.
fn fit_eq3(points: &[(VisType, f64, f64)]) -> Result<RegressionFit, ExperimentError> {
    if points.is_empty() {
        return Err(ExperimentError::NoData("no public-access signal trials".into()));
    }
    let both = points.iter().any(|p| p.0 == VisType::Bar) && points.iter().any(|p| p.0 == VisType::Hops);
    let names: Vec<&str> = if both { EQ3_TERMS.to_vec() } else { vec![EQ3_TERMS[0], EQ3_TERMS[2]] };
    let mut design = Design::new(names);
    let mut y = Vec::with_capacity(points.len());
    for &(vis, signal, observed) in points {
        if both {
            design.push_row(&[1.0, f64::from(u8::from(vis == VisType::Hops)), signal]);
        } else {
            design.push_row(&[1.0, signal]);
        }
        y.push(observed);
    }
    ols_fit(&design, &y).map_err(fit_err("eq3"))
}

fn eq3_points(cells: &[CellSummary]) -> Vec<(VisType, f64, f64)> {
    cells
        .iter()
        .filter(|c| c.access == InformationAccess::Public)
        .filter_map(|c| c.signal_prop.map(|s| (c.vis_type, s, c.proportion_a)))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResponseFits {
    /// Absent when the data hold no public-access signal trials.
    pub eq3: Option<RegressionFit>,
    pub eq4: RegressionFit,
    pub eq5: RegressionFit,
}

struct TrialRow {
    x: [f64; 7],
    best_responded: bool,
    abs_error: f64,
}

fn trial_rows(records: &[TrialRecord], game: &CongestionGame, n: u64) -> Result<Vec<TrialRow>, ExperimentError> {
    let mut rows = Vec::new();
    for r in records {
        let Some(p) = r.signal_prop else { continue };
        let p = p.value();
        let Some(higher) = game.higher_location(p) else { continue };
        let x = EmpiricalCoefficients::regressors(
            r.vis_type == VisType::Hops,
            r.access == InformationAccess::Public,
            game.payoff_difference(p).abs(),
            higher == Location::B,
            r.block_order == BlockOrder::PrivateFirst,
        );
        let best_responded = r.choice == higher;
        let est_higher = if best_responded { r.prob_estimate } else { 100.0 - r.prob_estimate };
        let truth = 100.0 * ground_truth_prob(game, higher, p, n)?;
        rows.push(TrialRow { x, best_responded, abs_error: (est_higher - truth).abs() });
    }
    if rows.is_empty() {
        return Err(ExperimentError::NoData("no signal trials with a strictly better location".into()));
    }
    Ok(rows)
}

fn fit_err(model: &'static str) -> impl Fn(StatsError) -> ExperimentError {
    move |source| ExperimentError::Fit { model, source }
}

/// Fits the observed-proportion (OLS on cells), best-responded (logistic on
/// trials) and probability-error (OLS on trials) models.
pub fn fit_response_models(
    records: &[TrialRecord],
    cells: &[CellSummary],
    cfg: &AnalysisConfig,
) -> Result<ResponseFits, ExperimentError> {
    let points = eq3_points(cells);
    let eq3 = if points.is_empty() {
        log::warn!("no public-access signal trials: skipping the observed-proportion model");
        None
    } else {
        Some(fit_eq3(&points)?)
    };
    let rows = trial_rows(records, &cfg.game, u64::from(cfg.bootstrap.group_size))?;
    let full = Design::from_rows(EMPIRICAL_TERMS, &rows.iter().map(|r| r.x.to_vec()).collect::<Vec<_>>());
    let design = full.without_constant_columns(&["intercept"]);
    let best: Vec<f64> = rows.iter().map(|r| f64::from(u8::from(r.best_responded))).collect();
    let err: Vec<f64> = rows.iter().map(|r| r.abs_error).collect();
    let eq4 = logistic_fit(&design, &best, LogisticOptions::default()).map_err(fit_err("eq4"))?;
    let eq5 = ols_fit(&design, &err).map_err(fit_err("eq5"))?;
    Ok(ResponseFits { eq3, eq4, eq5 })
}

fn line_for(fit: &RegressionFit, vis: VisType) -> (f64, f64) {
    let shift = if vis == VisType::Hops { fit.coef("hops").unwrap_or(0.0) } else { 0.0 };
    (fit.coef("intercept").unwrap_or(0.0) + shift, fit.coef("visualized_proportion").unwrap_or(f64::NAN))
}

/// Where the fitted observed-proportion line crosses the identity, per
/// visualization, with a percentile interval from resampling participants.
pub fn estimate_vis_equilibrium(
    records: &[TrialRecord],
    eq3: &RegressionFit,
    cfg: &AnalysisConfig,
) -> Result<BTreeMap<VisType, EquilibriumResult>, ExperimentError> {
    let public: Vec<&TrialRecord> =
        records.iter().filter(|r| r.access == InformationAccess::Public && r.signal_prop.is_some()).collect();
    let vis_types: Vec<VisType> = VisType::ALL.into_iter().filter(|v| public.iter().any(|r| r.vis_type == *v)).collect();

    let mut ids: Vec<u32> = public.iter().map(|r| r.participant_id).collect();
    ids.sort_unstable();
    ids.dedup();
    let mut cell_index: BTreeMap<CellKey, usize> = BTreeMap::new();
    for r in &public {
        let next = cell_index.len();
        cell_index.entry(r.cell()).or_insert(next);
    }
    let cells: Vec<CellKey> = {
        let mut v = vec![None; cell_index.len()];
        for (k, &i) in &cell_index {
            v[i] = Some(*k);
        }
        v.into_iter().map(|k| k.expect("dense index")).collect()
    };
    let mut trials: Vec<Vec<(usize, bool)>> = vec![Vec::new(); ids.len()];
    for r in &public {
        let who = ids.binary_search(&r.participant_id).expect("collected above");
        trials[who].push((cell_index[&r.cell()], r.chose_a()));
    }

    let reps = cfg.equilibrium_replications;
    let draws: Vec<Vec<Option<f64>>> = (0..reps)
        .into_par_iter()
        .map(|rep| {
            let mut rng = rng::stream(cfg.bootstrap.seed, "equilibrium-bootstrap", u64::from(rep));
            let mut at_a = vec![0u64; cells.len()];
            let mut total = vec![0u64; cells.len()];
            for _ in 0..ids.len() {
                for &(c, a) in &trials[rng.random_range(0..ids.len())] {
                    total[c] += 1;
                    at_a[c] += u64::from(a);
                }
            }
            let points: Vec<(VisType, f64, f64)> = cells
                .iter()
                .enumerate()
                .filter(|&(c, _)| total[c] > 0)
                .map(|(c, k)| (k.vis_type, k.signal_prop().expect("signal trials"), at_a[c] as f64 / total[c] as f64))
                .collect();
            let fit = fit_eq3(&points).ok();
            vis_types
                .iter()
                .map(|&v| {
                    let fit = fit.as_ref()?;
                    let (a, b) = line_for(fit, v);
                    fit_fixed_point_from_regression(a, b).ok().map(|p| p.value())
                })
                .collect()
        })
        .collect();

    let mut out = BTreeMap::new();
    for (j, &vis) in vis_types.iter().enumerate() {
        let (a, b) = line_for(eq3, vis);
        let p = fit_fixed_point_from_regression(a, b)?.value();
        let boot: Vec<f64> = draws.iter().filter_map(|d| d[j]).collect();
        let ci = (!boot.is_empty()).then(|| {
            let (lo, hi) = percentile_interval(&boot, cfg.bootstrap.coverage);
            (lo.min(p), hi.max(p))
        });
        out.insert(
            vis,
            EquilibriumResult {
                p_star: p,
                residual: (a + b * p - p).abs(),
                method: Method::Regression,
                iterations: 0,
                ci,
                welfare: Some(cfg.game.social_welfare(p)),
                brackets: Vec::new(),
            },
        );
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumEstimate {
    pub p: f64,
    pub lo: Option<f64>,
    pub hi: Option<f64>,
}

impl From<&EquilibriumResult> for EquilibriumEstimate {
    fn from(r: &EquilibriumResult) -> Self {
        EquilibriumEstimate { p: r.p_star, lo: r.ci.map(|c| c.0), hi: r.ci.map(|c| c.1) }
    }
}

/// Everything the analysis produces, in export order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Analysis {
    pub cells: Vec<CellSummary>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eq3: Option<RegressionFit>,
    pub eq4: RegressionFit,
    pub eq5: RegressionFit,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub equilibria: BTreeMap<VisType, EquilibriumEstimate>,
}

pub fn analyze(records: &[TrialRecord], cfg: &AnalysisConfig) -> Result<Analysis, ExperimentError> {
    let cells = summarize(records, &cfg.bootstrap)?;
    let fits = fit_response_models(records, &cells, cfg)?;
    let equilibria = match &fits.eq3 {
        Some(eq3) => estimate_vis_equilibrium(records, eq3, cfg)?
            .iter()
            .map(|(v, r)| (*v, EquilibriumEstimate::from(r)))
            .collect(),
        None => BTreeMap::new(),
    };
    Ok(Analysis { cells, eq3: fits.eq3, eq4: fits.eq4, eq5: fits.eq5, equilibria })
}
