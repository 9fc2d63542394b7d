//! Fixed points of response maps `S: [0, 1] -> [0, 1]`.
//!
//! A response map sends a predicted proportion to the share of the population
//! that chooses A after seeing that prediction displayed. A visualization
//! equilibrium is any `p*` with `S(p*) = p*`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::behavior::{
    aggregate_response, expected_response, BehaviorError, DecisionContext, MonteCarloConfig, PopulationMixture, Reading,
};
use crate::game::{CongestionGame, GameError, Proportion};
use crate::rng::{self, SimRng};
use crate::signal::SignalScheme;
use crate::stats::BinomialTable;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("invalid solver parameter: {0}")]
    InvalidParameter(String),
    #[error("no convergence after {iterations} iterations (best p = {:.6}, residual {:.3e})", best.p_star, best.residual)]
    MaxIterExceeded { iterations: usize, best: Box<EquilibriumResult> },
    #[error("slope {0} is too close to 1: the fitted line never crosses the identity")]
    DegenerateSlope(f64),
    #[error("fitted fixed point {0} lies outside [0, 1]")]
    OutsideUnitInterval(f64),
    #[error("response map returned {value} at p = {p}")]
    MapOutOfRange { p: f64, value: f64 },
    #[error(transparent)]
    Behavior(#[from] BehaviorError),
    #[error(transparent)]
    Game(#[from] GameError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    GridScan,
    Bisection,
    DampedIteration,
    RobbinsMonro,
    Regression,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::GridScan => "grid_scan",
            Method::Bisection => "bisection",
            Method::DampedIteration => "damped_iteration",
            Method::RobbinsMonro => "robbins_monro",
            Method::Regression => "regression",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumResult {
    pub p_star: f64,
    /// `|S(p*) - p*|` under the deterministic evaluation of the map.
    pub residual: f64,
    pub method: Method,
    pub iterations: usize,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub ci: Option<(f64, f64)>,
    /// Social welfare at `p*` when the map knows its game.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub welfare: Option<f64>,
    /// Grid intervals on which `S(p) - p` changes sign (grid scan only).
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub brackets: Vec<(f64, f64)>,
}

/// `p -> (mean response, standard error)`.
pub trait ResponseMap: Sync {
    fn evaluate(&self, p: f64) -> Result<(f64, f64), SolverError>;

    /// One noisy realization of the response; defaults to the mean.
    fn sample(&self, p: f64, _rng: &mut SimRng) -> Result<f64, SolverError> {
        Ok(self.evaluate(p)?.0)
    }

    fn game(&self) -> Option<&CongestionGame> {
        None
    }
}

type MeanFn = dyn Fn(f64) -> f64 + Send + Sync;
type NoiseFn = dyn Fn(f64, &mut SimRng) -> f64 + Send + Sync;

/// A response map given by closures, mainly for tests and analytic maps.
pub struct FnMap {
    mean: Box<MeanFn>,
    noise: Option<Box<NoiseFn>>,
}

impl FnMap {
    pub fn new(mean: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        FnMap { mean: Box::new(mean), noise: None }
    }

    /// `sample` calls `noisy`; `evaluate` still returns `mean`.
    pub fn with_noise(
        mean: impl Fn(f64) -> f64 + Send + Sync + 'static,
        noisy: impl Fn(f64, &mut SimRng) -> f64 + Send + Sync + 'static,
    ) -> Self {
        FnMap { mean: Box::new(mean), noise: Some(Box::new(noisy)) }
    }
}

impl ResponseMap for FnMap {
    fn evaluate(&self, p: f64) -> Result<(f64, f64), SolverError> {
        Ok(((self.mean)(p), 0.0))
    }

    fn sample(&self, p: f64, rng: &mut SimRng) -> Result<f64, SolverError> {
        Ok(match &self.noise {
            Some(f) => f(p, rng),
            None => (self.mean)(p),
        })
    }
}

/// How a [`ModelResponseMap`] averages over stochastic displays.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Evaluation {
    /// Exact expectation over the displayed-proportion distribution.
    Expected,
    MonteCarlo(MonteCarloConfig),
}

/// `STRAT(VIS(p))` for a population, game, display scheme and access condition.
#[derive(Debug, Clone)]
pub struct ModelResponseMap {
    population: PopulationMixture,
    game: CongestionGame,
    scheme: SignalScheme,
    ctx: DecisionContext,
    evaluation: Evaluation,
    table: Option<BinomialTable>,
}

impl ModelResponseMap {
    pub fn new(
        population: PopulationMixture,
        game: CongestionGame,
        scheme: SignalScheme,
        ctx: impl Into<DecisionContext>,
        evaluation: Evaluation,
    ) -> Result<Self, SolverError> {
        scheme.validate().map_err(BehaviorError::from)?;
        let table = scheme.is_stochastic().then(|| BinomialTable::new(scheme.outcome_trials()));
        Ok(ModelResponseMap { population, game, scheme, ctx: ctx.into(), evaluation, table })
    }

    pub fn scheme(&self) -> &SignalScheme {
        &self.scheme
    }

    pub fn population(&self) -> &PopulationMixture {
        &self.population
    }
}

impl ResponseMap for ModelResponseMap {
    fn evaluate(&self, p: f64) -> Result<(f64, f64), SolverError> {
        let p_hat = Proportion::new(p)?;
        Ok(match self.evaluation {
            Evaluation::Expected => (
                expected_response(&self.population, &self.game, &self.scheme, p_hat, self.ctx, self.table.as_ref())?,
                0.0,
            ),
            Evaluation::MonteCarlo(mc) => {
                aggregate_response(&self.population, &self.game, &self.scheme, p_hat, self.ctx, mc)?
            }
        })
    }

    /// Population response to a single rendered display.
    fn sample(&self, p: f64, rng: &mut SimRng) -> Result<f64, SolverError> {
        let signal = self.scheme.render(Proportion::new(p)?, rng).map_err(BehaviorError::from)?;
        Ok(self.population.respond(&self.game, Some(Reading::from(&signal)), self.ctx)?)
    }

    fn game(&self) -> Option<&CongestionGame> {
        Some(&self.game)
    }
}

fn checked(map: &dyn ResponseMap, p: f64) -> Result<f64, SolverError> {
    let (v, _) = map.evaluate(p)?;
    if !(0.0..=1.0).contains(&v) {
        return Err(SolverError::MapOutOfRange { p, value: v });
    }
    Ok(v)
}

fn finish(map: &dyn ResponseMap, p: f64, method: Method, iterations: usize) -> Result<EquilibriumResult, SolverError> {
    let residual = (checked(map, p)? - p).abs();
    Ok(EquilibriumResult {
        p_star: p,
        residual,
        method,
        iterations,
        ci: None,
        welfare: map.game().map(|g| g.social_welfare(p)),
        brackets: Vec::new(),
    })
}

/// Evaluates `S` on `{0, resolution, ..., 1}` in parallel and returns the grid
/// point with the smallest `|S(p) - p|`, preferring the smallest `p` on ties.
pub fn grid_scan(map: &dyn ResponseMap, resolution: f64) -> Result<EquilibriumResult, SolverError> {
    if !(resolution > 0.0 && resolution <= 0.1) {
        return Err(SolverError::InvalidParameter(format!("resolution {resolution} must lie in (0, 0.1]")));
    }
    let steps = (1.0 / resolution - 1e-9).ceil() as usize;
    let grid: Vec<f64> = (0..=steps).map(|i| (i as f64 * resolution).min(1.0)).collect();
    let gaps: Vec<f64> =
        grid.par_iter().map(|&p| checked(map, p).map(|s| s - p)).collect::<Result<_, _>>()?;

    let mut best = 0;
    for (i, g) in gaps.iter().enumerate() {
        if g.abs() < gaps[best].abs() {
            best = i;
        }
    }
    let brackets = gaps
        .windows(2)
        .enumerate()
        .filter(|(_, w)| w[0] > 0.0 && w[1] <= 0.0 || w[0] < 0.0 && w[1] >= 0.0)
        .map(|(i, _)| (grid[i], grid[i + 1]))
        .collect();
    let mut out = finish(map, grid[best], Method::GridScan, grid.len())?;
    out.brackets = brackets;
    Ok(out)
}

/// Halves a sign-change bracket of `g(p) = S(p) - p` until it is no wider
/// than `tol`. A map that jumps across the bracket leaves a large residual.
pub fn bisection(map: &dyn ResponseMap, tol: f64, max_iter: usize) -> Result<EquilibriumResult, SolverError> {
    if tol.is_nan() || tol <= 0.0 {
        return Err(SolverError::InvalidParameter(format!("tol {tol} must be positive")));
    }
    let g = |p: f64| checked(map, p).map(|s| s - p);
    if g(0.0)? <= 0.0 {
        return finish(map, 0.0, Method::Bisection, 1);
    }
    if g(1.0)? >= 0.0 {
        return finish(map, 1.0, Method::Bisection, 2);
    }
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for it in 1..=max_iter {
        let mid = 0.5 * (lo + hi);
        let gm = g(mid)?;
        if gm == 0.0 {
            return finish(map, mid, Method::Bisection, it);
        }
        if gm > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= tol {
            return finish(map, 0.5 * (lo + hi), Method::Bisection, it);
        }
    }
    Err(SolverError::MaxIterExceeded {
        iterations: max_iter,
        best: Box::new(finish(map, 0.5 * (lo + hi), Method::Bisection, max_iter)?),
    })
}

/// Iterates `p <- (1 - alpha) p + alpha S(p)` from `p0` until a step is no
/// larger than `tol`.
pub fn damped_iteration(
    map: &dyn ResponseMap,
    alpha: f64,
    tol: f64,
    max_iter: usize,
    p0: f64,
) -> Result<EquilibriumResult, SolverError> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(SolverError::InvalidParameter(format!("damping {alpha} must lie in (0, 1]")));
    }
    if tol.is_nan() || tol <= 0.0 {
        return Err(SolverError::InvalidParameter(format!("tol {tol} must be positive")));
    }
    let mut p = Proportion::new(p0)?.value();
    let mut best = (f64::INFINITY, p);
    for it in 1..=max_iter {
        let s = checked(map, p)?;
        if (s - p).abs() < best.0 {
            best = ((s - p).abs(), p);
        }
        let next = (1.0 - alpha) * p + alpha * s;
        if (next - p).abs() <= tol {
            return finish(map, next, Method::DampedIteration, it);
        }
        p = next;
    }
    Err(SolverError::MaxIterExceeded {
        iterations: max_iter,
        best: Box::new(finish(map, best.1, Method::DampedIteration, max_iter)?),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RobbinsMonroConfig {
    pub a0: f64,
    pub t0: f64,
    pub iterations: usize,
    pub seed: u64,
    pub p0: f64,
}

impl Default for RobbinsMonroConfig {
    fn default() -> Self {
        RobbinsMonroConfig { a0: 1.0, t0: 10.0, iterations: 100_000, seed: 0, p0: 0.5 }
    }
}

const RM_BATCHES: usize = 20;

/// Stochastic approximation `p <- clamp(p + a_t (S_hat(p) - p))` with
/// `a_t = a0 / (t + t0)` and single noisy draws `S_hat`. Returns the average
/// of the last half of the iterates, with a 95% batch-means interval.
pub fn robbins_monro(map: &dyn ResponseMap, cfg: RobbinsMonroConfig) -> Result<EquilibriumResult, SolverError> {
    if !(cfg.a0 > 0.0 && cfg.a0.is_finite()) {
        return Err(SolverError::InvalidParameter(format!("a0 {} must be positive", cfg.a0)));
    }
    if !(cfg.t0 >= 1.0 && cfg.t0.is_finite()) {
        return Err(SolverError::InvalidParameter(format!("t0 {} must be >= 1", cfg.t0)));
    }
    if cfg.iterations < 2 * RM_BATCHES {
        return Err(SolverError::InvalidParameter(format!("need at least {} iterations", 2 * RM_BATCHES)));
    }
    let mut rng = rng::stream(cfg.seed, "robbins-monro", 0);
    let mut p = Proportion::new(cfg.p0)?.value();
    let tail_start = cfg.iterations - cfg.iterations / 2;
    let mut tail = Vec::with_capacity(cfg.iterations / 2);
    for t in 0..cfg.iterations {
        let s = map.sample(p, &mut rng)?;
        let a = cfg.a0 / (t as f64 + cfg.t0);
        p = (p + a * (s - p)).clamp(0.0, 1.0);
        if t >= tail_start {
            tail.push(p);
        }
    }
    let batch = tail.len() / RM_BATCHES;
    let used = &tail[tail.len() - batch * RM_BATCHES..];
    let p_star = used.iter().sum::<f64>() / used.len() as f64;
    let means: Vec<f64> = used.chunks(batch).map(|c| c.iter().sum::<f64>() / batch as f64).collect();
    let var = means.iter().map(|m| (m - p_star).powi(2)).sum::<f64>() / (RM_BATCHES - 1) as f64;
    let half = 1.96 * (var / RM_BATCHES as f64).sqrt();
    let mut out = finish(map, p_star, Method::RobbinsMonro, cfg.iterations)?;
    out.ci = Some(((p_star - half).max(0.0), (p_star + half).min(1.0)));
    Ok(out)
}

/// Where the fitted line `a + b p` crosses the identity: `a / (1 - b)`.
pub fn fit_fixed_point_from_regression(intercept: f64, slope: f64) -> Result<Proportion, SolverError> {
    if (1.0 - slope).abs() < 1e-9 {
        return Err(SolverError::DegenerateSlope(slope));
    }
    let p = intercept / (1.0 - slope);
    Proportion::new(p).map_err(|_| SolverError::OutsideUnitInterval(p))
}

/// Welfare of an equilibrium next to the Nash equilibrium and the optimum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumReport {
    pub p_star: f64,
    pub welfare_star: f64,
    pub p_nash: f64,
    pub welfare_nash: f64,
    pub p_opt: f64,
    pub welfare_opt: f64,
    pub welfare_gain_over_nash: f64,
}

pub fn equilibrium_report(game: &CongestionGame, p_star: f64) -> Result<EquilibriumReport, SolverError> {
    let p_nash = game.nash_proportion()?.value();
    let opt = game.welfare_optimum()?;
    let welfare_star = game.social_welfare(p_star);
    let welfare_nash = game.social_welfare(p_nash);
    Ok(EquilibriumReport {
        p_star,
        welfare_star,
        p_nash,
        welfare_nash,
        p_opt: opt.proportion.value(),
        welfare_opt: opt.welfare,
        welfare_gain_over_nash: welfare_star - welfare_nash,
    })
}
