//! Behavioral agents: how a display turns into a probability of choosing A.
//!
//! Every model maps `(game, what was shown, decision context)` to `P(A)`.
//! Models only ever read the *summary proportion* of a display plus whether it
//! was animated, so the exact expected response over a stochastic scheme is a
//! finite sum over the scheme's [`Outcome`](crate::signal::Outcome)s.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::game::{CongestionGame, Proportion, TIE_EPSILON};
use crate::rng;
use crate::signal::{Signal, SignalError, SignalScheme, VisType};
use crate::stats::{logistic, logit, BinomialTable};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BehaviorError {
    #[error("model reads the display but no signal is available (no-information trial)")]
    SignalRequired,
    #[error("LLO reporter only distorts probability reports; it does not choose a location")]
    ReportOnly,
    #[error("invalid model parameter: {0}")]
    InvalidParameter(String),
    #[error("invalid population mixture: {0}")]
    InvalidMixture(String),
    #[error(transparent)]
    Signal(#[from] SignalError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InformationAccess {
    NoInfo,
    Private,
    Public,
}

impl InformationAccess {
    pub fn as_str(self) -> &'static str {
        match self {
            InformationAccess::NoInfo => "no_info",
            InformationAccess::Private => "private",
            InformationAccess::Public => "public",
        }
    }
}

/// Which access block a participant saw first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum BlockOrder {
    #[default]
    PublicFirst,
    PrivateFirst,
}

impl BlockOrder {
    pub const ALL: [BlockOrder; 2] = [BlockOrder::PublicFirst, BlockOrder::PrivateFirst];

    pub fn as_str(self) -> &'static str {
        match self {
            BlockOrder::PublicFirst => "public_first",
            BlockOrder::PrivateFirst => "private_first",
        }
    }

    /// Access conditions in presentation order.
    pub fn blocks(self) -> [InformationAccess; 2] {
        match self {
            BlockOrder::PublicFirst => [InformationAccess::Public, InformationAccess::Private],
            BlockOrder::PrivateFirst => [InformationAccess::Private, InformationAccess::Public],
        }
    }
}

/// Everything about a decision other than the display itself.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DecisionContext {
    pub access: InformationAccess,
    pub block_order: BlockOrder,
}

impl From<InformationAccess> for DecisionContext {
    fn from(access: InformationAccess) -> Self {
        DecisionContext { access, block_order: BlockOrder::default() }
    }
}

/// The part of a display that models respond to.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Reading {
    pub shown: f64,
    pub animated: bool,
}

impl From<&Signal> for Reading {
    fn from(s: &Signal) -> Self {
        Reading { shown: s.expected_proportion(), animated: s.is_animated() }
    }
}

/// Log-odds of choosing the displayed higher-payoff location, as a linear
/// function of the condition dummies and the absolute payoff difference.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EmpiricalCoefficients {
    pub intercept: f64,
    pub hops: f64,
    pub public: f64,
    pub hops_public_interaction: f64,
    /// Per point of `|U_A - U_B|` at the displayed proportion.
    pub abs_payoff_diff: f64,
    pub b_is_higher: f64,
    pub block_order: f64,
}

/// Regressor names, in the order of [`EmpiricalCoefficients::as_array`].
pub const EMPIRICAL_TERMS: [&str; 7] =
    ["intercept", "hops", "public", "hops_x_public", "abs_payoff_diff", "b_is_higher", "block_order"];

impl Default for EmpiricalCoefficients {
    /// Fixed-effect estimates reported for the study; the block-order value
    /// was not reported and defaults to 0.
    fn default() -> Self {
        EmpiricalCoefficients {
            intercept: 0.41,
            hops: -0.33,
            public: -0.41,
            hops_public_interaction: 0.12,
            abs_payoff_diff: 0.02,
            b_is_higher: 0.76,
            block_order: 0.0,
        }
    }
}

impl EmpiricalCoefficients {
    pub fn as_array(&self) -> [f64; 7] {
        [
            self.intercept,
            self.hops,
            self.public,
            self.hops_public_interaction,
            self.abs_payoff_diff,
            self.b_is_higher,
            self.block_order,
        ]
    }

    /// Regressor row matching [`EMPIRICAL_TERMS`].
    pub fn regressors(hops: bool, public: bool, abs_diff: f64, b_higher: bool, private_first: bool) -> [f64; 7] {
        let (h, p) = (f64::from(u8::from(hops)), f64::from(u8::from(public)));
        [1.0, h, p, h * p, abs_diff, f64::from(u8::from(b_higher)), f64::from(u8::from(private_first))]
    }

    pub fn linear_predictor(&self, x: &[f64; 7]) -> f64 {
        self.as_array().iter().zip(x).map(|(b, x)| b * x).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum AgentModel {
    /// Picks the location the display implies is better.
    BestResponder,
    RandomChooser,
    /// Ignores the display and best responds to a fixed belief about `p`.
    PayoffPrior { prior_belief: f64 },
    /// `P(A) = logistic(rationality * (U_A - U_B))` at the displayed proportion.
    LogitResponder { rationality: f64 },
    /// Level 0 is `base`; level `k` best responds to a population of level `k - 1`.
    LevelK { level: u32, base: Box<AgentModel> },
    EmpiricalLogistic(EmpiricalCoefficients),
    /// Distorts probability reports; not a choice model.
    LloReporter { gamma: f64, delta: f64 },
}

fn step(diff: f64) -> f64 {
    if diff.abs() <= TIE_EPSILON {
        0.5
    } else if diff > 0.0 {
        1.0
    } else {
        0.0
    }
}

impl AgentModel {
    pub fn level_k(level: u32, base: AgentModel) -> Self {
        AgentModel::LevelK { level, base: Box::new(base) }
    }

    pub fn validate(&self) -> Result<(), BehaviorError> {
        let bad = |msg: String| Err(BehaviorError::InvalidParameter(msg));
        match self {
            AgentModel::PayoffPrior { prior_belief } if !(0.0..=1.0).contains(prior_belief) => {
                bad(format!("prior_belief {prior_belief} must lie in [0, 1]"))
            }
            AgentModel::LogitResponder { rationality } if !(rationality.is_finite() && *rationality >= 0.0) => {
                bad(format!("rationality {rationality} must be finite and >= 0"))
            }
            AgentModel::LevelK { base, .. } => base.validate(),
            AgentModel::EmpiricalLogistic(c) if c.as_array().iter().any(|v| !v.is_finite()) => {
                bad("empirical coefficients must be finite".into())
            }
            AgentModel::LloReporter { gamma, delta }
                if !(gamma.is_finite() && *gamma > 0.0 && delta.is_finite() && *delta > 0.0) =>
            {
                bad(format!("gamma {gamma} and delta {delta} must be positive"))
            }
            _ => Ok(()),
        }
    }

    /// Whether the model needs a display to decide.
    pub fn reads_signal(&self) -> bool {
        match self {
            AgentModel::BestResponder | AgentModel::LogitResponder { .. } | AgentModel::EmpiricalLogistic(_) => true,
            AgentModel::RandomChooser | AgentModel::PayoffPrior { .. } | AgentModel::LloReporter { .. } => false,
            AgentModel::LevelK { base, .. } => base.reads_signal(),
        }
    }

    /// Probability that an agent of this type chooses location A.
    pub fn choose_prob_a(
        &self,
        game: &CongestionGame,
        signal: Option<&Signal>,
        ctx: impl Into<DecisionContext>,
    ) -> Result<f64, BehaviorError> {
        let ctx = ctx.into();
        let reading = if ctx.access == InformationAccess::NoInfo { None } else { signal.map(Reading::from) };
        self.respond(game, reading, ctx)
    }

    /// Same as [`choose_prob_a`](Self::choose_prob_a) on an already-summarized display.
    pub fn respond(
        &self,
        game: &CongestionGame,
        reading: Option<Reading>,
        ctx: DecisionContext,
    ) -> Result<f64, BehaviorError> {
        let shown = || reading.ok_or(BehaviorError::SignalRequired);
        match self {
            AgentModel::BestResponder => Ok(step(game.payoff_difference(shown()?.shown))),
            AgentModel::RandomChooser => Ok(0.5),
            AgentModel::PayoffPrior { prior_belief } => Ok(step(game.payoff_difference(*prior_belief))),
            AgentModel::LogitResponder { rationality } => {
                let d = game.payoff_difference(shown()?.shown);
                Ok(if *rationality == 0.0 { 0.5 } else { logistic(rationality * d) })
            }
            AgentModel::LevelK { level, base } => {
                let mut q = base.respond(game, reading, ctx)?;
                for _ in 0..*level {
                    q = step(game.payoff_difference(q));
                }
                Ok(q)
            }
            AgentModel::EmpiricalLogistic(c) => {
                let r = shown()?;
                let d = game.payoff_difference(r.shown);
                if d.abs() <= TIE_EPSILON {
                    return Ok(0.5);
                }
                let x = EmpiricalCoefficients::regressors(
                    r.animated,
                    ctx.access == InformationAccess::Public,
                    d.abs(),
                    d < 0.0,
                    ctx.block_order == BlockOrder::PrivateFirst,
                );
                let p_best = logistic(c.linear_predictor(&x));
                Ok(if d > 0.0 { p_best } else { 1.0 - p_best })
            }
            AgentModel::LloReporter { .. } => Err(BehaviorError::ReportOnly),
        }
    }
}

/// Linear-in-log-odds probability weighting:
/// `logit(w(p)) = gamma * logit(p) + ln(delta)`, with `w(0) = 0` and `w(1) = 1`.
pub fn llo_weight(p: f64, gamma: f64, delta: f64) -> f64 {
    if p <= 0.0 {
        0.0
    } else if p >= 1.0 {
        1.0
    } else {
        logistic(gamma * logit(p) + delta.ln())
    }
}

/// Weighted mixture of agent types.
#[derive(Debug, Clone, PartialEq)]
pub struct PopulationMixture {
    components: Vec<(AgentModel, f64)>,
}

impl PopulationMixture {
    /// Weights must be nonnegative and sum to 1 within `1e-9`.
    pub fn new(components: Vec<(AgentModel, f64)>) -> Result<Self, BehaviorError> {
        if components.is_empty() {
            return Err(BehaviorError::InvalidMixture("no components".into()));
        }
        for (model, w) in &components {
            if !(w.is_finite() && *w >= 0.0) {
                return Err(BehaviorError::InvalidMixture(format!("weight {w} must be finite and >= 0")));
            }
            model.validate()?;
            if matches!(model, AgentModel::LloReporter { .. }) {
                return Err(BehaviorError::ReportOnly);
            }
        }
        let total: f64 = components.iter().map(|(_, w)| w).sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(BehaviorError::InvalidMixture(format!("weights sum to {total}, not 1")));
        }
        Ok(PopulationMixture { components })
    }

    /// Rescales positive raw weights to sum to 1.
    pub fn normalized(components: Vec<(AgentModel, f64)>) -> Result<Self, BehaviorError> {
        let total: f64 = components.iter().map(|(_, w)| w).sum();
        if !(total.is_finite() && total > 0.0) {
            return Err(BehaviorError::InvalidMixture(format!("weights sum to {total}")));
        }
        PopulationMixture::new(components.into_iter().map(|(m, w)| (m, w / total)).collect())
    }

    pub fn single(model: AgentModel) -> Result<Self, BehaviorError> {
        PopulationMixture::new(vec![(model, 1.0)])
    }

    pub fn components(&self) -> &[(AgentModel, f64)] {
        &self.components
    }

    pub fn reads_signal(&self) -> bool {
        self.components.iter().any(|(m, w)| *w > 0.0 && m.reads_signal())
    }

    /// Population share choosing A for one display.
    pub fn respond(
        &self,
        game: &CongestionGame,
        reading: Option<Reading>,
        ctx: DecisionContext,
    ) -> Result<f64, BehaviorError> {
        self.components.iter().try_fold(0.0, |acc, (m, w)| Ok(acc + w * m.respond(game, reading, ctx)?))
    }

    pub fn choose_prob_a(
        &self,
        game: &CongestionGame,
        signal: Option<&Signal>,
        ctx: impl Into<DecisionContext>,
    ) -> Result<f64, BehaviorError> {
        let ctx = ctx.into();
        let reading = if ctx.access == InformationAccess::NoInfo { None } else { signal.map(Reading::from) };
        self.respond(game, reading, ctx)
    }
}

/// Strategy shares coded from participants' explanations in the public
/// condition, before renormalization. Codes were not mutually exclusive, so
/// the visualization rows sum to 0.98.
pub fn default_population_raw(access: InformationAccess, vis: VisType) -> Vec<(AgentModel, f64)> {
    let prior = || AgentModel::PayoffPrior { prior_belief: 0.5 };
    match (access, vis) {
        (InformationAccess::NoInfo, _) => vec![
            (prior(), 0.61),
            (AgentModel::level_k(1, prior()), 0.28),
            (AgentModel::RandomChooser, 0.11),
        ],
        (_, VisType::Bar) => vec![
            (AgentModel::BestResponder, 0.42),
            (AgentModel::level_k(1, AgentModel::BestResponder), 0.32),
            (prior(), 0.15),
            (AgentModel::RandomChooser, 0.09),
        ],
        (_, VisType::Hops) => vec![
            (AgentModel::BestResponder, 0.53),
            (AgentModel::level_k(1, AgentModel::BestResponder), 0.24),
            (prior(), 0.15),
            (AgentModel::RandomChooser, 0.06),
        ],
    }
}

/// Default mixture for a condition, renormalized from [`default_population_raw`].
/// Private access reuses the public shares.
pub fn default_population(access: InformationAccess, vis: VisType) -> PopulationMixture {
    PopulationMixture::normalized(default_population_raw(access, vis)).expect("static weights are valid")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MonteCarloConfig {
    pub draws: u32,
    pub seed: u64,
}

/// Population response to prediction `p_hat` shown through `scheme`.
///
/// Deterministic schemes are evaluated exactly with standard error 0.
/// Stochastic schemes average over `mc.draws` rendered signals; draw `m` always
/// uses stream `m` of `mc.seed`, so the map is deterministic in `p_hat`.
/// Returns `(mean, standard error)`.
pub fn aggregate_response(
    pop: &PopulationMixture,
    game: &CongestionGame,
    scheme: &SignalScheme,
    p_hat: Proportion,
    ctx: impl Into<DecisionContext>,
    mc: MonteCarloConfig,
) -> Result<(f64, f64), BehaviorError> {
    let ctx = ctx.into();
    scheme.validate()?;
    if ctx.access == InformationAccess::NoInfo || !pop.reads_signal() {
        return Ok((pop.respond(game, None, ctx)?, 0.0));
    }
    if !scheme.is_stochastic() {
        let signal = scheme.render(p_hat, &mut rng::stream(0, "deterministic-render", 0))?;
        return Ok((pop.choose_prob_a(game, Some(&signal), ctx)?, 0.0));
    }
    if mc.draws == 0 {
        return Err(BehaviorError::InvalidParameter("Monte-Carlo draws must be >= 1".into()));
    }
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for m in 0..mc.draws {
        let mut r = rng::stream(mc.seed, "aggregate-response", u64::from(m));
        let signal = scheme.render(p_hat, &mut r)?;
        let v = pop.choose_prob_a(game, Some(&signal), ctx)?;
        sum += v;
        sum_sq += v * v;
    }
    let m = f64::from(mc.draws);
    let mean = sum / m;
    let se = if mc.draws > 1 {
        ((sum_sq - m * mean * mean).max(0.0) / (m - 1.0) / m).sqrt()
    } else {
        f64::NAN
    };
    Ok((mean, se))
}

/// Exact expectation of the population response over the scheme's sampling
/// distribution of displayed proportions.
pub fn expected_response(
    pop: &PopulationMixture,
    game: &CongestionGame,
    scheme: &SignalScheme,
    p_hat: Proportion,
    ctx: impl Into<DecisionContext>,
    table: Option<&BinomialTable>,
) -> Result<f64, BehaviorError> {
    let ctx = ctx.into();
    scheme.validate()?;
    if ctx.access == InformationAccess::NoInfo || !pop.reads_signal() {
        return pop.respond(game, None, ctx);
    }
    let animated = scheme.is_animated();
    let total = scheme.outcomes(p_hat, table).into_iter().try_fold(0.0, |acc, o| {
        Ok::<_, BehaviorError>(acc + o.weight * pop.respond(game, Some(Reading { shown: o.shown, animated }), ctx)?)
    })?;
    // weights sum to 1 only up to rounding
    Ok(total.clamp(0.0, 1.0))
}
