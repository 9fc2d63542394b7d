//! Simulation and analysis laboratory for decisions made under shared
//! information displays.
//!
//! The crate models a two-location non-atomic congestion game, turns predicted
//! proportions into displayed evidence, simulates behavioral agents reacting to
//! that evidence, and solves for the *visualization equilibrium*: the
//! prediction whose display induces exactly the predicted behavior.
//!
//! Module map:
//! - [`game`]: affine payoffs, Nash equilibrium, social welfare.
//! - [`signal`]: how a predicted proportion becomes a displayed signal.
//! - [`behavior`]: agent response models and population mixtures.
//! - [`solver`]: fixed-point search over response maps.
//! - [`stats`]: binomial probabilities, bootstrap, OLS and IRLS regression.
//! - [`experiment`]: synthetic experiments, CSV ingestion, payoffs, analysis.
//! - [`rng`]: seeded, splittable random streams.

pub mod behavior;
pub mod experiment;
pub mod game;
pub mod rng;
pub mod signal;
pub mod solver;
pub mod stats;

pub use behavior::{
    default_population, llo_weight, AgentModel, BehaviorError, BlockOrder, DecisionContext,
    EmpiricalCoefficients, InformationAccess, MonteCarloConfig, PopulationMixture,
};
pub use game::{AffinePayoff, CongestionGame, GameError, Location, Proportion, WelfarePoint};
pub use signal::{Signal, SignalError, SignalScheme, VisType};
pub use solver::{EquilibriumReport, EquilibriumResult, Method, ResponseMap, SolverError};
