//! TOML run configuration. Every section is optional; command-line flags
//! override file values.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use viseq_core::experiment::{ExperimentConfig, PopulationPlan, SimulationSetup};
use viseq_core::solver::RobbinsMonroConfig;
use viseq_core::stats::BootstrapConfig;
use viseq_core::{
    AgentModel, CongestionGame, EmpiricalCoefficients, InformationAccess, PopulationMixture,
    SignalScheme, VisType,
};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct CliConfig {
    pub seed: Option<u64>,
    pub out_dir: Option<PathBuf>,
    pub threads: Option<usize>,
    pub game: GameConfig,
    pub schemes: SchemeConfig,
    pub population: PopulationConfig,
    pub solve: SolveConfig,
    pub experiment: ExperimentSection,
    pub bootstrap: BootstrapSection,
    pub analysis: AnalysisSection,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GameConfig {
    pub intercept_a: f64,
    pub slope_a: f64,
    pub intercept_b: f64,
    pub slope_b: f64,
}

impl Default for GameConfig {
    fn default() -> Self {
        GameConfig { intercept_a: 40.0, slope_a: -30.0, intercept_b: 20.0, slope_b: 60.0 }
    }
}

impl GameConfig {
    pub fn build(&self) -> Result<CongestionGame, CliError> {
        CongestionGame::new(self.intercept_a, self.slope_a, self.intercept_b, self.slope_b)
            .map_err(|e| CliError::Config(format!("game: {e}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SchemeConfig {
    pub bar: SignalScheme,
    pub hops: SignalScheme,
}

impl Default for SchemeConfig {
    fn default() -> Self {
        SchemeConfig { bar: VisType::Bar.default_scheme(), hops: VisType::Hops.default_scheme() }
    }
}

impl SchemeConfig {
    pub fn get(&self, vis: VisType) -> SignalScheme {
        match vis {
            VisType::Bar => self.bar,
            VisType::Hops => self.hops,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    /// Strategy mixtures coded from the study's explanations.
    #[default]
    Study,
    /// Every agent follows the fitted best-response regression.
    Empirical,
    /// Components listed under `population.components`.
    Custom,
}

/// Parameters for one model; which ones apply depends on `model`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct ModelParams {
    pub rationality: Option<f64>,
    pub prior_belief: Option<f64>,
    pub level: Option<u32>,
    pub base: Option<String>,
    pub coefficients: Option<EmpiricalCoefficients>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComponentSpec {
    pub model: String,
    #[serde(default)]
    pub params: ModelParams,
    pub weight: f64,
}

pub const MODEL_NAMES: [&str; 6] =
    ["best_responder", "random_chooser", "payoff_prior", "logit_responder", "level_k", "empirical_logistic"];

fn build_model(name: &str, params: &ModelParams, key: &str) -> Result<AgentModel, CliError> {
    let need = |v: Option<f64>, field: &str| {
        v.ok_or_else(|| CliError::Config(format!("{key}.params.{field} is required for model `{name}`")))
    };
    let model = match name {
        "best_responder" => AgentModel::BestResponder,
        "random_chooser" => AgentModel::RandomChooser,
        "payoff_prior" => AgentModel::PayoffPrior { prior_belief: params.prior_belief.unwrap_or(0.5) },
        "logit_responder" => AgentModel::LogitResponder { rationality: need(params.rationality, "rationality")? },
        "empirical_logistic" => AgentModel::EmpiricalLogistic(params.coefficients.unwrap_or_default()),
        "level_k" => {
            let base = params.base.as_deref().unwrap_or("best_responder");
            if base == "level_k" {
                return Err(CliError::Config(format!("{key}.params.base cannot itself be `level_k`")));
            }
            AgentModel::level_k(params.level.unwrap_or(1), build_model(base, params, &format!("{key}.base"))?)
        }
        other => {
            return Err(CliError::Config(format!(
                "{key}.model: unknown model `{other}` (expected one of {})",
                MODEL_NAMES.join(", ")
            )))
        }
    };
    model.validate().map_err(|e| CliError::Config(format!("{key}: {e}")))?;
    Ok(model)
}

fn build_mixture(components: &[ComponentSpec], key: &str, normalize: bool) -> Result<PopulationMixture, CliError> {
    let models = components
        .iter()
        .enumerate()
        .map(|(i, c)| Ok((build_model(&c.model, &c.params, &format!("{key}[{i}]"))?, c.weight)))
        .collect::<Result<Vec<_>, CliError>>()?;
    let mix = if normalize { PopulationMixture::normalized(models) } else { PopulationMixture::new(models) };
    mix.map_err(|e| CliError::Config(format!("{key}: {e}")))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct PopulationConfig {
    pub preset: Preset,
    /// Rescale weights to sum to 1 instead of rejecting other totals.
    pub normalize: bool,
    pub components: Vec<ComponentSpec>,
    /// Per-condition overrides keyed `no_info`, `private_bar`, `public_hops`, ...
    pub conditions: BTreeMap<String, Vec<ComponentSpec>>,
}

fn condition_key(key: &str) -> Result<(InformationAccess, VisType), CliError> {
    let bad = || {
        CliError::Config(format!(
            "population.conditions.{key}: expected `no_info` or `<private|public>_<bar|hops>`"
        ))
    };
    if key == "no_info" {
        return Ok((InformationAccess::NoInfo, VisType::Bar));
    }
    let (access, vis) = key.split_once('_').ok_or_else(bad)?;
    let access = match access {
        "private" => InformationAccess::Private,
        "public" => InformationAccess::Public,
        _ => return Err(bad()),
    };
    Ok((access, vis.parse().map_err(|_| bad())?))
}

impl PopulationConfig {
    pub fn plan(&self) -> Result<PopulationPlan, CliError> {
        let mut plan = match self.preset {
            Preset::Study => {
                if !self.components.is_empty() {
                    return Err(CliError::Config(
                        "population.components requires population.preset = \"custom\"".into(),
                    ));
                }
                PopulationPlan::study_default()
            }
            Preset::Empirical => PopulationPlan::uniform(
                PopulationMixture::single(AgentModel::EmpiricalLogistic(EmpiricalCoefficients::default()))
                    .expect("valid model"),
            ),
            Preset::Custom => {
                if self.components.is_empty() {
                    return Err(CliError::Config("population.components is empty for preset \"custom\"".into()));
                }
                PopulationPlan::uniform(build_mixture(&self.components, "population.components", self.normalize)?)
            }
        };
        for (key, comps) in &self.conditions {
            let (access, vis) = condition_key(key)?;
            let mix = build_mixture(comps, &format!("population.conditions.{key}"), self.normalize)?;
            plan = plan.with(access, vis, mix);
        }
        Ok(plan)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum SolveMethod {
    Grid,
    Bisection,
    Damped,
    RobbinsMonro,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum EvaluationMode {
    /// Exact expectation over the displayed-proportion distribution.
    #[default]
    Expected,
    MonteCarlo,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolveConfig {
    pub access: InformationAccess,
    pub vis: Vec<VisType>,
    pub methods: Vec<SolveMethod>,
    pub evaluation: EvaluationMode,
    pub mc_draws: u32,
    pub tol: f64,
    pub resolution: f64,
    pub damping: f64,
    pub max_iter: usize,
    pub p0: f64,
    /// Largest `|S(p*) - p*|` accepted before reporting non-convergence.
    pub residual_tolerance: f64,
    /// Same, for Robbins-Monro.
    pub stochastic_residual_tolerance: f64,
    pub robbins_monro: RobbinsMonroSection,
}

impl Default for SolveConfig {
    fn default() -> Self {
        SolveConfig {
            access: InformationAccess::Public,
            vis: VisType::ALL.to_vec(),
            methods: vec![SolveMethod::Bisection],
            evaluation: EvaluationMode::Expected,
            mc_draws: 1000,
            tol: 1e-6,
            resolution: 1e-4,
            damping: 0.5,
            max_iter: 10_000,
            p0: 0.5,
            residual_tolerance: 1e-3,
            stochastic_residual_tolerance: 1e-2,
            robbins_monro: RobbinsMonroSection::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RobbinsMonroSection {
    pub a0: f64,
    pub t0: f64,
    pub iterations: usize,
}

impl Default for RobbinsMonroSection {
    fn default() -> Self {
        let d = RobbinsMonroConfig::default();
        RobbinsMonroSection { a0: d.a0, t0: d.t0, iterations: d.iterations }
    }
}

/// Experiment design; the seed comes from the top level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentSection {
    pub signals: Vec<f64>,
    pub group_size: u32,
    pub participants: u32,
    pub vis_types: Vec<VisType>,
    pub block_orders: Vec<viseq_core::BlockOrder>,
    pub llo_gamma: f64,
    pub llo_delta: f64,
}

impl Default for ExperimentSection {
    fn default() -> Self {
        let d = ExperimentConfig::default();
        ExperimentSection {
            signals: d.signals,
            group_size: d.group_size,
            participants: d.participants,
            vis_types: d.vis_types,
            block_orders: d.block_orders,
            llo_gamma: d.llo_gamma,
            llo_delta: d.llo_delta,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BootstrapSection {
    pub group_size: u32,
    pub replications: u32,
    pub coverage: f64,
}

impl Default for BootstrapSection {
    fn default() -> Self {
        let d = BootstrapConfig::default();
        BootstrapSection { group_size: d.group_size, replications: d.replications, coverage: d.coverage }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnalysisSection {
    pub equilibrium_replications: u32,
    pub require_passed_checks: bool,
}

impl Default for AnalysisSection {
    fn default() -> Self {
        AnalysisSection { equilibrium_replications: 200, require_passed_checks: false }
    }
}

impl CliConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn require_seed(&self, command: &str) -> Result<u64, CliError> {
        self.seed.ok_or_else(|| CliError::Config(format!("`{command}` is stochastic and needs --seed (or `seed` in the config)")))
    }

    pub fn out_dir(&self) -> PathBuf {
        self.out_dir.clone().unwrap_or_else(|| PathBuf::from("."))
    }

    pub fn experiment_config(&self, seed: u64) -> ExperimentConfig {
        let e = &self.experiment;
        ExperimentConfig {
            signals: e.signals.clone(),
            group_size: e.group_size,
            participants: e.participants,
            vis_types: e.vis_types.clone(),
            block_orders: e.block_orders.clone(),
            seed,
            llo_gamma: e.llo_gamma,
            llo_delta: e.llo_delta,
        }
    }

    pub fn simulation_setup(&self) -> Result<SimulationSetup, CliError> {
        let mut setup = SimulationSetup::new(self.game.build()?, self.population.plan()?);
        setup.bar_scheme = self.schemes.bar;
        setup.hops_scheme = self.schemes.hops;
        Ok(setup)
    }

    pub fn bootstrap_config(&self, seed: u64) -> BootstrapConfig {
        let b = self.bootstrap;
        BootstrapConfig { group_size: b.group_size, replications: b.replications, coverage: b.coverage, seed }
    }
}
