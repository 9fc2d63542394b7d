//! Command-line front end: game facts, equilibrium solving, experiment
//! simulation and analysis.
//!
//! Exit codes: 0 success, 2 configuration or schema error, 3 non-convergence,
//! 4 I/O failure, 5 statistical failure.

pub mod commands;
pub mod config;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use thiserror::Error;
use viseq_core::experiment::ExperimentError;
use viseq_core::{InformationAccess, SolverError, VisType};

pub use config::CliConfig;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("no convergence: {0}")]
    NonConvergence(String),
    #[error("I/O error: {0}")]
    Io(String),
    #[error("statistical failure: {0}")]
    Statistical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::NonConvergence(_) => 3,
            CliError::Io(_) => 4,
            CliError::Statistical(_) => 5,
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<SolverError> for CliError {
    fn from(e: SolverError) -> Self {
        match e {
            SolverError::MaxIterExceeded { .. } => CliError::NonConvergence(e.to_string()),
            SolverError::InvalidParameter(_) | SolverError::Game(_) | SolverError::Behavior(_) => {
                CliError::Config(e.to_string())
            }
            _ => CliError::Statistical(e.to_string()),
        }
    }
}

impl From<ExperimentError> for CliError {
    fn from(e: ExperimentError) -> Self {
        let msg = e.to_string();
        match e {
            ExperimentError::InvalidConfig(_)
            | ExperimentError::Parse { .. }
            | ExperimentError::Schema { .. }
            | ExperimentError::Json(_)
            | ExperimentError::Game(_)
            | ExperimentError::Behavior(_) => CliError::Config(msg),
            ExperimentError::Io(_) => CliError::Io(msg),
            ExperimentError::Csv(ref c) if c.is_io_error() => CliError::Io(msg),
            ExperimentError::Csv(_) => CliError::Config(msg),
            ExperimentError::Solver(s) => s.into(),
            ExperimentError::Fit { .. }
            | ExperimentError::Stats(_)
            | ExperimentError::NoData(_)
            | ExperimentError::MissingSignal { .. }
            | ExperimentError::CellTooSmall { .. } => CliError::Statistical(msg),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "viseq", version, about = "Visualization-equilibrium laboratory")]
pub struct Cli {
    /// TOML configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Seed for every random stream; required by stochastic commands.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Directory for all file outputs.
    #[arg(long, global = true)]
    pub out_dir: Option<PathBuf>,
    /// Worker threads (results do not depend on this).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Nash equilibrium, welfare optimum and the welfare curve.
    Game,
    /// Fixed points of the display-response map.
    Solve(SolveArgs),
    /// Simulate the experiment and write experiment.csv.
    Simulate(SimulateArgs),
    /// Analyze an experiment CSV.
    Analyze(AnalyzeArgs),
    /// Probability that each location pays more, per signal.
    Truth,
    /// Rewrite the plot CSVs from an analysis.json bundle.
    ExportPlots {
        bundle: PathBuf,
    },
}

#[derive(Debug, Args, Default)]
pub struct SolveArgs {
    #[arg(long, value_enum, value_delimiter = ',')]
    pub method: Vec<config::SolveMethod>,
    #[arg(long, value_parser = parse_vis, value_delimiter = ',')]
    pub vis: Vec<VisType>,
    #[arg(long, value_parser = parse_access)]
    pub access: Option<InformationAccess>,
    #[arg(long, value_enum)]
    pub evaluation: Option<config::EvaluationMode>,
    #[arg(long, value_enum)]
    pub preset: Option<config::Preset>,
}

#[derive(Debug, Args, Default)]
pub struct SimulateArgs {
    #[arg(long)]
    pub participants: Option<u32>,
    #[arg(long)]
    pub group_size: Option<u32>,
    #[arg(long, value_enum)]
    pub preset: Option<config::Preset>,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    /// Experiment CSV.
    pub dataset: PathBuf,
    /// Drop rows whose passed_checks column is false.
    #[arg(long)]
    pub require_passed_checks: bool,
    #[arg(long)]
    pub replications: Option<u32>,
}

fn parse_vis(s: &str) -> Result<VisType, String> {
    s.parse()
}

fn parse_access(s: &str) -> Result<InformationAccess, String> {
    match s {
        "private" => Ok(InformationAccess::Private),
        "public" => Ok(InformationAccess::Public),
        "no_info" => Ok(InformationAccess::NoInfo),
        other => Err(format!("unknown access `{other}` (expected private, public or no_info)")),
    }
}

/// Loads the config file and applies flag overrides.
pub fn resolve_config(cli: &Cli) -> Result<CliConfig, CliError> {
    let mut cfg = match &cli.config {
        Some(path) => CliConfig::load(path)?,
        None => CliConfig::default(),
    };
    if cli.seed.is_some() {
        cfg.seed = cli.seed;
    }
    if cli.out_dir.is_some() {
        cfg.out_dir = cli.out_dir.clone();
    }
    if cli.threads.is_some() {
        cfg.threads = cli.threads;
    }
    match &cli.command {
        Command::Solve(a) => {
            if !a.method.is_empty() {
                cfg.solve.methods = a.method.clone();
            }
            if !a.vis.is_empty() {
                cfg.solve.vis = a.vis.clone();
            }
            if let Some(x) = a.access {
                cfg.solve.access = x;
            }
            if let Some(x) = a.evaluation {
                cfg.solve.evaluation = x;
            }
            if let Some(x) = a.preset {
                cfg.population.preset = x;
            }
        }
        Command::Simulate(a) => {
            if let Some(x) = a.participants {
                cfg.experiment.participants = x;
            }
            if let Some(x) = a.group_size {
                cfg.experiment.group_size = x;
            }
            if let Some(x) = a.preset {
                cfg.population.preset = x;
            }
        }
        Command::Analyze(a) => {
            if a.require_passed_checks {
                cfg.analysis.require_passed_checks = true;
            }
            if let Some(x) = a.replications {
                cfg.bootstrap.replications = x;
            }
        }
        Command::Game | Command::Truth | Command::ExportPlots { .. } => {}
    }
    Ok(cfg)
}

/// Runs a parsed command and returns the text for standard output.
pub fn run(cli: &Cli) -> Result<String, CliError> {
    let cfg = resolve_config(cli)?;
    let go = || match &cli.command {
        Command::Game => commands::cmd_game(&cfg).map(|r| commands::render_game(&r)),
        Command::Solve(_) => commands::cmd_solve(&cfg).map(|r| commands::render_solve(&r)),
        Command::Simulate(_) => commands::cmd_simulate(&cfg).map(|r| commands::render_simulate(&r)),
        Command::Analyze(a) => commands::cmd_analyze(&cfg, &a.dataset).map(|r| commands::render_analysis(&r)),
        Command::Truth => commands::cmd_truth(&cfg).map(|r| commands::render_truth(&r)),
        Command::ExportPlots { bundle } => commands::cmd_export_plots(&cfg, bundle).map(|r| commands::render_analysis(&r)),
    };
    match cfg.threads {
        Some(0) => Err(CliError::Config("threads must be >= 1".into())),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| CliError::Config(format!("cannot start {n} threads: {e}")))?
            .install(go),
        None => go(),
    }
}
