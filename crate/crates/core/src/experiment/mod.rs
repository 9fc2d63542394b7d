//! Synthetic experiments, CSV ingestion, payoffs and analysis.
//!
//! The experiment is a counterbalanced blocked design: every participant sees
//! one visualization type, and two blocks (private and public access) of ten
//! trials each. A block opens with a no-information trial followed by the nine
//! study signals in shuffled order.

mod analysis;
mod csv_io;
mod export;
mod payoffs;
mod simulate;
mod types;

pub use analysis::{
    analyze, estimate_vis_equilibrium, fit_response_models, summarize, Analysis, AnalysisConfig, EquilibriumEstimate,
    ResponseFits, EQ3_TERMS,
};
pub use csv_io::{ingest_csv, read_records, write_records, write_records_csv, IngestOptions, CSV_HEADER};
pub use export::{export_plot_data, read_summary_csv, ExportPaths};
pub use payoffs::{compute_private_payoff, compute_public_payoffs};
pub use simulate::{simulate_experiment, PopulationPlan, SimulationSetup};
pub use types::{CellKey, CellSummary, ExperimentConfig, TrialRecord, STUDY_SIGNALS};

use thiserror::Error;

use crate::behavior::BehaviorError;
use crate::game::GameError;
use crate::solver::SolverError;
use crate::stats::StatsError;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("invalid experiment configuration: {0}")]
    InvalidConfig(String),
    #[error("participant {participant} trial {trial} has no signal")]
    MissingSignal { participant: u32, trial: u32 },
    #[error("cell has {size} records but a payoff group needs {needed}")]
    CellTooSmall { size: usize, needed: usize },
    #[error("row {row}, column `{column}`: {message}")]
    Parse { row: usize, column: String, message: String },
    #[error("missing CSV columns: {}", missing.join(", "))]
    Schema { missing: Vec<String> },
    #[error("fitting {model} failed: {source}")]
    Fit { model: &'static str, source: StatsError },
    #[error("no data: {0}")]
    NoData(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Behavior(#[from] BehaviorError),
    #[error(transparent)]
    Game(#[from] GameError),
}
