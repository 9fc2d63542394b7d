use serde::{Deserialize, Serialize};

use super::ExperimentError;
use crate::behavior::{BlockOrder, InformationAccess};
use crate::game::{Location, Proportion};
use crate::signal::VisType;

/// Visualized proportions at A: 0.10 to 0.50 in steps of 0.05.
pub const STUDY_SIGNALS: [f64; 9] = [0.10, 0.15, 0.20, 0.25, 0.30, 0.35, 0.40, 0.45, 0.50];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub signals: Vec<f64>,
    pub group_size: u32,
    pub participants: u32,
    pub vis_types: Vec<VisType>,
    pub block_orders: Vec<BlockOrder>,
    pub seed: u64,
    /// Probability-report distortion applied to synthetic confidence.
    pub llo_gamma: f64,
    pub llo_delta: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            signals: STUDY_SIGNALS.to_vec(),
            group_size: 30,
            participants: 400,
            vis_types: VisType::ALL.to_vec(),
            block_orders: BlockOrder::ALL.to_vec(),
            seed: 0,
            llo_gamma: 0.6,
            llo_delta: 1.0,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), ExperimentError> {
        let bad = |m: String| Err(ExperimentError::InvalidConfig(m));
        if self.signals.is_empty() {
            return bad("at least one signal is required".into());
        }
        if let Some(s) = self.signals.iter().find(|s| !(0.0..=1.0).contains(*s)) {
            return bad(format!("signal {s} is outside [0, 1]"));
        }
        if self.group_size == 0 {
            return bad("group_size must be >= 1".into());
        }
        if self.participants < self.group_size {
            return bad(format!(
                "participants ({}) must be at least group_size ({})",
                self.participants, self.group_size
            ));
        }
        if self.vis_types.is_empty() || self.block_orders.is_empty() {
            return bad("vis_types and block_orders must be nonempty".into());
        }
        if !(self.llo_gamma > 0.0 && self.llo_gamma.is_finite() && self.llo_delta > 0.0 && self.llo_delta.is_finite()) {
            return bad(format!("llo_gamma {} and llo_delta {} must be positive", self.llo_gamma, self.llo_delta));
        }
        Ok(())
    }

    pub fn trials_per_participant(&self) -> usize {
        2 * (self.signals.len() + 1)
    }
}

/// One decision by one participant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub participant_id: u32,
    pub vis_type: VisType,
    /// Access condition of the enclosing block.
    pub access: InformationAccess,
    pub block_order: BlockOrder,
    pub trial_index: u32,
    /// Visualized proportion at A; `None` on a block's no-information trial.
    pub signal_prop: Option<Proportion>,
    pub choice: Location,
    /// Reported probability, in percent, that the chosen location pays more.
    pub prob_estimate: f64,
    pub payoff: Option<f64>,
    pub strategy_text: Option<String>,
    pub passed_checks: Option<bool>,
}

impl TrialRecord {
    pub fn cell(&self) -> CellKey {
        CellKey { vis_type: self.vis_type, access: self.access, signal: self.signal_prop.map(signal_key) }
    }

    pub fn chose_a(&self) -> bool {
        self.choice == Location::A
    }
}

/// Signals are grouped on a 1e-6 grid so that `0.15` parsed from text and
/// `0.15` computed in code land in the same cell.
pub(crate) fn signal_key(p: Proportion) -> i64 {
    (p.value() * 1e6).round() as i64
}

/// Grouping key for Fig.-3 style cells; no-information cells sort first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CellKey {
    pub vis_type: VisType,
    pub access: InformationAccess,
    pub signal: Option<i64>,
}

impl CellKey {
    pub fn signal_prop(&self) -> Option<f64> {
        self.signal.map(|k| k as f64 / 1e6)
    }

    /// Stable text label, also used to derive per-cell random streams.
    pub fn label(&self) -> String {
        let signal = self.signal_prop().map_or_else(|| "none".to_string(), |p| p.to_string());
        format!("{}/{}/{}", self.vis_type.as_str(), self.access.as_str(), signal)
    }
}

/// Bootstrapped share choosing A in one cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub vis_type: VisType,
    pub access: InformationAccess,
    pub signal_prop: Option<f64>,
    pub proportion_a: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub n: usize,
    #[serde(skip)]
    pub replicates: Vec<f64>,
}
