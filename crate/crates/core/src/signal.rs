//! Turning a predicted proportion into displayed evidence.
//!
//! A [`SignalScheme`] decides what an agent sees when the prediction is `p̂`:
//! the proportion itself, a bar chart of rounded counts out of `n` prior
//! decisions, one binomial sample of `n` decisions, or an animated sequence of
//! independent binomial frames.

use rand::Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::game::{CongestionGame, Proportion, TIE_EPSILON};
use crate::stats::BinomialTable;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SignalError {
    #[error("sample_size must be >= 1")]
    ZeroSampleSize,
    #[error("frame_count must be >= 1")]
    ZeroFrameCount,
    #[error("signal has no frame sequence")]
    NoFrames,
}

pub const DEFAULT_SAMPLE_SIZE: u32 = 30;
pub const DEFAULT_FRAME_COUNT: u32 = 30;

/// Visualization condition of the study.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VisType {
    Bar,
    Hops,
}

impl VisType {
    pub const ALL: [VisType; 2] = [VisType::Bar, VisType::Hops];

    pub fn as_str(self) -> &'static str {
        match self {
            VisType::Bar => "bar",
            VisType::Hops => "hops",
        }
    }

    /// Static bars show exact counts; HOPs animate binomial frames.
    pub fn default_scheme(self) -> SignalScheme {
        match self {
            VisType::Bar => SignalScheme::Exact { sample_size: DEFAULT_SAMPLE_SIZE },
            VisType::Hops => {
                SignalScheme::FrameSequence { sample_size: DEFAULT_SAMPLE_SIZE, frame_count: DEFAULT_FRAME_COUNT }
            }
        }
    }
}

impl std::str::FromStr for VisType {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "bar" => Ok(VisType::Bar),
            "hops" => Ok(VisType::Hops),
            other => Err(format!("unknown vis_type `{other}` (expected bar or hops)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SignalScheme {
    /// Displays `p̂` unrounded: the limit of infinitely many prior decisions.
    Continuous {
        #[serde(default = "default_sample_size")]
        sample_size: u32,
    },
    /// Bar chart of `round(p̂ n)` out of `n`, ties to even.
    Exact {
        #[serde(default = "default_sample_size")]
        sample_size: u32,
    },
    /// One draw `k ~ Binomial(n, p̂)`.
    BinomialSample {
        #[serde(default = "default_sample_size")]
        sample_size: u32,
    },
    /// `frame_count` independent draws `k_i ~ Binomial(n, p̂)`.
    FrameSequence {
        #[serde(default = "default_sample_size")]
        sample_size: u32,
        #[serde(default = "default_frame_count")]
        frame_count: u32,
    },
}

fn default_sample_size() -> u32 {
    DEFAULT_SAMPLE_SIZE
}

fn default_frame_count() -> u32 {
    DEFAULT_FRAME_COUNT
}

/// What an agent saw. Serializes as `{"prop", "n", "frames", "p_hat"}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Signal {
    #[serde(rename = "prop")]
    pub displayed_prop: Proportion,
    #[serde(rename = "n")]
    pub sample_size: u32,
    pub frames: Option<Vec<(u32, u32)>>,
    #[serde(rename = "p_hat")]
    pub source_prediction: Proportion,
}

/// One support point of a scheme's displayed-proportion distribution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Outcome {
    pub weight: f64,
    pub shown: f64,
}

impl SignalScheme {
    pub fn sample_size(&self) -> u32 {
        match *self {
            SignalScheme::Continuous { sample_size }
            | SignalScheme::Exact { sample_size }
            | SignalScheme::BinomialSample { sample_size }
            | SignalScheme::FrameSequence { sample_size, .. } => sample_size,
        }
    }

    pub fn validate(&self) -> Result<(), SignalError> {
        if self.sample_size() == 0 {
            return Err(SignalError::ZeroSampleSize);
        }
        if let SignalScheme::FrameSequence { frame_count: 0, .. } = self {
            return Err(SignalError::ZeroFrameCount);
        }
        Ok(())
    }

    /// Whether rendering consumes randomness.
    pub fn is_stochastic(&self) -> bool {
        matches!(self, SignalScheme::BinomialSample { .. } | SignalScheme::FrameSequence { .. })
    }

    /// Whether the display is an animated frame sequence.
    pub fn is_animated(&self) -> bool {
        matches!(self, SignalScheme::FrameSequence { .. })
    }

    /// Renders the signal for prediction `p_hat`. Deterministic given `rng`'s state.
    pub fn render<R: Rng + ?Sized>(&self, p_hat: Proportion, rng: &mut R) -> Result<Signal, SignalError> {
        self.validate()?;
        let n = self.sample_size();
        let p = p_hat.value();
        let (displayed, frames) = match *self {
            SignalScheme::Continuous { .. } => (p, None),
            SignalScheme::Exact { .. } => (rounded_count(p, n) as f64 / f64::from(n), None),
            SignalScheme::BinomialSample { .. } => (draw(n, p, rng) as f64 / f64::from(n), None),
            SignalScheme::FrameSequence { frame_count, .. } => {
                let frames: Vec<(u32, u32)> = (0..frame_count)
                    .map(|_| {
                        let k = draw(n, p, rng);
                        (k, n - k)
                    })
                    .collect();
                let total: u64 = frames.iter().map(|&(a, _)| u64::from(a)).sum();
                (total as f64 / (f64::from(n) * f64::from(frame_count)), Some(frames))
            }
        };
        Ok(Signal {
            displayed_prop: Proportion::saturating(displayed),
            sample_size: n,
            frames,
            source_prediction: p_hat,
        })
    }

    /// Exact distribution of the proportion an agent reads off the display.
    ///
    /// The mean of `F` independent `Binomial(n, p̂)` frames is
    /// `Binomial(nF, p̂) / nF`, so every scheme has a finite support.
    pub fn outcomes(&self, p_hat: Proportion, table: Option<&BinomialTable>) -> Vec<Outcome> {
        let p = p_hat.value();
        let n = self.sample_size();
        match *self {
            SignalScheme::Continuous { .. } => vec![Outcome { weight: 1.0, shown: p }],
            SignalScheme::Exact { .. } => {
                vec![Outcome { weight: 1.0, shown: rounded_count(p, n) as f64 / f64::from(n) }]
            }
            SignalScheme::BinomialSample { .. } | SignalScheme::FrameSequence { .. } => {
                let trials = self.outcome_trials();
                let owned;
                let table = match table {
                    Some(t) if t.n() == trials => t,
                    _ => {
                        owned = BinomialTable::new(trials);
                        &owned
                    }
                };
                table
                    .pmf(p)
                    .into_iter()
                    .enumerate()
                    .filter(|&(_, w)| w > 0.0)
                    .map(|(k, weight)| Outcome { weight, shown: k as f64 / trials as f64 })
                    .collect()
            }
        }
    }

    /// Number of Bernoulli trials behind the displayed proportion.
    pub fn outcome_trials(&self) -> u64 {
        match *self {
            SignalScheme::FrameSequence { sample_size, frame_count } => {
                u64::from(sample_size) * u64::from(frame_count)
            }
            other => u64::from(other.sample_size()),
        }
    }
}

fn rounded_count(p: f64, n: u32) -> u32 {
    (p * f64::from(n)).round_ties_even().clamp(0.0, f64::from(n)) as u32
}

fn draw<R: Rng + ?Sized>(n: u32, p: f64, rng: &mut R) -> u32 {
    // p is validated by Proportion, so construction cannot fail
    Binomial::new(u64::from(n), p).expect("valid binomial").sample(rng) as u32
}

impl Signal {
    /// The summary proportion agents read: the mean frame proportion when
    /// frames are present, otherwise the displayed proportion.
    pub fn expected_proportion(&self) -> f64 {
        match &self.frames {
            Some(frames) if !frames.is_empty() => {
                let sum: f64 = frames.iter().map(|&(a, b)| f64::from(a) / f64::from(a + b)).sum();
                sum / frames.len() as f64
            }
            _ => self.displayed_prop.value(),
        }
    }

    pub fn is_animated(&self) -> bool {
        self.frames.is_some()
    }

    /// `(count_a, count_b)` shown on a static chart.
    pub fn displayed_counts(&self) -> (u32, u32) {
        let a = rounded_count(self.displayed_prop.value(), self.sample_size);
        (a, self.sample_size - a)
    }

    /// Fraction of frames in which A pays strictly more than B; ties count one half.
    pub fn frame_win_fraction(&self, game: &CongestionGame) -> Result<f64, SignalError> {
        let frames = match &self.frames {
            Some(f) if !f.is_empty() => f,
            _ => return Err(SignalError::NoFrames),
        };
        let wins: f64 = frames
            .iter()
            .map(|&(a, b)| {
                let d = game.payoff_difference(f64::from(a) / f64::from(a + b));
                if d.abs() <= TIE_EPSILON {
                    0.5
                } else if d > 0.0 {
                    1.0
                } else {
                    0.0
                }
            })
            .sum();
        Ok(wins / frames.len() as f64)
    }
}
