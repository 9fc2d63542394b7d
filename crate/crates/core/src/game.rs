//! The two-location non-atomic congestion game.
//!
//! Both payoffs are affine functions of `p`, the fraction of the population
//! choosing location A. Location B's dependence on `1 - p` is folded into its
//! intercept and slope, so every routine works on a single coordinate.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Payoff differences at or below this magnitude are treated as exact ties.
pub const TIE_EPSILON: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GameError {
    #[error("proportion {0} is outside [0, 1]")]
    InvalidProportion(f64),
    #[error("game parameter `{0}` must be finite")]
    NonFinite(&'static str),
    #[error("no interior equilibrium: indifference point {0} lies outside [0, 1]")]
    NoInteriorEquilibrium(f64),
    #[error("game is not congestible: need slope_a < 0 < slope_b (got slope_a = {slope_a}, slope_b = {slope_b})")]
    NotCongestible { slope_a: f64, slope_b: f64 },
    #[error("social welfare is not concave: quadratic coefficient slope_a - slope_b = {0} >= 0")]
    NotConcave(f64),
}

/// Fraction of agents choosing location A.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Proportion(f64);

impl Proportion {
    pub const ZERO: Proportion = Proportion(0.0);
    pub const ONE: Proportion = Proportion(1.0);

    pub fn new(value: f64) -> Result<Self, GameError> {
        if (0.0..=1.0).contains(&value) {
            Ok(Proportion(value))
        } else {
            Err(GameError::InvalidProportion(value))
        }
    }

    /// Clamps into `[0, 1]`; NaN maps to 0.
    pub fn saturating(value: f64) -> Self {
        if value.is_nan() {
            Proportion(0.0)
        } else {
            Proportion(value.clamp(0.0, 1.0))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for Proportion {
    type Error = GameError;
    fn try_from(value: f64) -> Result<Self, Self::Error> {
        Proportion::new(value)
    }
}

impl From<Proportion> for f64 {
    fn from(p: Proportion) -> f64 {
        p.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Location {
    A,
    B,
}

impl Location {
    pub fn other(self) -> Location {
        match self {
            Location::A => Location::B,
            Location::B => Location::A,
        }
    }
}

/// `intercept + slope * p`, in points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AffinePayoff {
    pub intercept: f64,
    pub slope: f64,
}

impl AffinePayoff {
    pub fn eval(&self, p: f64) -> f64 {
        self.intercept + self.slope * p
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
struct GameRecord {
    intercept_a: f64,
    slope_a: f64,
    intercept_b: f64,
    slope_b: f64,
}

/// Two affine payoffs, both expressed in the proportion choosing A.
///
/// Serializes as the flat record `{intercept_a, slope_a, intercept_b, slope_b}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GameRecord", into = "GameRecord")]
pub struct CongestionGame {
    pub payoff_a: AffinePayoff,
    pub payoff_b: AffinePayoff,
}

impl TryFrom<GameRecord> for CongestionGame {
    type Error = GameError;
    fn try_from(r: GameRecord) -> Result<Self, GameError> {
        CongestionGame::new(r.intercept_a, r.slope_a, r.intercept_b, r.slope_b)
    }
}

impl From<CongestionGame> for GameRecord {
    fn from(g: CongestionGame) -> GameRecord {
        GameRecord {
            intercept_a: g.payoff_a.intercept,
            slope_a: g.payoff_a.slope,
            intercept_b: g.payoff_b.intercept,
            slope_b: g.payoff_b.slope,
        }
    }
}

impl Default for CongestionGame {
    fn default() -> Self {
        CongestionGame::paper()
    }
}

/// A proportion together with the social welfare it produces.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WelfarePoint {
    pub proportion: Proportion,
    pub welfare: f64,
}

impl CongestionGame {
    /// Builds a game; only finiteness is checked here. Congestibility and
    /// concavity are preconditions of the individual solvers, which report
    /// their own errors.
    pub fn new(intercept_a: f64, slope_a: f64, intercept_b: f64, slope_b: f64) -> Result<Self, GameError> {
        for (name, v) in [
            ("intercept_a", intercept_a),
            ("slope_a", slope_a),
            ("intercept_b", intercept_b),
            ("slope_b", slope_b),
        ] {
            if !v.is_finite() {
                return Err(GameError::NonFinite(name));
            }
        }
        Ok(CongestionGame {
            payoff_a: AffinePayoff { intercept: intercept_a, slope: slope_a },
            payoff_b: AffinePayoff { intercept: intercept_b, slope: slope_b },
        })
    }

    /// The study's instance: `U_A = 40 - 30p`, `U_B = 20 + 60p`.
    pub fn paper() -> Self {
        CongestionGame {
            payoff_a: AffinePayoff { intercept: 40.0, slope: -30.0 },
            payoff_b: AffinePayoff { intercept: 20.0, slope: 60.0 },
        }
    }

    pub fn payoff_a(&self, p: f64) -> f64 {
        self.payoff_a.eval(p)
    }

    pub fn payoff_b(&self, p: f64) -> f64 {
        self.payoff_b.eval(p)
    }

    pub fn payoff(&self, location: Location, p: f64) -> f64 {
        match location {
            Location::A => self.payoff_a(p),
            Location::B => self.payoff_b(p),
        }
    }

    /// `payoff_a(p) - payoff_b(p)`.
    pub fn payoff_difference(&self, p: f64) -> f64 {
        self.payoff_a(p) - self.payoff_b(p)
    }

    /// The strictly better location at `p`, or `None` on a tie.
    pub fn higher_location(&self, p: f64) -> Option<Location> {
        let d = self.payoff_difference(p);
        if d.abs() <= TIE_EPSILON {
            None
        } else if d > 0.0 {
            Some(Location::A)
        } else {
            Some(Location::B)
        }
    }

    /// The unique interior Nash equilibrium, where both locations pay the same.
    pub fn nash_proportion(&self) -> Result<Proportion, GameError> {
        let (sa, sb) = (self.payoff_a.slope, self.payoff_b.slope);
        if !(sa < 0.0 && sb > 0.0) {
            return Err(GameError::NotCongestible { slope_a: sa, slope_b: sb });
        }
        let p = (self.payoff_a.intercept - self.payoff_b.intercept) / (sb - sa);
        Proportion::new(p).map_err(|_| GameError::NoInteriorEquilibrium(p))
    }

    /// Average payoff: `p U_A(p) + (1 - p) U_B(p)`.
    pub fn social_welfare(&self, p: f64) -> f64 {
        p * self.payoff_a(p) + (1.0 - p) * self.payoff_b(p)
    }

    /// Coefficients `(c0, c1, c2)` of `SW(p) = c0 + c1 p + c2 p^2`.
    pub fn welfare_coefficients(&self) -> (f64, f64, f64) {
        let (a, b) = (self.payoff_a, self.payoff_b);
        (b.intercept, a.intercept - b.intercept + b.slope, a.slope - b.slope)
    }

    /// Vertex of the welfare parabola, clamped into `[0, 1]`.
    pub fn welfare_optimum(&self) -> Result<WelfarePoint, GameError> {
        let (_, c1, c2) = self.welfare_coefficients();
        if c2 >= 0.0 {
            return Err(GameError::NotConcave(c2));
        }
        let proportion = Proportion::saturating(-c1 / (2.0 * c2));
        Ok(WelfarePoint { proportion, welfare: self.social_welfare(proportion.value()) })
    }
}
