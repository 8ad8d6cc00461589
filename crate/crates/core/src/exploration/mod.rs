//! Exploration strategies that decide where the robot samples next.
//!
//! * Area coverage ([`coverage`]): random, W-shaped transect and area
//!   splitting. Targets are fixed up front and never replanned.
//! * Next-best-view ([`nbv`]): after each model update pick one new target
//!   from the mean kriging-variance surface, greedily or by roulette wheel.
//! * Adaptive sampling ([`adaptive`]): keep a standing multi-target plan and
//!   edit it after each update, re-routing with [`tsp`].

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{CellIndex, FieldGrid, Location};

pub mod adaptive;
pub mod coverage;
pub mod nbv;
pub mod tsp;

pub use adaptive::{adapt_plan_greedy, adapt_plan_mc};
pub use coverage::{plan_area_split, plan_area_split_excluding, plan_random, plan_random_excluding, plan_w_shape};
pub use nbv::{next_greedy, next_monte_carlo, roulette_select, KV_TIE_TOLERANCE};
pub use tsp::{tsp_route, Route};

/// Ordered sampling targets and the location the route starts from.
#[derive(Debug, Clone, PartialEq)]
pub struct Plan {
    pub route: Vec<CellIndex>,
    pub origin: Location,
}

impl Plan {
    pub fn len(&self) -> usize {
        self.route.len()
    }

    pub fn is_empty(&self) -> bool {
        self.route.is_empty()
    }

    /// Open-path length from the origin through every target (m).
    pub fn length(&self, grid: &FieldGrid) -> f64 {
        tsp::path_length(self.origin, &self.route, grid)
    }

    pub(crate) fn targets(&self) -> HashSet<CellIndex> {
        self.route.iter().copied().collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StrategyKind {
    Random,
    WShape,
    AreaSplit,
    Greedy,
    MonteCarlo,
    AdaptiveGreedy,
    AdaptiveMc,
}

impl StrategyKind {
    pub const ALL: [StrategyKind; 7] = [
        StrategyKind::Random,
        StrategyKind::AreaSplit,
        StrategyKind::WShape,
        StrategyKind::Greedy,
        StrategyKind::MonteCarlo,
        StrategyKind::AdaptiveMc,
        StrategyKind::AdaptiveGreedy,
    ];

    /// Config / CSV key.
    pub fn key(self) -> &'static str {
        match self {
            StrategyKind::Random => "random",
            StrategyKind::WShape => "w_shape",
            StrategyKind::AreaSplit => "area_split",
            StrategyKind::Greedy => "greedy",
            StrategyKind::MonteCarlo => "monte_carlo",
            StrategyKind::AdaptiveGreedy => "adaptive_greedy",
            StrategyKind::AdaptiveMc => "adaptive_mc",
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            StrategyKind::Random => "Random",
            StrategyKind::WShape => "W Shape",
            StrategyKind::AreaSplit => "Area Split",
            StrategyKind::Greedy => "Greedy",
            StrategyKind::MonteCarlo => "Monte Carlo",
            StrategyKind::AdaptiveGreedy => "Adaptive + Greedy",
            StrategyKind::AdaptiveMc => "Adaptive + MC",
        }
    }

    pub fn is_area_coverage(self) -> bool {
        matches!(self, StrategyKind::Random | StrategyKind::WShape | StrategyKind::AreaSplit)
    }

    pub fn is_nbv(self) -> bool {
        matches!(self, StrategyKind::Greedy | StrategyKind::MonteCarlo)
    }

    pub fn is_adaptive(self) -> bool {
        matches!(self, StrategyKind::AdaptiveGreedy | StrategyKind::AdaptiveMc)
    }

    pub fn uses_monte_carlo(self) -> bool {
        matches!(self, StrategyKind::MonteCarlo | StrategyKind::AdaptiveMc)
    }
}

impl fmt::Display for StrategyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

impl FromStr for StrategyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        StrategyKind::ALL
            .into_iter()
            .find(|k| k.key() == s)
            .ok_or_else(|| Error::invalid(format!("unknown strategy `{s}`")))
    }
}

/// Area-coverage plan an adaptive strategy starts from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialPlanKind {
    Random,
    #[default]
    AreaSplit,
}

pub const DEFAULT_CANDIDATE_COUNT: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StrategyConfig {
    pub kind: StrategyKind,
    /// Number of samples to take.
    pub budget: usize,
    pub seed: u64,
    /// Candidate set size for the Monte Carlo selectors.
    pub candidate_count: usize,
    pub initial_plan: InitialPlanKind,
}

impl StrategyConfig {
    pub fn new(kind: StrategyKind, budget: usize, seed: u64) -> Self {
        Self {
            kind,
            budget,
            seed,
            candidate_count: DEFAULT_CANDIDATE_COUNT,
            initial_plan: InitialPlanKind::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.budget == 0 {
            return Err(Error::invalid("budget must be at least 1"));
        }
        if self.kind.uses_monte_carlo() && self.candidate_count < 2 {
            return Err(Error::invalid("Monte Carlo strategies need candidate_count >= 2"));
        }
        Ok(())
    }
}
