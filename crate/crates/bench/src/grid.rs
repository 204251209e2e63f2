//! The 22-scenario core grid.
//!
//! Axes are topology × demand regime × goodwill × fulfillment. Goodwill is
//! only crossed with the synthetic non-stationary regimes, and the trace
//! regime is only run with backlog.

use std::fmt;
use std::str::FromStr;
use std::sync::{Arc, OnceLock};

use invmgmt_core::demand::{select_trace_window, synthetic_panel, ActivityFilter};
use invmgmt_core::rng::stable_hash_parts;
use invmgmt_core::topology::{builtin, builtin_initial_inventory, Builtin};
use invmgmt_core::{defaults, DemandModel, EpisodeConfig, Fulfillment, Modifier};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const CORE_GRID: &str = "core22";
pub const CANONICAL_SEEDS: std::ops::Range<u64> = 0..10;

const TREND_SLOPE: f64 = 0.4;
const SEASONAL_AMPLITUDE: f64 = 6.0;
const SEASONAL_PERIOD: f64 = 12.0;
const SHOCK_TIME: usize = 12;
const SHOCK_MULTIPLIER: f64 = 1.8;
const SHOCK_DURATION: usize = 6;
const PANEL_SEED: u64 = 20_160_101;
const PANEL_SERIES: usize = 60;
const PANEL_DAYS: usize = 365;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GridError {
    #[error("unknown grid `{0}`")]
    UnknownGrid(String),
    #[error("unknown scenario `{0}`")]
    UnknownScenario(String),
    #[error("trace selection failed: {0}")]
    Trace(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    Stationary,
    TraceVolatile,
    TrendSeasonal,
    TrendSeasonalShock,
}

impl Regime {
    pub const ALL: [Regime; 4] = [
        Self::Stationary,
        Self::TraceVolatile,
        Self::TrendSeasonal,
        Self::TrendSeasonalShock,
    ];

    pub fn slug(self) -> &'static str {
        match self {
            Self::Stationary => "stationary",
            Self::TraceVolatile => "trace",
            Self::TrendSeasonal => "trend-seasonal",
            Self::TrendSeasonalShock => "trend-seasonal-shock",
        }
    }

    /// Synthetic non-stationary regimes, the only ones crossed with goodwill.
    pub fn is_synthetic_nonstationary(self) -> bool {
        matches!(self, Self::TrendSeasonal | Self::TrendSeasonalShock)
    }
}

/// Column groups for aggregate reporting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegimeGroup {
    Stationary,
    NonStationary,
    Endogenous,
}

impl RegimeGroup {
    pub const ALL: [RegimeGroup; 3] = [Self::Stationary, Self::NonStationary, Self::Endogenous];

    pub fn label(self) -> &'static str {
        match self {
            Self::Stationary => "stationary",
            Self::NonStationary => "non-stationary",
            Self::Endogenous => "endogenous",
        }
    }
}

impl fmt::Display for RegimeGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Scenario {
    pub id: String,
    pub topology: Builtin,
    pub regime: Regime,
    pub goodwill: bool,
    pub fulfillment: Fulfillment,
}

impl Scenario {
    pub fn new(topology: Builtin, regime: Regime, goodwill: bool, fulfillment: Fulfillment) -> Self {
        let id = format!(
            "{}-{}-{}-{}",
            topology.name(),
            regime.slug(),
            if goodwill { "gw" } else { "exo" },
            match fulfillment {
                Fulfillment::Backlog => "backlog",
                Fulfillment::LostSales => "lost",
            }
        );
        Self {
            id,
            topology,
            regime,
            goodwill,
            fulfillment,
        }
    }

    pub fn group(&self) -> RegimeGroup {
        if self.goodwill {
            RegimeGroup::Endogenous
        } else if self.regime == Regime::Stationary {
            RegimeGroup::Stationary
        } else {
            RegimeGroup::NonStationary
        }
    }

    /// Demand does not depend on the policy, so every agent sees one path.
    pub fn is_exogenous(&self) -> bool {
        !self.goodwill
    }

    /// Stream seed for canonical seed `seed`.
    pub fn episode_seed(&self, seed: u64) -> u64 {
        stable_hash_parts(&[&self.id, &seed.to_string()])
    }

    pub fn demand_model(&self) -> Result<DemandModel, GridError> {
        let seasonal = || {
            DemandModel::poisson(defaults::MEAN_DEMAND)
                .with_modifier(Modifier::Trend { slope: TREND_SLOPE })
                .with_modifier(Modifier::Seasonal {
                    amplitude: SEASONAL_AMPLITUDE,
                    period: SEASONAL_PERIOD,
                    phase: 0.0,
                })
        };
        Ok(match self.regime {
            Regime::Stationary => DemandModel::poisson(defaults::MEAN_DEMAND),
            Regime::TraceVolatile => volatile_trace()?.clone(),
            Regime::TrendSeasonal => seasonal(),
            Regime::TrendSeasonalShock => seasonal().with_modifier(Modifier::Shock {
                time: SHOCK_TIME,
                multiplier: SHOCK_MULTIPLIER,
                duration: SHOCK_DURATION,
            }),
        })
    }

    /// Blind-tier episode configuration; callers adjust `info_tier` per agent.
    pub fn episode_config(&self) -> Result<EpisodeConfig, GridError> {
        let topology = Arc::new(builtin(self.topology));
        let demand = vec![self.demand_model()?; topology.num_retail()];
        let mut cfg = EpisodeConfig::new(topology, demand);
        cfg.fulfillment = self.fulfillment;
        cfg.goodwill_enabled = self.goodwill;
        cfg.initial_inventory = builtin_initial_inventory(self.topology);
        Ok(cfg)
    }
}

impl FromStr for Scenario {
    type Err = GridError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        build_core_grid()
            .into_iter()
            .find(|sc| sc.id == s)
            .ok_or_else(|| GridError::UnknownScenario(s.to_owned()))
    }
}

/// Highest-variation 30-day window of the bundled synthetic sales panel,
/// rescaled to the mean demand level.
pub fn volatile_trace() -> Result<&'static DemandModel, GridError> {
    static TRACE: OnceLock<Result<DemandModel, GridError>> = OnceLock::new();
    TRACE
        .get_or_init(|| {
            let panel = synthetic_panel(PANEL_SEED, PANEL_SERIES, PANEL_DAYS);
            select_trace_window(
                &panel,
                defaults::HORIZON,
                defaults::MEAN_DEMAND,
                ActivityFilter::default(),
            )
            .map(|(model, _)| model)
            .map_err(|e| GridError::Trace(e.to_string()))
        })
        .as_ref()
        .map_err(Clone::clone)
}

pub fn build_core_grid() -> Vec<Scenario> {
    let mut grid = Vec::with_capacity(22);
    for topology in [Builtin::Base, Builtin::Serial] {
        for regime in Regime::ALL {
            for goodwill in [false, true] {
                for fulfillment in [Fulfillment::Backlog, Fulfillment::LostSales] {
                    if goodwill && !regime.is_synthetic_nonstationary() {
                        continue;
                    }
                    if regime == Regime::TraceVolatile && fulfillment == Fulfillment::LostSales {
                        continue;
                    }
                    grid.push(Scenario::new(topology, regime, goodwill, fulfillment));
                }
            }
        }
    }
    grid
}

pub fn grid_by_name(name: &str) -> Result<Vec<Scenario>, GridError> {
    match name {
        CORE_GRID => Ok(build_core_grid()),
        other => Err(GridError::UnknownGrid(other.to_owned())),
    }
}
