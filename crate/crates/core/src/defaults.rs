//! Pinned constants shared by the environment, agents, planners and the
//! benchmark grid. Every benchmark result is reported against these values.

use serde::{Deserialize, Serialize};

/// Episode length in periods.
pub const HORIZON: usize = 30;
/// Mean retail demand per period.
pub const MEAN_DEMAND: f64 = 20.0;
/// Financial discount factor on period profit.
pub const DISCOUNT: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeuristicParams {
    /// Safety factor on demand standard deviation.
    pub z: f64,
    /// Holt level smoothing.
    pub holt_alpha: f64,
    /// Holt trend smoothing.
    pub holt_beta: f64,
    /// (s,S) batch size in periods of mean demand.
    pub batch_periods: f64,
    /// Demand mean assumed before any history is observed.
    pub prior_mean: f64,
}

impl Default for HeuristicParams {
    fn default() -> Self {
        Self {
            z: 1.64,
            holt_alpha: 0.3,
            holt_beta: 0.1,
            batch_periods: 1.0,
            prior_mean: MEAN_DEMAND,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlannerParams {
    /// Lookahead cap for DLP and MSSP; always further capped by the remaining horizon.
    pub horizon_cap: usize,
    /// Branching factor per stage for MSSP; stages past the end continue flat.
    pub branching: Vec<usize>,
    /// Fixed-point iteration cap for the goodwill Oracle.
    pub goodwill_iterations: usize,
}

impl Default for PlannerParams {
    fn default() -> Self {
        Self {
            horizon_cap: 10,
            branching: vec![3, 3, 3],
            goodwill_iterations: 10,
        }
    }
}
