//! Controllers that act through the shared observation/action contract.
//!
//! Blind agents read realized demand history from the observation vector.
//! Informed agents additionally read the demand-context block: the current
//! exogenous mean and the declared model parameters.

mod estimate;
mod heuristics;
mod network;

pub use estimate::{critical_ratio, estimate_demand, poisson_quantile, DemandEstimate, EstimateSource, Holt};
pub use heuristics::{order_up_to, reorder_point_order, HeuristicAgent, HeuristicKind};
pub use network::NetworkView;

pub use crate::env::InfoTier;

use std::sync::Arc;

use thiserror::Error;

use crate::defaults::{HeuristicParams, PlannerParams};
use crate::demand::GoodwillParams;
use crate::env::{EpisodeConfig, Fulfillment, Observation};
use crate::topology::Topology;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AgentError {
    #[error("informed agent received an observation without demand context")]
    MissingContext,
    #[error("critical ratio undefined: shortage plus holding cost is zero")]
    UndefinedCriticalRatio,
    #[error("solver failure: {0}")]
    Solver(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("observation does not match the agent's topology")]
    LayoutMismatch,
}

/// What an agent knows before the episode starts: structure and economics,
/// never demand.
#[derive(Debug, Clone)]
pub struct AgentSetup {
    pub topology: Arc<Topology>,
    pub horizon: usize,
    pub fulfillment: Fulfillment,
    pub goodwill_enabled: bool,
    pub goodwill: GoodwillParams,
    pub discount: f64,
    pub heuristics: HeuristicParams,
    pub planner: PlannerParams,
}

impl AgentSetup {
    pub fn from_config(cfg: &EpisodeConfig) -> Self {
        Self {
            topology: cfg.topology.clone(),
            horizon: cfg.horizon,
            fulfillment: cfg.fulfillment,
            goodwill_enabled: cfg.goodwill_enabled,
            goodwill: cfg.goodwill,
            discount: cfg.discount,
            heuristics: HeuristicParams::default(),
            planner: PlannerParams::default(),
        }
    }
}

pub trait Agent: Send {
    fn id(&self) -> &str;
    fn tier(&self) -> InfoTier;
    /// Clear per-episode memory.
    fn reset(&mut self);
    /// Raw reorder requests, one per reorder edge.
    fn act(&mut self, obs: &Observation) -> Result<Vec<f64>, AgentError>;
}

/// Realized demand per retail edge, recorded from `D_{t-1}` in each observation.
#[derive(Debug, Clone, Default)]
pub struct DemandHistory {
    series: Vec<Vec<f64>>,
    last_t: Option<usize>,
}

impl DemandHistory {
    pub fn observe(&mut self, obs: &Observation) {
        let d = obs.demand_prev();
        if self.series.len() != d.len() {
            self.series = vec![Vec::new(); d.len()];
        }
        if obs.t >= 1 && self.last_t != Some(obs.t) {
            for (s, &v) in self.series.iter_mut().zip(d) {
                s.push(v);
            }
        }
        self.last_t = Some(obs.t);
    }

    pub fn edge(&self, k: usize) -> &[f64] {
        self.series.get(k).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn clear(&mut self) {
        self.series.clear();
        self.last_t = None;
    }
}

/// Orders nothing.
#[derive(Debug, Clone)]
pub struct ZeroAgent {
    edges: usize,
}

impl ZeroAgent {
    pub fn new(setup: &AgentSetup) -> Self {
        Self {
            edges: setup.topology.num_reorder(),
        }
    }
}

impl Agent for ZeroAgent {
    fn id(&self) -> &str {
        "zero"
    }

    fn tier(&self) -> InfoTier {
        InfoTier::Blind
    }

    fn reset(&mut self) {}

    fn act(&mut self, _obs: &Observation) -> Result<Vec<f64>, AgentError> {
        Ok(vec![0.0; self.edges])
    }
}
