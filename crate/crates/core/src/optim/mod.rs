//! LP-based planners: the perfect-information Oracle, rolling deterministic
//! (DLP) and stochastic (MSSP) lookahead, and the goodwill fixed-point Oracle.
//!
//! All of them solve the same tree-structured model ([`model::build_plan`]):
//! the Oracle on one path over the whole horizon with realized demand, DLP on
//! one path of forecast means, MSSP on a sampled scenario tree.

mod agents;
pub mod lp;
pub mod model;
pub mod tree;

pub use agents::{DlpAgent, MsspAgent, OracleAgent};
pub use lp::{Cmp, LinearProgram, LpError, LpSolution, VarId};
pub use model::{build_plan, check_supported, PlanEconomics, PlanModel, PlanSolution, PlanStart};
pub use tree::{ScenarioTree, TreeNode};

use rand::Rng;
use rand_distr::{Distribution, Normal, Poisson};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::demand::{sample_demand, DemandError, DemandModel};
use crate::env::{kpis, CoreEnv, EnvError, EpisodeConfig, EpisodeRecord, SimState};
use crate::rng::RngStream;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PlanError {
    #[error(transparent)]
    Lp(#[from] LpError),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("invalid scenario tree: {0}")]
    InvalidTree(String),
    #[error("plan start does not match the topology")]
    InvalidStart,
    #[error(transparent)]
    Demand(#[from] DemandError),
    #[error(transparent)]
    Env(#[from] EnvError),
}

pub fn economics(cfg: &EpisodeConfig) -> PlanEconomics {
    PlanEconomics {
        topology: cfg.topology.clone(),
        fulfillment: cfg.fulfillment,
        discount: cfg.discount,
    }
}

/// Realized demand `[period][retail edge]` of an episode whose demand does
/// not depend on the controller. It is a function of `(cfg, seed)` only.
pub fn exogenous_demand_path(cfg: &EpisodeConfig, seed: u64) -> Result<Vec<Vec<f64>>, PlanError> {
    demand_path_with_sentiment(cfg, seed, 1.0)
}

/// Demand the episode would realize if sentiment were pinned at `sentiment`.
fn demand_path_with_sentiment(cfg: &EpisodeConfig, seed: u64, sentiment: f64) -> Result<Vec<Vec<f64>>, PlanError> {
    let streams: Vec<RngStream> = cfg
        .topology
        .retail_edges()
        .iter()
        .map(|e| RngStream::named(seed, &e.id))
        .collect();
    (0..cfg.horizon)
        .map(|t| {
            cfg.demand
                .iter()
                .zip(&streams)
                .map(|(m, s)| Ok(sample_demand(m, sentiment * m.exogenous_mean(t)?, s, t as u64)))
                .collect()
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct OraclePlan {
    /// One request vector per period.
    pub actions: Vec<Vec<f64>>,
    /// LP-predicted discounted profit.
    pub objective: f64,
    pub max_residual: f64,
}

/// Perfect-information plan over the full horizon against `demand`.
pub fn oracle_plan(cfg: &EpisodeConfig, demand: &[Vec<f64>]) -> Result<OraclePlan, PlanError> {
    if cfg.goodwill_enabled {
        return Err(PlanError::Unsupported(
            "goodwill makes demand policy-dependent; use goodwill_oracle".into(),
        ));
    }
    plan_against(cfg, demand)
}

fn plan_against(cfg: &EpisodeConfig, demand: &[Vec<f64>]) -> Result<OraclePlan, PlanError> {
    cfg.validate()?;
    if demand.len() != cfg.horizon {
        return Err(PlanError::InvalidTree(format!(
            "demand covers {} of {} periods",
            demand.len(),
            cfg.horizon
        )));
    }
    let start = PlanStart::from_state(&SimState::initial(cfg, 0));
    let tree = ScenarioTree::single_path(demand.to_vec())?;
    let sol = build_plan(&economics(cfg), &start, tree)?.solve()?;
    Ok(OraclePlan {
        actions: sol.path_actions,
        objective: sol.objective,
        max_residual: sol.max_residual,
    })
}

/// Replay an open-loop request sequence through the environment.
pub fn simulate_plan(cfg: &EpisodeConfig, seed: u64, actions: &[Vec<f64>]) -> Result<EpisodeRecord, PlanError> {
    let mut env = CoreEnv::new(cfg.clone(), seed)?;
    env.reset(seed);
    for a in actions {
        if env.is_done() {
            break;
        }
        env.step(a)?;
    }
    Ok(env.into_record())
}

/// First-period requests of a deterministic lookahead over `forecast`
/// (`[period][retail edge]`, already capped to the lookahead length).
pub fn dlp_step(econ: &PlanEconomics, start: &PlanStart, forecast: &[Vec<f64>]) -> Result<Vec<f64>, PlanError> {
    let tree = ScenarioTree::single_path(forecast.to_vec())?;
    Ok(build_plan(econ, start, tree)?.solve()?.first_action)
}

/// Root requests of the deterministic equivalent over `tree`.
pub fn mssp_step(econ: &PlanEconomics, start: &PlanStart, tree: ScenarioTree) -> Result<Vec<f64>, PlanError> {
    if tree.num_scenarios() == 0 {
        return Err(PlanError::InvalidTree("no scenarios".into()));
    }
    Ok(build_plan(econ, start, tree)?.solve()?.first_action)
}

/// Scenario tree of Poisson draws around per-period means `[period][edge]`.
pub fn poisson_tree(means: &[Vec<f64>], branching: &[usize], rng: &mut impl Rng) -> Result<ScenarioTree, PlanError> {
    let n_retail = means.first().map_or(0, Vec::len);
    ScenarioTree::sample(means.len(), n_retail, branching, |tau, k| {
        let m = means[tau][k];
        if m > 0.0 {
            Poisson::new(m).expect("positive mean").sample(rng)
        } else {
            0.0
        }
    })
}

/// Scenario tree of `max(0, N(mean, std²))` draws, per retail edge.
pub fn normal_tree(
    stages: usize,
    mean: &[f64],
    std: &[f64],
    branching: &[usize],
    rng: &mut impl Rng,
) -> Result<ScenarioTree, PlanError> {
    ScenarioTree::sample(stages, mean.len(), branching, |_, k| {
        if std[k] > 0.0 {
            Normal::new(mean[k], std[k]).expect("finite").sample(rng).max(0.0)
        } else {
            mean[k].max(0.0)
        }
    })
}

/// Mean path `s · λ̄_{t0+τ}` of declared models.
pub fn declared_mean_path(models: &[DemandModel], sentiment: f64, t0: usize, stages: usize) -> Vec<Vec<f64>> {
    (0..stages)
        .map(|tau| {
            models
                .iter()
                .map(|m| sentiment * m.exogenous_mean(t0 + tau).unwrap_or(m.base_mean))
                .collect()
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GoodwillBranch {
    Optimistic,
    Pessimistic,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GoodwillOraclePlan {
    pub actions: Vec<Vec<f64>>,
    /// Profit realized by replaying `actions` with endogenous goodwill.
    pub realized_profit: f64,
    pub stockout_periods: usize,
    pub branch: GoodwillBranch,
    /// Whether the chosen branch reached a fixed point before the cap.
    pub converged: bool,
    pub iterations: usize,
}

/// Clairvoyant simulation-optimization benchmark under goodwill: alternately
/// plan against a demand trace and re-simulate the plan to obtain the trace it
/// induces, starting from the always-high and always-low sentiment traces.
/// Returns the better realized plan; no optimality certificate exists.
pub fn goodwill_oracle(cfg: &EpisodeConfig, seed: u64, max_iterations: usize) -> Result<GoodwillOraclePlan, PlanError> {
    if !cfg.goodwill_enabled {
        let demand = exogenous_demand_path(cfg, seed)?;
        let plan = oracle_plan(cfg, &demand)?;
        let record = simulate_plan(cfg, seed, &plan.actions)?;
        let k = kpis(&record);
        return Ok(GoodwillOraclePlan {
            actions: plan.actions,
            realized_profit: k.profit,
            stockout_periods: k.stockout_periods,
            branch: GoodwillBranch::Optimistic,
            converged: true,
            iterations: 1,
        });
    }
    let mut best: Option<GoodwillOraclePlan> = None;
    for (branch, s) in [
        (GoodwillBranch::Optimistic, cfg.goodwill.s_max),
        (GoodwillBranch::Pessimistic, cfg.goodwill.s_min),
    ] {
        let mut trace = demand_path_with_sentiment(cfg, seed, s)?;
        let mut branch_best: Option<GoodwillOraclePlan> = None;
        let mut converged = false;
        let mut iterations = 0;
        for _ in 0..max_iterations.max(1) {
            iterations += 1;
            let plan = plan_against(cfg, &trace)?;
            let record = simulate_plan(cfg, seed, &plan.actions)?;
            let k = kpis(&record);
            let candidate = GoodwillOraclePlan {
                actions: plan.actions,
                realized_profit: k.profit,
                stockout_periods: k.stockout_periods,
                branch,
                converged: false,
                iterations: 0,
            };
            if better(&candidate, branch_best.as_ref()) {
                branch_best = Some(candidate);
            }
            let induced: Vec<Vec<f64>> = record.periods.iter().map(|p| p.step.demand.clone()).collect();
            if induced == trace {
                converged = true;
                break;
            }
            trace = induced;
        }
        let mut b = branch_best.expect("at least one iteration");
        b.converged = converged;
        b.iterations = iterations;
        if better(&b, best.as_ref()) {
            best = Some(b);
        }
    }
    Ok(best.expect("two branches"))
}

fn better(candidate: &GoodwillOraclePlan, incumbent: Option<&GoodwillOraclePlan>) -> bool {
    match incumbent {
        None => true,
        Some(b) => {
            candidate.realized_profit > b.realized_profit
                || (candidate.realized_profit == b.realized_profit && candidate.stockout_periods < b.stockout_periods)
        }
    }
}
