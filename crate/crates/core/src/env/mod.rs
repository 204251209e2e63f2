//! The shared transition kernel.
//!
//! Every period runs the same causal sequence regardless of controller:
//!
//! 1. raw requests are clamped and allocated into filled orders,
//! 2. lag-0 pipeline entries arrive and the new fills enter the pipeline,
//! 3. goodwill is updated from the previous period's unfulfilled demand,
//! 4. retail demand is realized and shipped from post-arrival stock,
//! 5. the period reward is computed on post-step stocks.

mod kpi;
mod observation;
mod record;

pub use kpi::{kpis, EchelonBullwhip, Kpis};
pub use observation::{DemandContext, Observation, ObservationLayout, Segment, INFORMED_FEATURES_PER_EDGE};
pub use record::{EpisodeRecord, PeriodRecord};

use std::collections::{BTreeMap, VecDeque};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::defaults;
use crate::demand::{draw_demand, DemandError, DemandModel, GoodwillParams, GoodwillState};
use crate::rng::RngStream;
use crate::topology::{NodeKind, NodeSpec, Topology};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Fulfillment {
    Backlog,
    LostSales,
}

/// What demand information a controller may see.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InfoTier {
    Blind,
    Informed,
    NonCausal,
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum EnvError {
    #[error("invalid episode config: {0}")]
    InvalidConfig(String),
    #[error("action has length {got}, expected {expected}")]
    ActionLength { expected: usize, got: usize },
    #[error("action entry {0} is not finite")]
    NonFiniteAction(usize),
    #[error("episode is already done")]
    EpisodeDone,
    #[error(transparent)]
    Demand(#[from] DemandError),
}

#[derive(Debug, Clone)]
pub struct EpisodeConfig {
    pub topology: Arc<Topology>,
    /// One model per retail-demand edge, in retail-edge order.
    pub demand: Vec<DemandModel>,
    pub horizon: usize,
    pub fulfillment: Fulfillment,
    pub goodwill_enabled: bool,
    pub goodwill: GoodwillParams,
    pub discount: f64,
    /// Starting on-hand stock by node id; absent managed nodes start empty.
    pub initial_inventory: BTreeMap<String, f64>,
    /// Controls whether observations carry the demand-context block.
    pub info_tier: InfoTier,
}

impl EpisodeConfig {
    /// Defaults: pinned horizon, backlog, no goodwill, no discounting, blind.
    pub fn new(topology: Arc<Topology>, demand: Vec<DemandModel>) -> Self {
        Self {
            topology,
            demand,
            horizon: defaults::HORIZON,
            fulfillment: Fulfillment::Backlog,
            goodwill_enabled: false,
            goodwill: GoodwillParams::default(),
            discount: defaults::DISCOUNT,
            initial_inventory: BTreeMap::new(),
            info_tier: InfoTier::Blind,
        }
    }

    pub fn validate(&self) -> Result<(), EnvError> {
        let bad = |m: String| Err(EnvError::InvalidConfig(m));
        if self.horizon < 1 {
            return bad("horizon must be at least 1".into());
        }
        if !(self.discount > 0.0 && self.discount <= 1.0) {
            return bad(format!("discount {} outside (0, 1]", self.discount));
        }
        if self.demand.len() != self.topology.num_retail() {
            return bad(format!(
                "{} demand models for {} retail edges",
                self.demand.len(),
                self.topology.num_retail()
            ));
        }
        for m in &self.demand {
            m.validate()?;
            if let Some(tr) = &m.trace {
                if tr.len() < self.horizon {
                    return bad(format!(
                        "trace of length {} shorter than horizon {}",
                        tr.len(),
                        self.horizon
                    ));
                }
            }
        }
        for (id, &x) in &self.initial_inventory {
            match self.topology.node_idx(id) {
                Some(i) if self.topology.node(i).kind.is_managed() => {}
                _ => return bad(format!("initial inventory for unknown or unmanaged node `{id}`")),
            }
            if !(x.is_finite() && x >= 0.0) {
                return bad(format!("initial inventory of `{id}` must be non-negative"));
            }
        }
        if self.goodwill_enabled {
            let g = self.goodwill;
            if !(g.s_min > 0.0 && g.s_min <= 1.0 && g.s_max >= 1.0) {
                return bad("goodwill bounds must bracket 1".into());
            }
        }
        Ok(())
    }

    pub fn observation_feature_dim(&self) -> usize {
        2 + match self.info_tier {
            InfoTier::Informed => INFORMED_FEATURES_PER_EDGE * self.topology.num_retail(),
            _ => 0,
        }
    }

    pub fn initial_on_hand(&self) -> Vec<f64> {
        self.topology
            .nodes()
            .iter()
            .map(|n| self.initial_inventory.get(&n.id).copied().unwrap_or(0.0))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimState {
    pub t: usize,
    /// On-hand stock per node (zero for raw sources and markets).
    pub on_hand: Vec<f64>,
    /// Per reorder edge, filled orders in transit; the front arrives next period.
    pub pipeline: Vec<VecDeque<f64>>,
    /// Per reorder edge pipeline total `Y`.
    pub in_transit: Vec<f64>,
    pub unfulfilled_prev: Vec<f64>,
    pub demand_prev: Vec<f64>,
    pub goodwill: GoodwillState,
    /// One demand stream per retail edge.
    pub rngs: Vec<RngStream>,
}

impl SimState {
    pub fn initial(cfg: &EpisodeConfig, seed: u64) -> Self {
        let topo = &cfg.topology;
        let pipeline = topo
            .reorder_edges()
            .iter()
            .map(|e| VecDeque::from(vec![0.0; e.lead_time as usize]))
            .collect();
        let n_retail = topo.num_retail();
        Self {
            t: 0,
            on_hand: cfg.initial_on_hand(),
            pipeline,
            in_transit: vec![0.0; topo.num_reorder()],
            unfulfilled_prev: vec![0.0; n_retail],
            demand_prev: vec![0.0; n_retail],
            goodwill: GoodwillState::new(cfg.goodwill, cfg.goodwill_enabled),
            rngs: topo
                .retail_edges()
                .iter()
                .map(|e| RngStream::named(seed, &e.id))
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct RewardTerms {
    pub sales_revenue: f64,
    pub procurement: f64,
    pub holding: f64,
    pub pipeline_holding: f64,
    pub operating: f64,
    pub shortage: f64,
    pub fixed_order: f64,
}

impl RewardTerms {
    /// Undiscounted `SR - PC - HC - PHC - OC - SP - FK`.
    pub fn net(&self) -> f64 {
        self.sales_revenue
            - self.procurement
            - self.holding
            - self.pipeline_holding
            - self.operating
            - self.shortage
            - self.fixed_order
    }

    pub fn accumulate(&mut self, other: &Self) {
        self.sales_revenue += other.sales_revenue;
        self.procurement += other.procurement;
        self.holding += other.holding;
        self.pipeline_holding += other.pipeline_holding;
        self.operating += other.operating;
        self.shortage += other.shortage;
        self.fixed_order += other.fixed_order;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepResult {
    pub t: usize,
    /// `α^t · terms.net()`.
    pub reward: f64,
    pub terms: RewardTerms,
    /// Raw requests `a_t` as submitted.
    pub requests: Vec<f64>,
    /// Filled orders `R_t`; also the shipments on reorder edges.
    pub filled: Vec<f64>,
    pub retail_shipments: Vec<f64>,
    pub demand: Vec<f64>,
    /// `D̃_t`: demand plus carried backlog in backlog mode.
    pub effective_demand: Vec<f64>,
    pub unfulfilled: Vec<f64>,
    /// Sentiment used for this period's draw.
    pub sentiment: f64,
    pub done: bool,
}

/// Units a supplier node can release this period before contention.
fn supply_available(node: &NodeSpec, on_hand: f64) -> f64 {
    match node.kind {
        NodeKind::RawSource => f64::INFINITY,
        NodeKind::Factory => node
            .production_capacity
            .unwrap_or(f64::INFINITY)
            .min(node.yield_factor * on_hand),
        _ => on_hand,
    }
}

/// Per-edge feasible supply bound `κ` for the reorder edge at action position `pos`.
pub fn feasible_bound(topo: &Topology, on_hand: &[f64], pos: usize) -> f64 {
    let (from, _) = topo.reorder_endpoints(pos);
    supply_available(topo.node(from), on_hand[from])
}

/// Clamp requests at zero and allocate them against supplier stock,
/// capacity and yield. Requests that jointly exceed a supplier's bound are
/// rationed proportionally. Supplier stock is decremented by `R / v`.
pub fn fill_orders(topo: &Topology, on_hand: &mut [f64], requests: &[f64]) -> Result<Vec<f64>, EnvError> {
    let n_edges = topo.num_reorder();
    if requests.len() != n_edges {
        return Err(EnvError::ActionLength {
            expected: n_edges,
            got: requests.len(),
        });
    }
    if let Some(i) = requests.iter().position(|a| !a.is_finite()) {
        return Err(EnvError::NonFiniteAction(i));
    }
    let clamped: Vec<f64> = requests.iter().map(|a| a.max(0.0)).collect();
    let mut asked = vec![0.0; on_hand.len()];
    for (pos, r) in clamped.iter().enumerate() {
        asked[topo.reorder_endpoints(pos).0] += r;
    }
    let scale: Vec<f64> = asked
        .iter()
        .enumerate()
        .map(|(i, &total)| {
            let avail = supply_available(topo.node(i), on_hand[i]);
            if total > avail && total > 0.0 {
                avail / total
            } else {
                1.0
            }
        })
        .collect();
    let filled: Vec<f64> = clamped
        .iter()
        .enumerate()
        .map(|(pos, r)| r * scale[topo.reorder_endpoints(pos).0])
        .collect();
    let mut released = vec![0.0; on_hand.len()];
    for (pos, r) in filled.iter().enumerate() {
        released[topo.reorder_endpoints(pos).0] += r;
    }
    for (i, node) in topo.nodes().iter().enumerate() {
        if node.kind.is_managed() && released[i] > 0.0 {
            on_hand[i] = (on_hand[i] - released[i] / node.yield_factor).max(0.0);
        }
    }
    Ok(filled)
}

/// Advance `state` by one period under `action`.
pub fn transition(cfg: &EpisodeConfig, state: &mut SimState, action: &[f64]) -> Result<StepResult, EnvError> {
    if state.t >= cfg.horizon {
        return Err(EnvError::EpisodeDone);
    }
    let topo = &*cfg.topology;
    let t = state.t;

    // (1) feasible fills
    let filled = fill_orders(topo, &mut state.on_hand, action)?;

    // (2) arrivals and pipeline shift
    for (pos, &r) in filled.iter().enumerate() {
        let queue = &mut state.pipeline[pos];
        queue.push_back(r);
        let arrived = queue.pop_front().expect("queue holds at least the new fill");
        let (_, to) = topo.reorder_endpoints(pos);
        state.on_hand[to] += arrived;
        state.in_transit[pos] += r - arrived;
    }

    // (3) goodwill from last period's service; period 0 has no predecessor.
    if t > 0 {
        let stockout = state.unfulfilled_prev.iter().sum::<f64>() > 0.0;
        state.goodwill = state.goodwill.update(stockout);
    }
    let sentiment = state.goodwill.sentiment;

    // (4) demand and retail fulfilment
    let n_retail = topo.num_retail();
    let mut demand = Vec::with_capacity(n_retail);
    let mut effective = Vec::with_capacity(n_retail);
    for (k, model) in cfg.demand.iter().enumerate() {
        let lambda = state.goodwill.effective_mean(model.exogenous_mean(t)?);
        let d = draw_demand(model, lambda, &mut state.rngs[k]);
        let carried = match cfg.fulfillment {
            Fulfillment::Backlog => state.unfulfilled_prev[k],
            Fulfillment::LostSales => 0.0,
        };
        demand.push(d);
        effective.push(d + carried);
    }
    let mut wanted = vec![0.0; topo.nodes().len()];
    for (k, d) in effective.iter().enumerate() {
        wanted[topo.retail_source(k)] += d;
    }
    let mut shipments = vec![0.0; n_retail];
    let mut unfulfilled = vec![0.0; n_retail];
    for k in 0..n_retail {
        let j = topo.retail_source(k);
        let share = if wanted[j] > state.on_hand[j] && wanted[j] > 0.0 {
            state.on_hand[j] / wanted[j]
        } else {
            1.0
        };
        shipments[k] = effective[k] * share;
        unfulfilled[k] = (effective[k] - shipments[k]).max(0.0);
    }
    for k in 0..n_retail {
        let j = topo.retail_source(k);
        let v = topo.node(j).yield_factor;
        state.on_hand[j] = (state.on_hand[j] - shipments[k] / v).max(0.0);
    }

    // (5) reward on post-step stocks
    let terms = reward_terms(topo, state, &filled, &shipments, &unfulfilled);
    let reward = cfg.discount.powi(t as i32) * terms.net();

    state.unfulfilled_prev = unfulfilled.clone();
    state.demand_prev = demand.clone();
    state.t += 1;

    Ok(StepResult {
        t,
        reward,
        terms,
        requests: action.to_vec(),
        filled,
        retail_shipments: shipments,
        demand,
        effective_demand: effective,
        unfulfilled,
        sentiment,
        done: state.t >= cfg.horizon,
    })
}

fn reward_terms(
    topo: &Topology,
    state: &SimState,
    filled: &[f64],
    shipments: &[f64],
    unfulfilled: &[f64],
) -> RewardTerms {
    let mut terms = RewardTerms::default();
    for (pos, &r) in filled.iter().enumerate() {
        let edge = topo.reorder_edge(pos);
        let (from, _) = topo.reorder_endpoints(pos);
        let supplier = topo.node(from);
        if supplier.kind.is_managed() {
            terms.sales_revenue += edge.unit_price * r;
            terms.operating += supplier.operating_cost / supplier.yield_factor * r;
        }
        terms.procurement += edge.unit_price * r;
        terms.pipeline_holding += edge.pipeline_holding * state.in_transit[pos];
        if r > 0.0 {
            terms.fixed_order += edge.fixed_order_cost;
        }
    }
    for (k, (&s, &u)) in shipments.iter().zip(unfulfilled).enumerate() {
        let edge = topo.retail_edge(k);
        let retailer = topo.node(topo.retail_source(k));
        terms.sales_revenue += edge.unit_price * s;
        terms.operating += retailer.operating_cost / retailer.yield_factor * s;
        terms.shortage += edge.shortage_penalty * u;
    }
    for (j, node) in topo.nodes().iter().enumerate() {
        if node.kind.is_managed() {
            terms.holding += node.holding_cost * state.on_hand[j];
        }
    }
    terms
}

/// An episode: config, live state and the audit ledger.
#[derive(Debug, Clone)]
pub struct CoreEnv {
    cfg: EpisodeConfig,
    layout: Arc<ObservationLayout>,
    state: SimState,
    record: EpisodeRecord,
    seed: u64,
}

impl CoreEnv {
    pub fn new(cfg: EpisodeConfig, seed: u64) -> Result<Self, EnvError> {
        cfg.validate()?;
        let layout = Arc::new(ObservationLayout::new(&cfg));
        let state = SimState::initial(&cfg, seed);
        let record = EpisodeRecord::new(&cfg, &state);
        Ok(Self {
            cfg,
            layout,
            state,
            record,
            seed,
        })
    }

    /// Restart from period 0 with `seed`; returns the first observation.
    pub fn reset(&mut self, seed: u64) -> Observation {
        self.seed = seed;
        self.state = SimState::initial(&self.cfg, seed);
        self.record = EpisodeRecord::new(&self.cfg, &self.state);
        self.observe()
    }

    pub fn step(&mut self, action: &[f64]) -> Result<(Observation, StepResult), EnvError> {
        let result = transition(&self.cfg, &mut self.state, action)?;
        self.record.push(&result, &self.state);
        Ok((self.observe(), result))
    }

    pub fn observe(&self) -> Observation {
        Observation::build(&self.cfg, &self.layout, &self.state)
    }

    pub fn config(&self) -> &EpisodeConfig {
        &self.cfg
    }

    pub fn layout(&self) -> &Arc<ObservationLayout> {
        &self.layout
    }

    pub fn state(&self) -> &SimState {
        &self.state
    }

    pub fn record(&self) -> &EpisodeRecord {
        &self.record
    }

    pub fn into_record(self) -> EpisodeRecord {
        self.record
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn is_done(&self) -> bool {
        self.state.t >= self.cfg.horizon
    }

    /// Replace the live state, e.g. to branch a planner audit from mid-episode.
    pub fn set_state(&mut self, state: SimState) {
        self.state = state;
    }
}
