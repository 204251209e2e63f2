use serde::{Deserialize, Serialize};

use super::estimate::{critical_ratio, estimate_demand, poisson_quantile, DemandEstimate, Holt};
use super::{Agent, AgentError, AgentSetup, DemandHistory, NetworkView};
use crate::env::{Fulfillment, InfoTier, Observation};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HeuristicKind {
    Newsvendor,
    Ss,
    ExpSmooth,
    Echelon,
}

impl HeuristicKind {
    pub const ALL: [HeuristicKind; 4] = [Self::Newsvendor, Self::Ss, Self::ExpSmooth, Self::Echelon];

    pub fn name(self) -> &'static str {
        match self {
            Self::Newsvendor => "newsvendor",
            Self::Ss => "ss",
            Self::ExpSmooth => "expsmooth",
            Self::Echelon => "echelon",
        }
    }
}

pub fn order_up_to(target: f64, position: f64) -> f64 {
    (target - position).max(0.0)
}

/// `(s, S)` rule: below the reorder point, order up to `S`.
pub fn reorder_point_order(s: f64, big_s: f64, position: f64) -> f64 {
    if position < s {
        (big_s - position).max(0.0)
    } else {
        0.0
    }
}

/// Newsvendor, (s,S), Holt and echelon base-stock controllers.
///
/// The first three set per-node targets on local inventory position and pass
/// this period's downstream requests upstream: a node's position is reduced
/// by what its successors just asked it for. Echelon base-stock instead
/// orders on echelon position (own stock and pipeline plus everything
/// downstream, less backlog).
#[derive(Debug, Clone)]
pub struct HeuristicAgent {
    id: String,
    kind: HeuristicKind,
    tier: InfoTier,
    setup: AgentSetup,
    view: NetworkView,
    history: DemandHistory,
}

impl HeuristicAgent {
    pub fn new(kind: HeuristicKind, tier: InfoTier, setup: AgentSetup) -> Self {
        let id = match tier {
            InfoTier::Blind => kind.name().to_owned(),
            _ => format!("{}-I", kind.name()),
        };
        Self {
            id,
            kind,
            tier,
            view: NetworkView::new(setup.topology.clone()),
            setup,
            history: DemandHistory::default(),
        }
    }

    fn retail_estimates(&self, obs: &Observation) -> Result<Vec<DemandEstimate>, AgentError> {
        let n = self.setup.topology.num_retail();
        (0..n)
            .map(|k| {
                let informed = match (&obs.context, self.tier) {
                    (_, InfoTier::Blind) => None,
                    (Some(ctx), _) => Some(obs.sentiment() * ctx.exogenous_mean[k]),
                    (None, _) => return Err(AgentError::MissingContext),
                };
                estimate_demand(
                    self.history.edge(k),
                    self.tier,
                    informed,
                    self.setup.heuristics.prior_mean,
                )
            })
            .collect()
    }

    /// Per-edge `(mean, std)` of demand over `periods` future periods, starting now.
    fn lead_time_demand(&self, obs: &Observation, est: &[DemandEstimate], periods: f64) -> Vec<(f64, f64)> {
        let p = &self.setup.heuristics;
        let whole = periods.floor() as usize;
        let frac = periods - whole as f64;
        let sum_path = |f: &dyn Fn(usize) -> f64| (1..=whole).map(f).sum::<f64>() + frac * f(whole + 1);
        est.iter()
            .enumerate()
            .map(|(k, e)| {
                if self.kind != HeuristicKind::ExpSmooth {
                    return (e.mean * periods, e.std * periods.sqrt());
                }
                match (&obs.context, self.tier) {
                    (Some(ctx), InfoTier::Informed | InfoTier::NonCausal) => {
                        let model = &ctx.models[k];
                        let s = obs.sentiment();
                        let f = |h: usize| s * model.exogenous_mean(obs.t + h - 1).unwrap_or(model.base_mean);
                        let m = sum_path(&f);
                        (m, m.sqrt())
                    }
                    _ => {
                        let m = match Holt::fit(self.history.edge(k), p.holt_alpha, p.holt_beta) {
                            Some(h) => sum_path(&|step| h.forecast(step).max(0.0)),
                            None => e.mean * periods,
                        };
                        (m, e.std * periods.sqrt())
                    }
                }
            })
            .collect()
    }

    /// Aggregate retail-edge moments into node stock units.
    fn node_moments(&self, j: usize, per_edge: &[(f64, f64)]) -> (f64, f64) {
        let w = &self.view.throughput[j];
        let mean = per_edge.iter().zip(w).map(|((m, _), w)| w * m).sum();
        let var: f64 = per_edge.iter().zip(w).map(|((_, s), w)| (w * s).powi(2)).sum();
        (mean, var.sqrt())
    }

    fn backlog(&self, obs: &Observation, j: usize) -> f64 {
        match self.setup.fulfillment {
            Fulfillment::Backlog => self.view.retail[j].iter().map(|&k| obs.unfulfilled_prev()[k]).sum(),
            Fulfillment::LostSales => 0.0,
        }
    }

    fn local_position(&self, obs: &Observation, j: usize) -> f64 {
        obs.on_hand()[j] + self.view.inbound[j].iter().map(|&p| obs.in_transit(p)).sum::<f64>() - self.backlog(obs, j)
    }

    fn echelon_position(&self, obs: &Observation, j: usize) -> f64 {
        let w = &self.view.echelon_weight[j];
        (0..w.len())
            .filter(|&d| w[d] != 0.0)
            .map(|d| w[d] * self.local_position(obs, d))
            .sum()
    }
}

impl Agent for HeuristicAgent {
    fn id(&self) -> &str {
        &self.id
    }

    fn tier(&self) -> InfoTier {
        self.tier
    }

    fn reset(&mut self) {
        self.history.clear();
    }

    fn act(&mut self, obs: &Observation) -> Result<Vec<f64>, AgentError> {
        let topo = &self.setup.topology;
        if obs.on_hand().len() != topo.nodes().len() || obs.demand_prev().len() != topo.num_retail() {
            return Err(AgentError::LayoutMismatch);
        }
        self.history.observe(obs);
        let est = self.retail_estimates(obs)?;
        let z = self.setup.heuristics.z;
        let b = self.view.shortage_penalty();
        let mut action = vec![0.0; topo.num_reorder()];
        for j in self.view.ordering_nodes() {
            let node = topo.node(j);
            let q = if self.kind == HeuristicKind::Echelon {
                let periods = self.view.echelon_periods(j);
                let (m, s) = self.node_moments(j, &self.lead_time_demand(obs, &est, periods));
                order_up_to(m + z * s, self.echelon_position(obs, j))
            } else {
                let periods = self.view.protection_periods(j);
                let released: f64 = self.view.outbound[j].iter().map(|&p| action[p]).sum();
                let position = self.local_position(obs, j) - released / node.yield_factor;
                let (m, s) = self.node_moments(j, &self.lead_time_demand(obs, &est, periods));
                match self.kind {
                    HeuristicKind::Newsvendor => {
                        let ratio = critical_ratio(b, node.holding_cost)?;
                        order_up_to(poisson_quantile(m, ratio), position)
                    }
                    HeuristicKind::Ss => {
                        let per_period: Vec<(f64, f64)> = est.iter().map(|e| (e.mean, e.std)).collect();
                        let (mu, _) = self.node_moments(j, &per_period);
                        let s_point = m + z * s;
                        let batch = self.setup.heuristics.batch_periods * mu;
                        reorder_point_order(s_point, s_point + batch, position)
                    }
                    _ => order_up_to(m + z * s, position),
                }
            };
            let inbound = &self.view.inbound[j];
            for &p in inbound {
                action[p] = q / inbound.len() as f64;
            }
        }
        Ok(action)
    }
}
