//! Planning LP over a scenario tree that mirrors the simulator's material
//! balance, pipeline shift, supply caps, fulfilment and reward exactly.

use std::sync::Arc;

use super::lp::{Cmp, LinearProgram, LpSolution, VarId};
use super::tree::ScenarioTree;
use super::PlanError;
use crate::env::{Fulfillment, Observation, SimState};
use crate::topology::{NodeKind, Topology};

/// Economics and mode shared by every plan in an episode.
#[derive(Debug, Clone)]
pub struct PlanEconomics {
    pub topology: Arc<Topology>,
    pub fulfillment: Fulfillment,
    pub discount: f64,
}

/// Initial conditions of a plan at absolute period `t0`.
#[derive(Debug, Clone, PartialEq)]
pub struct PlanStart {
    pub t0: usize,
    pub on_hand: Vec<f64>,
    /// Per reorder edge, in-transit amounts; entry 0 arrives in period `t0`.
    pub pipeline: Vec<Vec<f64>>,
    pub unfulfilled_prev: Vec<f64>,
}

impl PlanStart {
    pub fn from_state(state: &SimState) -> Self {
        Self {
            t0: state.t,
            on_hand: state.on_hand.clone(),
            pipeline: state.pipeline.iter().map(|q| q.iter().copied().collect()).collect(),
            unfulfilled_prev: state.unfulfilled_prev.clone(),
        }
    }

    pub fn from_observation(obs: &Observation, topo: &Topology) -> Self {
        Self {
            t0: obs.t,
            on_hand: obs.on_hand().to_vec(),
            pipeline: (0..topo.num_reorder())
                .map(|p| obs.pipeline(p)[..topo.reorder_edge(p).lead_time as usize].to_vec())
                .collect(),
            unfulfilled_prev: obs.unfulfilled_prev().to_vec(),
        }
    }
}

/// A built planning LP and the variable map needed to read it back.
#[derive(Debug, Clone)]
pub struct PlanModel {
    pub lp: LinearProgram,
    pub tree: ScenarioTree,
    /// Per tree node above the leaves: filled orders for the node's period.
    pub orders: Vec<Vec<VarId>>,
    /// Per tree node below the root, per topology node: post-step stock.
    pub stock: Vec<Vec<Option<VarId>>>,
    pub shipments: Vec<Vec<VarId>>,
    pub unfulfilled: Vec<Vec<VarId>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlanSolution {
    /// Expected discounted profit over the planning horizon.
    pub objective: f64,
    /// Orders at the root: the only decision a rolling planner executes.
    pub first_action: Vec<f64>,
    /// Orders along the first scenario path, one vector per period.
    pub path_actions: Vec<Vec<f64>>,
    pub max_residual: f64,
}

/// Check features the LP cannot represent exactly.
pub fn check_supported(topo: &Topology) -> Result<(), PlanError> {
    if let Some(e) = topo.edges().iter().find(|e| e.fixed_order_cost > 0.0) {
        return Err(PlanError::Unsupported(format!(
            "fixed ordering cost on `{}` needs integer variables",
            e.id
        )));
    }
    let mut per_retailer = vec![0usize; topo.nodes().len()];
    for k in 0..topo.num_retail() {
        per_retailer[topo.retail_source(k)] += 1;
    }
    if let Some(j) = per_retailer.iter().position(|&c| c > 1) {
        return Err(PlanError::Unsupported(format!(
            "retailer `{}` serves several markets; proportional rationing is not linear",
            topo.node(j).id
        )));
    }
    Ok(())
}

pub fn build_plan(econ: &PlanEconomics, start: &PlanStart, tree: ScenarioTree) -> Result<PlanModel, PlanError> {
    let topo = &*econ.topology;
    check_supported(topo)?;
    let n_nodes = topo.nodes().len();
    let n_edges = topo.num_reorder();
    let n_retail = topo.num_retail();
    if tree.n_retail() != n_retail {
        return Err(PlanError::InvalidTree(format!(
            "tree has {} demand columns for {n_retail} retail edges",
            tree.n_retail()
        )));
    }
    if start.on_hand.len() != n_nodes
        || start.pipeline.len() != n_edges
        || start.unfulfilled_prev.len() != n_retail
        || (0..n_edges).any(|p| start.pipeline[p].len() != topo.reorder_edge(p).lead_time as usize)
    {
        return Err(PlanError::InvalidStart);
    }
    let h = tree.stages();
    let alpha = |tau: usize| econ.discount.powi((start.t0 + tau) as i32);
    let backlog = econ.fulfillment == Fulfillment::Backlog;

    let mut lp = LinearProgram::new();
    let tn = tree.nodes().len();
    let mut orders: Vec<Vec<VarId>> = vec![Vec::new(); tn];
    let mut stock: Vec<Vec<Option<VarId>>> = vec![Vec::new(); tn];
    let mut shipments: Vec<Vec<VarId>> = vec![Vec::new(); tn];
    let mut unfulfilled: Vec<Vec<VarId>> = vec![Vec::new(); tn];

    // Variables, in tree order.
    for (n, node) in tree.nodes().iter().enumerate() {
        let pi = node.probability;
        if node.depth < h {
            let tau = node.depth;
            for pos in 0..n_edges {
                let edge = topo.reorder_edge(pos);
                let (from, _) = topo.reorder_endpoints(pos);
                let supplier = topo.node(from);
                let mut c = -edge.unit_price;
                if supplier.kind.is_managed() {
                    c += edge.unit_price - supplier.operating_cost / supplier.yield_factor;
                }
                let mut coeff = pi * alpha(tau) * c;
                let last = (tau + edge.lead_time as usize).min(h);
                for t2 in tau..last {
                    coeff -= pi * alpha(t2) * edge.pipeline_holding;
                }
                orders[n].push(lp.add_var(format!("R[{n}][{}]", edge.id), 0.0, f64::INFINITY, coeff));
            }
        }
        if node.depth >= 1 {
            let tau = node.depth - 1;
            let w = pi * alpha(tau);
            stock[n] = topo
                .nodes()
                .iter()
                .map(|spec| {
                    spec.kind.is_managed().then(|| {
                        lp.add_var(
                            format!("X[{n}][{}]", spec.id),
                            0.0,
                            f64::INFINITY,
                            -w * spec.holding_cost,
                        )
                    })
                })
                .collect();
            for k in 0..n_retail {
                let edge = topo.retail_edge(k);
                let retailer = topo.node(topo.retail_source(k));
                let margin = edge.unit_price - retailer.operating_cost / retailer.yield_factor;
                shipments[n].push(lp.add_var(format!("S[{n}][{}]", edge.id), 0.0, f64::INFINITY, w * margin));
                unfulfilled[n].push(lp.add_var(
                    format!("U[{n}][{}]", edge.id),
                    0.0,
                    f64::INFINITY,
                    -w * edge.shortage_penalty,
                ));
            }
        }
    }

    // Pipeline holding on amounts already in transit at t0.
    for pos in 0..n_edges {
        let g = topo.reorder_edge(pos).pipeline_holding;
        let q = &start.pipeline[pos];
        for tau in 0..h {
            let still: f64 = q.iter().skip(tau + 1).sum();
            lp.objective_constant += alpha(tau) * g * still;
        }
    }
    lp.objective_constant = -lp.objective_constant;

    for (n, node) in tree.nodes().iter().enumerate() {
        // Supply caps on this node's orders, against start-of-period stock.
        if node.depth < h {
            for i in 0..n_nodes {
                let spec = topo.node(i);
                if !spec.kind.is_managed() {
                    continue;
                }
                let out: Vec<(VarId, f64)> = (0..n_edges)
                    .filter(|&p| topo.reorder_endpoints(p).0 == i)
                    .map(|p| (orders[n][p], 1.0))
                    .collect();
                if out.is_empty() {
                    continue;
                }
                let factor = if spec.kind == NodeKind::Factory {
                    spec.yield_factor
                } else {
                    1.0
                };
                let mut terms = out.clone();
                let rhs = if node.depth == 0 {
                    factor * start.on_hand[i]
                } else {
                    terms.push((stock[n][i].expect("managed"), -factor));
                    0.0
                };
                lp.add_constraint(format!("supply[{n}][{}]", spec.id), terms, Cmp::Le, rhs);
                if spec.kind == NodeKind::Factory {
                    if let Some(cap) = spec.production_capacity {
                        lp.add_constraint(format!("capacity[{n}][{}]", spec.id), out, Cmp::Le, cap);
                    }
                }
            }
        }
        if node.depth == 0 {
            continue;
        }
        let tau = node.depth - 1;
        let parent = node.parent.expect("non-root");
        let lineage = tree.lineage(n);

        // Material balance per managed node.
        for j in 0..n_nodes {
            let spec = topo.node(j);
            if !spec.kind.is_managed() {
                continue;
            }
            let v = spec.yield_factor;
            let mut terms = vec![(stock[n][j].expect("managed"), 1.0)];
            let mut rhs = 0.0;
            if tau == 0 {
                rhs += start.on_hand[j];
            } else {
                terms.push((stock[parent][j].expect("managed"), -1.0));
            }
            for pos in 0..n_edges {
                let (from, to) = topo.reorder_endpoints(pos);
                if from == j {
                    terms.push((orders[parent][pos], 1.0 / v));
                }
                if to == j {
                    let lead = topo.reorder_edge(pos).lead_time as usize;
                    if tau < lead {
                        rhs += start.pipeline[pos][tau];
                    } else {
                        terms.push((orders[lineage[tau - lead]][pos], -1.0));
                    }
                }
            }
            for k in 0..n_retail {
                if topo.retail_source(k) == j {
                    terms.push((shipments[n][k], 1.0 / v));
                }
            }
            lp.add_constraint(format!("balance[{n}][{}]", spec.id), terms, Cmp::Eq, rhs);
        }

        // Retail demand is either shipped or left unfulfilled.
        for k in 0..n_retail {
            let mut terms = vec![(shipments[n][k], 1.0), (unfulfilled[n][k], 1.0)];
            let mut rhs = node.demand[k];
            if backlog {
                if tau == 0 {
                    rhs += start.unfulfilled_prev[k];
                } else {
                    terms.push((unfulfilled[parent][k], -1.0));
                }
            }
            lp.add_constraint(format!("demand[{n}][{}]", topo.retail_edge(k).id), terms, Cmp::Eq, rhs);
        }
    }

    Ok(PlanModel {
        lp,
        tree,
        orders,
        stock,
        shipments,
        unfulfilled,
    })
}

impl PlanModel {
    pub fn solve(&self) -> Result<PlanSolution, PlanError> {
        let sol: LpSolution = self.lp.solve()?;
        let read = |vars: &[VarId]| vars.iter().map(|&v| sol.value(v).max(0.0)).collect::<Vec<f64>>();
        let mut path_actions = Vec::new();
        let mut n = 0;
        loop {
            if self.orders[n].is_empty() {
                break;
            }
            path_actions.push(read(&self.orders[n]));
            match self.tree.node(n).children.first() {
                Some(&c) => n = c,
                None => break,
            }
        }
        Ok(PlanSolution {
            objective: sol.objective,
            first_action: read(&self.orders[0]),
            path_actions,
            max_residual: sol.max_residual,
        })
    }
}
