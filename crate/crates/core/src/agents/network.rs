use std::sync::Arc;

use crate::topology::{NodeKind, Topology};

/// Static per-node quantities shared by the graph-aware heuristics.
///
/// Every node's stock is measured in its own units; a factory's stock is
/// input material, so one unit of its output costs `1/v` units of stock.
/// Replenishment is split equally across a node's inbound reorder edges.
#[derive(Debug, Clone)]
pub struct NetworkView {
    pub topology: Arc<Topology>,
    /// Reorder positions into each node.
    pub inbound: Vec<Vec<usize>>,
    /// Reorder positions out of each node.
    pub outbound: Vec<Vec<usize>>,
    /// Retail-edge positions served by each node.
    pub retail: Vec<Vec<usize>>,
    /// `[node][k]`: stock units consumed at the node per unit of demand on retail edge `k`.
    pub throughput: Vec<Vec<f64>>,
    /// `[j][d]`: units of `j`'s stock embodied in one unit of `d`'s stock; 1 on the diagonal.
    pub echelon_weight: Vec<Vec<f64>>,
    pub mean_inbound_lead: Vec<f64>,
    /// Average periods from a node's stock to the market, through successors.
    /// Each hop counts its lead time plus the period the goods wait at the
    /// successor, since requests are filled from stock on hand before arrivals.
    pub downstream_transit: Vec<f64>,
}

impl NetworkView {
    pub fn new(topology: Arc<Topology>) -> Self {
        let topo = &*topology;
        let n = topo.nodes().len();
        let n_retail = topo.num_retail();
        let mut inbound = vec![Vec::new(); n];
        let mut outbound = vec![Vec::new(); n];
        for pos in 0..topo.num_reorder() {
            let (from, to) = topo.reorder_endpoints(pos);
            outbound[from].push(pos);
            inbound[to].push(pos);
        }
        let mut retail = vec![Vec::new(); n];
        for k in 0..n_retail {
            retail[topo.retail_source(k)].push(k);
        }

        let mut throughput = vec![vec![0.0; n_retail]; n];
        let mut echelon_weight = vec![vec![0.0; n]; n];
        let mut downstream_transit = vec![0.0; n];
        for &j in topo.node_order().iter().rev() {
            let v = topo.node(j).yield_factor;
            echelon_weight[j][j] = 1.0;
            for &k in &retail[j] {
                throughput[j][k] += 1.0 / v;
            }
            let mut transit = 0.0;
            for &pos in &outbound[j] {
                let (_, c) = topo.reorder_endpoints(pos);
                let share = 1.0 / inbound[c].len() as f64 / v;
                for k in 0..n_retail {
                    throughput[j][k] += share * throughput[c][k];
                }
                for d in 0..n {
                    let w = echelon_weight[c][d];
                    if w != 0.0 {
                        echelon_weight[j][d] += share * w;
                    }
                }
                transit += topo.reorder_edge(pos).lead_time as f64 + 1.0 + downstream_transit[c];
            }
            if !outbound[j].is_empty() {
                downstream_transit[j] = transit / outbound[j].len() as f64;
            }
        }
        let mean_inbound_lead = inbound
            .iter()
            .map(|edges| {
                if edges.is_empty() {
                    0.0
                } else {
                    edges
                        .iter()
                        .map(|&p| topo.reorder_edge(p).lead_time as f64)
                        .sum::<f64>()
                        / edges.len() as f64
                }
            })
            .collect();
        Self {
            topology,
            inbound,
            outbound,
            retail,
            throughput,
            echelon_weight,
            mean_inbound_lead,
            downstream_transit,
        }
    }

    /// Managed nodes that place orders, most downstream first.
    pub fn ordering_nodes(&self) -> Vec<usize> {
        self.topology
            .node_order()
            .iter()
            .rev()
            .copied()
            .filter(|&j| self.topology.node(j).kind.is_managed() && !self.inbound[j].is_empty())
            .collect()
    }

    /// Review period plus mean inbound lead time.
    pub fn protection_periods(&self, j: usize) -> f64 {
        self.mean_inbound_lead[j] + 1.0
    }

    /// Review period plus cumulative lead time to the market.
    pub fn echelon_periods(&self, j: usize) -> f64 {
        self.mean_inbound_lead[j] + self.downstream_transit[j] + 1.0
    }

    pub fn is_retailer(&self, j: usize) -> bool {
        self.topology.node(j).kind == NodeKind::Retailer
    }

    /// Average retail shortage penalty, the underage cost for every node.
    pub fn shortage_penalty(&self) -> f64 {
        let edges = self.topology.retail_edges();
        if edges.is_empty() {
            return 0.0;
        }
        edges.iter().map(|e| e.shortage_penalty).sum::<f64>() / edges.len() as f64
    }
}
