//! Supply-chain graphs and their economics.
//!
//! A [`Topology`] is validated once and is immutable afterwards. Reorder edges
//! are kept in a fixed total order (topological by target node, then edge id)
//! which defines the action-vector layout everywhere in the crate.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeKind {
    RawSource,
    Factory,
    Distributor,
    Retailer,
    Market,
}

impl NodeKind {
    /// Retailers, distributors and factories accrue reward terms.
    pub fn is_managed(self) -> bool {
        matches!(self, Self::Factory | Self::Distributor | Self::Retailer)
    }
}

impl fmt::Display for NodeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Self::RawSource => "raw_source",
            Self::Factory => "factory",
            Self::Distributor => "distributor",
            Self::Retailer => "retailer",
            Self::Market => "market",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeKind {
    Reorder,
    RetailDemand,
}

fn one() -> f64 {
    1.0
}

fn is_one(v: &f64) -> bool {
    *v == 1.0
}

fn is_zero(v: &f64) -> bool {
    *v == 0.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeSpec {
    pub id: String,
    pub kind: NodeKind,
    #[serde(default, skip_serializing_if = "is_zero")]
    pub holding_cost: f64,
    #[serde(default, skip_serializing_if = "is_zero")]
    pub operating_cost: f64,
    #[serde(rename = "yield", default = "one", skip_serializing_if = "is_one")]
    pub yield_factor: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub production_capacity: Option<f64>,
}

impl NodeSpec {
    pub fn new(id: impl Into<String>, kind: NodeKind) -> Self {
        Self {
            id: id.into(),
            kind,
            holding_cost: 0.0,
            operating_cost: 0.0,
            yield_factor: 1.0,
            production_capacity: None,
        }
    }

    pub fn holding(mut self, h: f64) -> Self {
        self.holding_cost = h;
        self
    }

    pub fn operating(mut self, o: f64) -> Self {
        self.operating_cost = o;
        self
    }

    pub fn yield_factor(mut self, v: f64) -> Self {
        self.yield_factor = v;
        self
    }

    pub fn capacity(mut self, c: f64) -> Self {
        self.production_capacity = Some(c);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeSpec {
    pub id: String,
    pub from: String,
    pub to: String,
    pub kind: EdgeKind,
    #[serde(default)]
    pub lead_time: u32,
    #[serde(default)]
    pub unit_price: f64,
    #[serde(default, skip_serializing_if = "is_zero")]
    pub pipeline_holding: f64,
    #[serde(default, skip_serializing_if = "is_zero")]
    pub shortage_penalty: f64,
    #[serde(default, skip_serializing_if = "is_zero")]
    pub fixed_order_cost: f64,
}

impl EdgeSpec {
    pub fn reorder(
        id: impl Into<String>,
        from: impl Into<String>,
        to: impl Into<String>,
        lead_time: u32,
        unit_price: f64,
        pipeline_holding: f64,
    ) -> Self {
        Self {
            id: id.into(),
            from: from.into(),
            to: to.into(),
            kind: EdgeKind::Reorder,
            lead_time,
            unit_price,
            pipeline_holding,
            shortage_penalty: 0.0,
            fixed_order_cost: 0.0,
        }
    }

    pub fn retail(
        id: impl Into<String>,
        from: impl Into<String>,
        to: impl Into<String>,
        unit_price: f64,
        shortage_penalty: f64,
    ) -> Self {
        Self {
            id: id.into(),
            from: from.into(),
            to: to.into(),
            kind: EdgeKind::RetailDemand,
            lead_time: 0,
            unit_price,
            pipeline_holding: 0.0,
            shortage_penalty,
            fixed_order_cost: 0.0,
        }
    }
}

/// Serialized form of a topology: top-level `name`, `nodes` and `edges`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TopologySpec {
    pub name: String,
    pub nodes: Vec<NodeSpec>,
    pub edges: Vec<EdgeSpec>,
}

#[derive(Debug, Error)]
pub enum TopologyError {
    #[error("failed to parse topology: {0}")]
    Parse(String),
    #[error("duplicate node id `{0}`")]
    DuplicateNode(String),
    #[error("duplicate edge id `{0}`")]
    DuplicateEdge(String),
    #[error("edge `{edge}` references unknown node `{node}`")]
    DanglingNode { edge: String, node: String },
    #[error("reorder edges contain a cycle through `{0}`")]
    ReorderCycle(String),
    #[error("negative {field} on `{id}`")]
    NegativeCost { id: String, field: &'static str },
    #[error("non-finite {field} on `{id}`")]
    NonFinite { id: String, field: &'static str },
    #[error("yield of `{0}` must lie in (0, 1] and differ from 1 only on factories")]
    InvalidYield(String),
    #[error("node `{0}` declares a production capacity but is not a factory")]
    CapacityOnNonFactory(String),
    #[error("{kind} node `{id}` cannot carry holding or operating costs")]
    UnmanagedCosts { id: String, kind: NodeKind },
    #[error("retail edge `{0}` must run from a retailer to a market")]
    BadRetailEdge(String),
    #[error("reorder edge `{0}` must not touch a market or feed a raw source")]
    BadReorderEdge(String),
    #[error("topology needs at least one reorder edge")]
    NoReorderEdges,
    #[error("topology needs at least one retail demand edge")]
    NoRetailEdges,
    #[error("unknown built-in topology `{0}`")]
    UnknownBuiltin(String),
}

/// A validated supply-chain graph.
#[derive(Debug, Clone)]
pub struct Topology {
    spec: TopologySpec,
    node_index: HashMap<String, usize>,
    /// Edge indices of reorder edges in action order.
    reorder: Vec<usize>,
    /// Edge indices of retail-demand edges in declaration order.
    retail: Vec<usize>,
    /// Node indices in topological order (upstream first).
    node_order: Vec<usize>,
    l_max: u32,
}

impl PartialEq for Topology {
    fn eq(&self, other: &Self) -> bool {
        self.spec == other.spec
    }
}

impl Topology {
    pub fn from_spec(spec: TopologySpec) -> Result<Self, TopologyError> {
        let mut node_index = HashMap::new();
        for (i, n) in spec.nodes.iter().enumerate() {
            if node_index.insert(n.id.clone(), i).is_some() {
                return Err(TopologyError::DuplicateNode(n.id.clone()));
            }
            check_finite(&n.id, "holding_cost", n.holding_cost)?;
            check_finite(&n.id, "operating_cost", n.operating_cost)?;
            check_finite(&n.id, "yield", n.yield_factor)?;
            check_nonneg(&n.id, "holding_cost", n.holding_cost)?;
            check_nonneg(&n.id, "operating_cost", n.operating_cost)?;
            if !(n.yield_factor > 0.0 && n.yield_factor <= 1.0)
                || (n.yield_factor != 1.0 && n.kind != NodeKind::Factory)
            {
                return Err(TopologyError::InvalidYield(n.id.clone()));
            }
            if let Some(c) = n.production_capacity {
                if n.kind != NodeKind::Factory {
                    return Err(TopologyError::CapacityOnNonFactory(n.id.clone()));
                }
                check_finite(&n.id, "production_capacity", c)?;
                check_nonneg(&n.id, "production_capacity", c)?;
            }
            if !n.kind.is_managed() && (n.holding_cost != 0.0 || n.operating_cost != 0.0) {
                return Err(TopologyError::UnmanagedCosts {
                    id: n.id.clone(),
                    kind: n.kind,
                });
            }
        }

        let mut edge_ids = HashMap::new();
        let mut reorder = Vec::new();
        let mut retail = Vec::new();
        for (i, e) in spec.edges.iter().enumerate() {
            if edge_ids.insert(e.id.clone(), i).is_some() {
                return Err(TopologyError::DuplicateEdge(e.id.clone()));
            }
            for end in [&e.from, &e.to] {
                if !node_index.contains_key(end) {
                    return Err(TopologyError::DanglingNode {
                        edge: e.id.clone(),
                        node: end.clone(),
                    });
                }
            }
            for (field, v) in [
                ("unit_price", e.unit_price),
                ("pipeline_holding", e.pipeline_holding),
                ("shortage_penalty", e.shortage_penalty),
                ("fixed_order_cost", e.fixed_order_cost),
            ] {
                check_finite(&e.id, field, v)?;
                check_nonneg(&e.id, field, v)?;
            }
            let from = spec.nodes[node_index[&e.from]].kind;
            let to = spec.nodes[node_index[&e.to]].kind;
            match e.kind {
                EdgeKind::RetailDemand => {
                    if from != NodeKind::Retailer
                        || to != NodeKind::Market
                        || e.lead_time != 0
                        || e.pipeline_holding != 0.0
                        || e.fixed_order_cost != 0.0
                    {
                        return Err(TopologyError::BadRetailEdge(e.id.clone()));
                    }
                    retail.push(i);
                }
                EdgeKind::Reorder => {
                    if from == NodeKind::Market || !to.is_managed() || e.shortage_penalty != 0.0 {
                        return Err(TopologyError::BadReorderEdge(e.id.clone()));
                    }
                    reorder.push(i);
                }
            }
        }
        if reorder.is_empty() {
            return Err(TopologyError::NoReorderEdges);
        }
        if retail.is_empty() {
            return Err(TopologyError::NoRetailEdges);
        }

        let node_order = topological_order(&spec, &node_index, &reorder)?;
        let mut rank = vec![0usize; spec.nodes.len()];
        for (r, &n) in node_order.iter().enumerate() {
            rank[n] = r;
        }
        reorder.sort_by(|&a, &b| {
            let (ea, eb) = (&spec.edges[a], &spec.edges[b]);
            rank[node_index[&ea.to]]
                .cmp(&rank[node_index[&eb.to]])
                .then_with(|| ea.id.cmp(&eb.id))
        });
        let l_max = reorder.iter().map(|&i| spec.edges[i].lead_time).max().unwrap_or(0);

        Ok(Self {
            spec,
            node_index,
            reorder,
            retail,
            node_order,
            l_max,
        })
    }

    pub fn name(&self) -> &str {
        &self.spec.name
    }

    pub fn spec(&self) -> &TopologySpec {
        &self.spec
    }

    pub fn nodes(&self) -> &[NodeSpec] {
        &self.spec.nodes
    }

    pub fn edges(&self) -> &[EdgeSpec] {
        &self.spec.edges
    }

    pub fn node(&self, idx: usize) -> &NodeSpec {
        &self.spec.nodes[idx]
    }

    pub fn node_idx(&self, id: &str) -> Option<usize> {
        self.node_index.get(id).copied()
    }

    /// Reorder edges in action order.
    pub fn reorder_edges(&self) -> Vec<&EdgeSpec> {
        self.reorder.iter().map(|&i| &self.spec.edges[i]).collect()
    }

    pub fn retail_edges(&self) -> Vec<&EdgeSpec> {
        self.retail.iter().map(|&i| &self.spec.edges[i]).collect()
    }

    pub fn num_reorder(&self) -> usize {
        self.reorder.len()
    }

    pub fn num_retail(&self) -> usize {
        self.retail.len()
    }

    /// Reorder edge at action position `pos`.
    pub fn reorder_edge(&self, pos: usize) -> &EdgeSpec {
        &self.spec.edges[self.reorder[pos]]
    }

    pub fn retail_edge(&self, pos: usize) -> &EdgeSpec {
        &self.spec.edges[self.retail[pos]]
    }

    /// `(from, to)` node indices of the reorder edge at action position `pos`.
    pub fn reorder_endpoints(&self, pos: usize) -> (usize, usize) {
        let e = self.reorder_edge(pos);
        (self.node_index[&e.from], self.node_index[&e.to])
    }

    /// Retailer node index of the retail edge at position `pos`.
    pub fn retail_source(&self, pos: usize) -> usize {
        self.node_index[&self.retail_edge(pos).from]
    }

    /// Node indices in topological order, upstream first.
    pub fn node_order(&self) -> &[usize] {
        &self.node_order
    }

    pub fn managed_nodes(&self) -> Vec<usize> {
        self.node_order
            .iter()
            .copied()
            .filter(|&n| self.spec.nodes[n].kind.is_managed())
            .collect()
    }

    pub fn l_max(&self) -> u32 {
        self.l_max
    }

    /// Flat observation length `|V| + 2|E_d| + |E_r| L_max + d_F`.
    pub fn observation_dim(&self, feature_dim: usize) -> usize {
        self.spec.nodes.len() + 2 * self.retail.len() + self.reorder.len() * self.l_max as usize + feature_dim
    }

    pub fn to_yaml(&self) -> String {
        serde_yaml::to_string(&self.spec).expect("topology spec serializes")
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.spec).expect("topology spec serializes")
    }
}

fn check_nonneg(id: &str, field: &'static str, v: f64) -> Result<(), TopologyError> {
    if v < 0.0 {
        return Err(TopologyError::NegativeCost {
            id: id.to_owned(),
            field,
        });
    }
    Ok(())
}

fn check_finite(id: &str, field: &'static str, v: f64) -> Result<(), TopologyError> {
    if !v.is_finite() {
        return Err(TopologyError::NonFinite {
            id: id.to_owned(),
            field,
        });
    }
    Ok(())
}

/// Kahn's algorithm over reorder edges; ties broken by node id.
fn topological_order(
    spec: &TopologySpec,
    node_index: &HashMap<String, usize>,
    reorder: &[usize],
) -> Result<Vec<usize>, TopologyError> {
    let n = spec.nodes.len();
    let mut indegree = vec![0usize; n];
    let mut succ: Vec<Vec<usize>> = vec![Vec::new(); n];
    for &i in reorder {
        let e = &spec.edges[i];
        let (a, b) = (node_index[&e.from], node_index[&e.to]);
        succ[a].push(b);
        indegree[b] += 1;
    }
    let mut ready: BTreeMap<&str, usize> = (0..n)
        .filter(|&i| indegree[i] == 0)
        .map(|i| (spec.nodes[i].id.as_str(), i))
        .collect();
    let mut order = Vec::with_capacity(n);
    while let Some((_, i)) = ready.pop_first() {
        order.push(i);
        for &j in &succ[i] {
            indegree[j] -= 1;
            if indegree[j] == 0 {
                ready.insert(spec.nodes[j].id.as_str(), j);
            }
        }
    }
    if order.len() < n {
        let stuck = (0..n).find(|&i| indegree[i] > 0).expect("cycle member");
        return Err(TopologyError::ReorderCycle(spec.nodes[stuck].id.clone()));
    }
    Ok(order)
}

/// Parse and validate a topology from YAML or JSON text.
pub fn load_topology(text: &str) -> Result<Topology, TopologyError> {
    let spec: TopologySpec = if text.trim_start().starts_with('{') {
        serde_json::from_str(text).map_err(|e| TopologyError::Parse(e.to_string()))?
    } else {
        serde_yaml::from_str(text).map_err(|e| TopologyError::Parse(e.to_string()))?
    };
    Topology::from_spec(spec)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Builtin {
    Base,
    Serial,
}

impl Builtin {
    pub fn name(self) -> &'static str {
        match self {
            Self::Base => "base",
            Self::Serial => "serial",
        }
    }
}

impl std::str::FromStr for Builtin {
    type Err = TopologyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "base" => Ok(Self::Base),
            "serial" => Ok(Self::Serial),
            other => Err(TopologyError::UnknownBuiltin(other.to_owned())),
        }
    }
}

/// Canonical shipped topology.
pub fn builtin(which: Builtin) -> Topology {
    let spec = match which {
        Builtin::Base => base_spec(),
        Builtin::Serial => serial_spec(),
    };
    Topology::from_spec(spec).expect("built-in topology is valid")
}

pub fn builtin_by_name(name: &str) -> Result<Topology, TopologyError> {
    Ok(builtin(name.parse()?))
}

/// Shipped starting stock per node id for a built-in topology.
pub fn builtin_initial_inventory(which: Builtin) -> BTreeMap<String, f64> {
    let pairs: &[(&str, f64)] = match which {
        Builtin::Base => &[
            ("retailer", 60.0),
            ("dist_a", 40.0),
            ("dist_b", 40.0),
            ("factory_a", 60.0),
            ("factory_b", 60.0),
            ("factory_c", 60.0),
        ],
        Builtin::Serial => &[("retailer", 60.0), ("distributor", 40.0), ("factory", 60.0)],
    };
    pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
}

// Retail margin is large relative to holding so that stationary service is
// profitable; transfer prices cancel inside the network and only raw
// procurement, holding, operating and shortage terms erode profit.
fn base_spec() -> TopologySpec {
    use NodeKind::*;
    TopologySpec {
        name: "base".into(),
        nodes: vec![
            NodeSpec::new("market", Market),
            NodeSpec::new("retailer", Retailer).holding(0.030),
            NodeSpec::new("dist_a", Distributor).holding(0.020),
            NodeSpec::new("dist_b", Distributor).holding(0.015),
            NodeSpec::new("factory_a", Factory)
                .holding(0.012)
                .operating(0.010)
                .capacity(25.0),
            NodeSpec::new("factory_b", Factory)
                .holding(0.013)
                .operating(0.015)
                .yield_factor(0.95)
                .capacity(20.0),
            NodeSpec::new("factory_c", Factory)
                .holding(0.011)
                .operating(0.012)
                .yield_factor(0.90)
                .capacity(20.0),
            NodeSpec::new("raw_a", RawSource),
            NodeSpec::new("raw_b", RawSource),
        ],
        edges: vec![
            EdgeSpec::retail("retailer->market", "retailer", "market", 2.0, 1.0),
            EdgeSpec::reorder("dist_a->retailer", "dist_a", "retailer", 2, 1.50, 0.010),
            EdgeSpec::reorder("dist_b->retailer", "dist_b", "retailer", 3, 1.60, 0.015),
            EdgeSpec::reorder("factory_a->dist_a", "factory_a", "dist_a", 2, 1.00, 0.008),
            EdgeSpec::reorder("factory_a->dist_b", "factory_a", "dist_b", 3, 0.80, 0.006),
            EdgeSpec::reorder("factory_b->dist_a", "factory_b", "dist_a", 3, 0.70, 0.005),
            EdgeSpec::reorder("factory_c->dist_a", "factory_c", "dist_a", 4, 0.75, 0.007),
            EdgeSpec::reorder("factory_c->dist_b", "factory_c", "dist_b", 2, 0.80, 0.004),
            EdgeSpec::reorder("raw_a->factory_a", "raw_a", "factory_a", 1, 0.15, 0.000),
            EdgeSpec::reorder("raw_a->factory_b", "raw_a", "factory_b", 1, 0.05, 0.005),
            EdgeSpec::reorder("raw_b->factory_b", "raw_b", "factory_b", 2, 0.07, 0.002),
            EdgeSpec::reorder("raw_b->factory_c", "raw_b", "factory_c", 0, 0.20, 0.000),
        ],
    }
}

fn serial_spec() -> TopologySpec {
    use NodeKind::*;
    TopologySpec {
        name: "serial".into(),
        nodes: vec![
            NodeSpec::new("market", Market),
            NodeSpec::new("retailer", Retailer).holding(0.030),
            NodeSpec::new("distributor", Distributor).holding(0.020),
            NodeSpec::new("factory", Factory)
                .holding(0.012)
                .operating(0.010)
                .capacity(40.0),
            NodeSpec::new("raw", RawSource),
        ],
        edges: vec![
            EdgeSpec::retail("retailer->market", "retailer", "market", 2.0, 1.0),
            EdgeSpec::reorder("distributor->retailer", "distributor", "retailer", 2, 1.50, 0.010),
            EdgeSpec::reorder("factory->distributor", "factory", "distributor", 3, 1.00, 0.008),
            EdgeSpec::reorder("raw->factory", "raw", "factory", 1, 0.15, 0.000),
        ],
    }
}
