//! Test-side oracles and random instance generators, shared by several
//! integration targets. Nothing here calls the planner or the allocator.

#![allow(dead_code)]

use std::collections::BTreeMap;
use std::sync::Arc;

use invmgmt_core::optim::{Cmp, LinearProgram};
use invmgmt_core::topology::{builtin, builtin_initial_inventory, Builtin, EdgeSpec, NodeKind, NodeSpec, TopologySpec};
use invmgmt_core::{CoreEnv, DemandModel, EpisodeConfig, EpisodeRecord, Fulfillment, Modifier, Topology};
use rand::Rng;

/// Raw → [factory] → [distributor] → retailer → market with random economics.
///
/// Retail price dominates every unit cost, so shipping always beats holding
/// and the planner's greedy-shipment premise holds.
pub fn random_chain(rng: &mut impl Rng, depth: usize, fixed_cost: bool) -> Topology {
    let kinds: &[NodeKind] = match depth {
        1 => &[NodeKind::Retailer],
        2 => &[NodeKind::Distributor, NodeKind::Retailer],
        _ => &[NodeKind::Factory, NodeKind::Distributor, NodeKind::Retailer],
    };
    let mut nodes = vec![
        NodeSpec::new("raw", NodeKind::RawSource),
        NodeSpec::new("market", NodeKind::Market),
    ];
    let mut edges = Vec::new();
    let mut upstream = "raw".to_owned();
    let mut price = rng.random_range(0.5..1.5);
    for (i, &kind) in kinds.iter().enumerate() {
        let id = format!("n{i}");
        let mut node = NodeSpec::new(&id, kind).holding(rng.random_range(0.02..0.4));
        if kind == NodeKind::Factory {
            node = node
                .yield_factor(rng.random_range(0.7..1.0))
                .operating(rng.random_range(0.0..0.3));
            if rng.random_bool(0.5) {
                node = node.capacity(rng.random_range(10.0..40.0));
            }
        }
        nodes.push(node);
        let mut e = EdgeSpec::reorder(
            format!("e{i}"),
            &upstream,
            &id,
            rng.random_range(0..=3),
            price,
            rng.random_range(0.0..0.1),
        );
        if fixed_cost && rng.random_bool(0.5) {
            e.fixed_order_cost = rng.random_range(0.5..5.0);
        }
        edges.push(e);
        price += rng.random_range(0.3..1.0);
        upstream = id;
    }
    edges.push(EdgeSpec::retail(
        "sale",
        &upstream,
        "market",
        price + rng.random_range(1.0..4.0),
        rng.random_range(0.0..3.0),
    ));
    Topology::from_spec(TopologySpec {
        name: format!("chain{depth}"),
        nodes,
        edges,
    })
    .expect("generated chain is valid")
}

pub fn random_demand(rng: &mut impl Rng, mean: f64) -> DemandModel {
    let mut m = DemandModel::poisson(mean);
    if rng.random_bool(0.5) {
        m = m.with_modifier(Modifier::Trend {
            slope: rng.random_range(-0.5..0.8),
        });
    }
    if rng.random_bool(0.5) {
        m = m.with_modifier(Modifier::Seasonal {
            amplitude: rng.random_range(0.0..mean / 2.0),
            period: rng.random_range(4.0..12.0),
            phase: 0.0,
        });
    }
    m
}

pub fn random_fulfillment(rng: &mut impl Rng) -> Fulfillment {
    if rng.random_bool(0.5) {
        Fulfillment::Backlog
    } else {
        Fulfillment::LostSales
    }
}

/// Small LP-compatible instance: a random chain, short horizon, random
/// discount, random starting stock.
pub fn random_small_config(rng: &mut impl Rng) -> EpisodeConfig {
    let depth = rng.random_range(1..=3);
    let topo = Arc::new(random_chain(rng, depth, false));
    let mean = rng.random_range(2.0..15.0);
    let mut cfg = EpisodeConfig::new(topo.clone(), vec![random_demand(rng, mean)]);
    cfg.horizon = rng.random_range(3..=8);
    cfg.fulfillment = random_fulfillment(rng);
    cfg.discount = if rng.random_bool(0.5) {
        1.0
    } else {
        rng.random_range(0.85..1.0)
    };
    cfg.initial_inventory = topo
        .nodes()
        .iter()
        .filter(|n| n.kind.is_managed())
        .map(|n| (n.id.clone(), rng.random_range(0.0..30.0_f64).round()))
        .collect::<BTreeMap<_, _>>();
    cfg
}

/// Any supported network and mode, including goodwill and fixed order costs.
pub fn random_any_config(rng: &mut impl Rng) -> EpisodeConfig {
    let mut cfg = match rng.random_range(0..3) {
        0 => {
            let mut c = EpisodeConfig::new(Arc::new(builtin(Builtin::Base)), vec![random_demand(rng, 20.0)]);
            c.initial_inventory = builtin_initial_inventory(Builtin::Base);
            c
        }
        1 => {
            let mut c = EpisodeConfig::new(Arc::new(builtin(Builtin::Serial)), vec![random_demand(rng, 20.0)]);
            c.initial_inventory = builtin_initial_inventory(Builtin::Serial);
            c
        }
        _ => {
            let depth = rng.random_range(1..=3);
            let mut c = random_small_config(rng);
            c.topology = Arc::new(random_chain(rng, depth, true));
            c.initial_inventory.clear();
            c
        }
    };
    cfg.horizon = rng.random_range(1..=30);
    cfg.fulfillment = random_fulfillment(rng);
    cfg.goodwill_enabled = rng.random_bool(0.3);
    cfg
}

/// Random requests, occasionally negative or far above any supply bound.
pub fn random_action(rng: &mut impl Rng, n: usize) -> Vec<f64> {
    (0..n)
        .map(|_| match rng.random_range(0..10) {
            0 => -rng.random_range(0.0..10.0),
            1 => 0.0,
            2 => rng.random_range(100.0..1000.0),
            _ => rng.random_range(0.0..40.0),
        })
        .collect()
}

/// Play random actions; after every step check that the pipeline queues sum
/// to the reported in-transit totals.
pub fn random_episode(cfg: &EpisodeConfig, seed: u64, rng: &mut impl Rng) -> Result<EpisodeRecord, String> {
    let mut env = CoreEnv::new(cfg.clone(), seed).map_err(|e| e.to_string())?;
    env.reset(seed);
    let n = cfg.topology.num_reorder();
    while !env.is_done() {
        env.step(&random_action(rng, n)).map_err(|e| e.to_string())?;
        let s = env.state();
        for (p, q) in s.pipeline.iter().enumerate() {
            let sum: f64 = q.iter().sum();
            if (sum - s.in_transit[p]).abs() > 1e-9 {
                return Err(format!(
                    "t={} edge {p}: queue sums to {sum}, Y = {}",
                    s.t, s.in_transit[p]
                ));
            }
        }
    }
    Ok(env.into_record())
}

/// Recompute every managed node's stock and every edge's in-transit total from
/// the ledger's filled orders and retail shipments alone:
///
/// `X_{t+1} = X_t + Σ_in R_{t-L} − Σ_out R_t / v − Σ_retail S_t`,
/// `Y_{t+1} = Σ_{τ=t-L+1..t} R_τ`.
pub fn check_ledger(rec: &EpisodeRecord) -> Result<(), String> {
    let topo = &rec.topology;
    let mut x = rec.initial_on_hand.clone();
    for (t, p) in rec.periods.iter().enumerate() {
        let s = &p.step;
        for pos in 0..topo.num_reorder() {
            if s.filled[pos] < 0.0 || s.filled[pos] > s.requests[pos].max(0.0) + 1e-12 {
                return Err(format!(
                    "t={t} edge {pos}: R = {} for a = {}",
                    s.filled[pos], s.requests[pos]
                ));
            }
        }
        let mut next = x.clone();
        for pos in 0..topo.num_reorder() {
            let e = topo.reorder_edge(pos);
            let (from, to) = topo.reorder_endpoints(pos);
            let lead = e.lead_time as usize;
            if t >= lead {
                next[to] += rec.periods[t - lead].step.filled[pos];
            }
            next[from] -= s.filled[pos] / topo.node(from).yield_factor;
            let y: f64 = (t.saturating_sub(lead.saturating_sub(1))..=t)
                .filter(|_| lead > 0)
                .map(|tau| rec.periods[tau].step.filled[pos])
                .sum();
            if (y - p.in_transit[pos]).abs() > 1e-9 * y.abs().max(1.0) {
                return Err(format!(
                    "t={t} edge {pos}: Y = {} but orders in flight sum to {y}",
                    p.in_transit[pos]
                ));
            }
        }
        for k in 0..topo.num_retail() {
            next[topo.retail_source(k)] -= s.retail_shipments[k];
        }
        for j in topo.managed_nodes() {
            if (next[j] - p.on_hand[j]).abs() > 1e-9 * next[j].abs().max(1.0) {
                return Err(format!(
                    "t={t} node {j}: ledger gives {} but X = {}",
                    next[j], p.on_hand[j]
                ));
            }
            if p.on_hand[j] < 0.0 {
                return Err(format!("t={t} node {j}: negative stock {}", p.on_hand[j]));
            }
        }
        x = p.on_hand.clone();
    }
    Ok(())
}

/// Best objective of a bounded LP by enumerating every basis: each choice of
/// `n` tight rows or bounds is solved densely and kept if feasible.
/// `None` when no vertex is feasible. Intended for a handful of variables.
pub fn vertex_enumeration(lp: &LinearProgram) -> Option<f64> {
    let n = lp.variables.len();
    // Every candidate hyperplane as (coefficients, rhs).
    let mut planes: Vec<(Vec<f64>, f64)> = Vec::new();
    for c in &lp.constraints {
        let mut row = vec![0.0; n];
        for (v, a) in &c.terms {
            row[v.0] += a;
        }
        planes.push((row, c.rhs));
    }
    for (i, v) in lp.variables.iter().enumerate() {
        for b in [v.lower, v.upper] {
            if b.is_finite() {
                let mut row = vec![0.0; n];
                row[i] = 1.0;
                planes.push((row, b));
            }
        }
    }
    let mut best: Option<f64> = None;
    let mut pick = Vec::with_capacity(n);
    enumerate(&planes, n, 0, &mut pick, &mut |idx| {
        let a: Vec<Vec<f64>> = idx.iter().map(|&i| planes[i].0.clone()).collect();
        let b: Vec<f64> = idx.iter().map(|&i| planes[i].1).collect();
        if let Some(x) = solve_dense(a, b) {
            if feasible(lp, &x) {
                let obj = lp.evaluate(&x);
                best = Some(best.map_or(obj, |o: f64| o.max(obj)));
            }
        }
    });
    best
}

fn enumerate(planes: &[(Vec<f64>, f64)], k: usize, start: usize, pick: &mut Vec<usize>, f: &mut dyn FnMut(&[usize])) {
    if pick.len() == k {
        f(pick);
        return;
    }
    for i in start..planes.len() {
        pick.push(i);
        enumerate(planes, k, i + 1, pick, f);
        pick.pop();
    }
}

fn feasible(lp: &LinearProgram, x: &[f64]) -> bool {
    const TOL: f64 = 1e-7;
    lp.variables
        .iter()
        .zip(x)
        .all(|(v, &xi)| xi >= v.lower - TOL && xi <= v.upper + TOL)
        && lp.constraints.iter().all(|c| {
            let lhs: f64 = c.terms.iter().map(|(v, a)| a * x[v.0]).sum();
            match c.cmp {
                Cmp::Le => lhs <= c.rhs + TOL,
                Cmp::Ge => lhs >= c.rhs - TOL,
                Cmp::Eq => (lhs - c.rhs).abs() <= TOL,
            }
        })
}

/// Gaussian elimination with partial pivoting; `None` if singular.
fn solve_dense(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() < 1e-10 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for r in col + 1..n {
            let f = a[r][col] / a[col][col];
            if f != 0.0 {
                for c in col..n {
                    a[r][c] -= f * a[col][c];
                }
                b[r] -= f * b[col];
            }
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|c| a[r][c] * x[c]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    Some(x)
}

pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}
