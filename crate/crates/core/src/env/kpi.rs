use serde::{Deserialize, Serialize};

use super::{EpisodeRecord, RewardTerms};
use crate::topology::NodeKind;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EchelonBullwhip {
    /// Kind of the ordering node.
    pub echelon: NodeKind,
    #[serde(with = "lenient_f64")]
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Kpis {
    pub profit: f64,
    /// Fraction of periods without any unfulfilled retail demand.
    pub service_level: f64,
    /// Shipped over effective demand, summed over the episode.
    pub fill_rate: f64,
    pub stockout_periods: usize,
    /// Sum of per-period unfulfilled demand; backlog is counted each period it is carried.
    pub total_unfulfilled: f64,
    /// Mean post-step on-hand stock summed over managed nodes.
    pub avg_inventory: f64,
    /// Largest echelon order-to-demand variance ratio.
    #[serde(with = "lenient_f64")]
    pub bullwhip: f64,
    pub bullwhip_by_echelon: Vec<EchelonBullwhip>,
    pub terms: RewardTerms,
    pub final_sentiment: f64,
}

/// JSON has no infinities; non-finite values travel as strings.
pub mod lenient_f64 {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.serialize_str(&v.to_string())
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Num(f64),
            Text(String),
        }
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(v),
            Repr::Text(t) => t.parse().map_err(serde::de::Error::custom),
        }
    }
}

fn variance(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n
}

const VAR_EPS: f64 = 1e-12;

pub fn kpis(record: &EpisodeRecord) -> Kpis {
    let topo = &record.topology;
    let periods = &record.periods;
    let n = periods.len();

    let stockout_periods = periods
        .iter()
        .filter(|p| p.step.unfulfilled.iter().sum::<f64>() > 0.0)
        .count();
    let service_level = if n == 0 {
        1.0
    } else {
        1.0 - stockout_periods as f64 / n as f64
    };
    let shipped: f64 = periods.iter().flat_map(|p| &p.step.retail_shipments).sum();
    let wanted: f64 = periods.iter().flat_map(|p| &p.step.effective_demand).sum();
    let fill_rate = if wanted > 0.0 { shipped / wanted } else { 1.0 };
    let total_unfulfilled: f64 = periods.iter().flat_map(|p| &p.step.unfulfilled).sum();
    let managed = topo.managed_nodes();
    let avg_inventory = if n == 0 {
        0.0
    } else {
        periods
            .iter()
            .map(|p| managed.iter().map(|&j| p.on_hand[j]).sum::<f64>())
            .sum::<f64>()
            / n as f64
    };

    let demand: Vec<f64> = periods.iter().map(|p| p.step.demand.iter().sum()).collect();
    let var_d = variance(&demand);
    let mut bullwhip_by_echelon = Vec::new();
    for kind in [NodeKind::Retailer, NodeKind::Distributor, NodeKind::Factory] {
        let positions: Vec<usize> = (0..topo.num_reorder())
            .filter(|&pos| topo.node(topo.reorder_endpoints(pos).1).kind == kind)
            .collect();
        if positions.is_empty() {
            continue;
        }
        let orders: Vec<f64> = periods
            .iter()
            .map(|p| positions.iter().map(|&pos| p.step.requests[pos].max(0.0)).sum())
            .collect();
        let var_o = variance(&orders);
        let ratio = if var_d > VAR_EPS {
            var_o / var_d
        } else if var_o > VAR_EPS {
            f64::INFINITY
        } else {
            1.0
        };
        bullwhip_by_echelon.push(EchelonBullwhip { echelon: kind, ratio });
    }
    let bullwhip = bullwhip_by_echelon
        .iter()
        .map(|e| e.ratio)
        .fold(f64::NEG_INFINITY, f64::max);

    Kpis {
        profit: record.total_reward(),
        service_level,
        fill_rate,
        stockout_periods,
        total_unfulfilled,
        avg_inventory,
        bullwhip: if bullwhip_by_echelon.is_empty() { 1.0 } else { bullwhip },
        bullwhip_by_echelon,
        terms: record.term_totals(),
        final_sentiment: periods.last().map(|p| p.step.sentiment).unwrap_or(1.0),
    }
}
