use std::io::Write;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{EpisodeConfig, RewardTerms, SimState, StepResult};
use crate::topology::Topology;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeriodRecord {
    pub step: StepResult,
    /// Post-step on-hand stock per node.
    pub on_hand: Vec<f64>,
    /// Post-step pipeline totals per reorder edge.
    pub in_transit: Vec<f64>,
}

/// Per-period ledger of everything the kernel did.
#[derive(Debug, Clone)]
pub struct EpisodeRecord {
    pub topology: Arc<Topology>,
    pub horizon: usize,
    pub discount: f64,
    pub initial_on_hand: Vec<f64>,
    pub periods: Vec<PeriodRecord>,
}

impl EpisodeRecord {
    pub(super) fn new(cfg: &EpisodeConfig, state: &SimState) -> Self {
        Self {
            topology: cfg.topology.clone(),
            horizon: cfg.horizon,
            discount: cfg.discount,
            initial_on_hand: state.on_hand.clone(),
            periods: Vec::with_capacity(cfg.horizon),
        }
    }

    pub(super) fn push(&mut self, step: &StepResult, state: &SimState) {
        self.periods.push(PeriodRecord {
            step: step.clone(),
            on_hand: state.on_hand.clone(),
            in_transit: state.in_transit.clone(),
        });
    }

    pub fn is_complete(&self) -> bool {
        self.periods.len() == self.horizon
    }

    /// Discounted episode return.
    pub fn total_reward(&self) -> f64 {
        self.periods.iter().map(|p| p.step.reward).sum()
    }

    /// Undiscounted term totals.
    pub fn term_totals(&self) -> RewardTerms {
        let mut acc = RewardTerms::default();
        for p in &self.periods {
            acc.accumulate(&p.step.terms);
        }
        acc
    }

    pub fn ledger_header(&self) -> Vec<String> {
        let topo = &self.topology;
        let mut h = vec!["t".to_owned()];
        for prefix in ["a", "R"] {
            h.extend(topo.reorder_edges().iter().map(|e| format!("{prefix}[{}]", e.id)));
        }
        for prefix in ["D", "D_eff", "S", "U"] {
            h.extend(topo.retail_edges().iter().map(|e| format!("{prefix}[{}]", e.id)));
        }
        h.extend(["sentiment", "SR", "PC", "HC", "PHC", "OC", "SP", "FK", "reward"].map(String::from));
        h.extend(topo.nodes().iter().map(|n| format!("X[{}]", n.id)));
        h.extend(topo.reorder_edges().iter().map(|e| format!("Y[{}]", e.id)));
        h
    }

    /// Write the ledger as CSV, one row per period.
    pub fn write_ledger<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(self.ledger_header())?;
        for p in &self.periods {
            let s = &p.step;
            let mut row = vec![s.t.to_string()];
            let nums = s
                .requests
                .iter()
                .chain(&s.filled)
                .chain(&s.demand)
                .chain(&s.effective_demand)
                .chain(&s.retail_shipments)
                .chain(&s.unfulfilled)
                .chain([
                    &s.sentiment,
                    &s.terms.sales_revenue,
                    &s.terms.procurement,
                    &s.terms.holding,
                    &s.terms.pipeline_holding,
                    &s.terms.operating,
                    &s.terms.shortage,
                    &s.terms.fixed_order,
                    &s.reward,
                ])
                .chain(&p.on_hand)
                .chain(&p.in_transit);
            row.extend(nums.map(|v| v.to_string()));
            w.write_record(row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn ledger_csv(&self) -> String {
        let mut buf = Vec::new();
        self.write_ledger(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("csv is utf-8")
    }
}
