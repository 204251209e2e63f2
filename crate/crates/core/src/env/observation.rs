use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{EpisodeConfig, InfoTier, SimState};
use crate::demand::DemandModel;

/// Informed agents see `[λ̄_t, base_mean, trend_slope, seasonal_amplitude,
/// seasonal_period, shock_multiplier]` per retail edge.
pub const INFORMED_FEATURES_PER_EDGE: usize = 6;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Segment {
    pub name: String,
    pub offset: usize,
    pub len: usize,
}

/// Named, ordered slices of the flat observation vector.
///
/// Order: `demand_prev`, `unfulfilled_prev`, `on_hand` (all nodes),
/// `pipeline` (edge-major, `l_max` slots per reorder edge, slot 0 arrives
/// next), `features` (`t/T`, sentiment), then `demand_context` for informed
/// episodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservationLayout {
    pub segments: Vec<Segment>,
    pub node_ids: Vec<String>,
    pub reorder_edge_ids: Vec<String>,
    pub retail_edge_ids: Vec<String>,
    pub l_max: usize,
    pub horizon: usize,
    pub dim: usize,
}

impl ObservationLayout {
    pub fn new(cfg: &EpisodeConfig) -> Self {
        let topo = &cfg.topology;
        let l_max = topo.l_max() as usize;
        let sizes = [
            ("demand_prev", topo.num_retail()),
            ("unfulfilled_prev", topo.num_retail()),
            ("on_hand", topo.nodes().len()),
            ("pipeline", topo.num_reorder() * l_max),
            ("features", 2),
            ("demand_context", cfg.observation_feature_dim() - 2),
        ];
        let mut offset = 0;
        let mut segments = Vec::new();
        for (name, len) in sizes {
            if name == "demand_context" && len == 0 {
                continue;
            }
            segments.push(Segment {
                name: name.into(),
                offset,
                len,
            });
            offset += len;
        }
        Self {
            segments,
            node_ids: topo.nodes().iter().map(|n| n.id.clone()).collect(),
            reorder_edge_ids: topo.reorder_edges().iter().map(|e| e.id.clone()).collect(),
            retail_edge_ids: topo.retail_edges().iter().map(|e| e.id.clone()).collect(),
            l_max,
            horizon: cfg.horizon,
            dim: offset,
        }
    }

    pub fn segment(&self, name: &str) -> Option<&Segment> {
        self.segments.iter().find(|s| s.name == name)
    }
}

/// Demand information exposed only to informed controllers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemandContext {
    /// `λ̄_t` for the period about to be played, per retail edge.
    pub exogenous_mean: Vec<f64>,
    /// Declared models with any realized trace stripped.
    pub models: Vec<DemandModel>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub t: usize,
    pub vector: Vec<f64>,
    pub layout: Arc<ObservationLayout>,
    pub context: Option<DemandContext>,
}

impl Observation {
    pub(super) fn build(cfg: &EpisodeConfig, layout: &Arc<ObservationLayout>, state: &SimState) -> Self {
        let mut v = Vec::with_capacity(layout.dim);
        v.extend_from_slice(&state.demand_prev);
        v.extend_from_slice(&state.unfulfilled_prev);
        v.extend_from_slice(&state.on_hand);
        for queue in &state.pipeline {
            for slot in 0..layout.l_max {
                v.push(queue.get(slot).copied().unwrap_or(0.0));
            }
        }
        v.push(state.t as f64 / cfg.horizon as f64);
        v.push(state.goodwill.sentiment);
        let context = match cfg.info_tier {
            InfoTier::Blind => None,
            InfoTier::Informed | InfoTier::NonCausal => {
                let models: Vec<DemandModel> = cfg.demand.iter().map(DemandModel::declared).collect();
                let exogenous_mean = models
                    .iter()
                    .map(|m| m.exogenous_mean(state.t).unwrap_or(m.base_mean))
                    .collect();
                Some(DemandContext { exogenous_mean, models })
            }
        };
        if cfg.info_tier == InfoTier::Informed {
            let ctx = context.as_ref().expect("informed context");
            for (k, m) in ctx.models.iter().enumerate() {
                v.push(ctx.exogenous_mean[k]);
                v.extend_from_slice(&m.modifier_features(state.t));
            }
        }
        debug_assert_eq!(v.len(), layout.dim);
        Self {
            t: state.t,
            vector: v,
            layout: layout.clone(),
            context,
        }
    }

    fn slice(&self, name: &str) -> &[f64] {
        match self.layout.segment(name) {
            Some(s) => &self.vector[s.offset..s.offset + s.len],
            None => &[],
        }
    }

    pub fn demand_prev(&self) -> &[f64] {
        self.slice("demand_prev")
    }

    pub fn unfulfilled_prev(&self) -> &[f64] {
        self.slice("unfulfilled_prev")
    }

    pub fn on_hand(&self) -> &[f64] {
        self.slice("on_hand")
    }

    /// Pipeline slots of the reorder edge at action position `pos`.
    pub fn pipeline(&self, pos: usize) -> &[f64] {
        let l = self.layout.l_max;
        &self.slice("pipeline")[pos * l..(pos + 1) * l]
    }

    pub fn in_transit(&self, pos: usize) -> f64 {
        self.pipeline(pos).iter().sum()
    }

    pub fn time_fraction(&self) -> f64 {
        self.slice("features")[0]
    }

    pub fn sentiment(&self) -> f64 {
        self.slice("features")[1]
    }

    pub fn horizon(&self) -> usize {
        self.layout.horizon
    }
}
