//! Demand generation: exogenous mean paths, realizations and goodwill.
//!
//! The exogenous mean at period `t` starts from the base path (the constant
//! `base_mean`, or the trace value when a trace is attached) and applies the
//! modifiers in declaration order:
//!
//! - `trend`: `m + slope * t`
//! - `seasonal`: `m + amplitude * sin(2π t / period + phase)`
//! - `shock`: `m * multiplier` for `time <= t < time + duration`
//! - `noise_scale`: `base + factor * (m - base)`
//!
//! The result is clamped at zero.

mod trace;

pub use trace::{
    load_long_panel, load_wide_panel, select_trace_window, synthetic_panel, ActivityFilter, PanelSeries, TraceSelection,
};

use rand_distr::{Distribution, Normal, Poisson};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::RngStream;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum DemandError {
    #[error("period {t} is beyond the trace length {len}")]
    TraceExhausted { t: usize, len: usize },
    #[error("invalid demand model: {0}")]
    Invalid(String),
    #[error("goodwill parameters must satisfy 0 < drop < 1 < recovery")]
    DegenerateGoodwill,
    #[error("no series passes the activity filter")]
    NoEligibleSeries,
    #[error("failed to read panel: {0}")]
    Panel(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Modifier {
    Trend {
        slope: f64,
    },
    Seasonal {
        amplitude: f64,
        period: f64,
        #[serde(default)]
        phase: f64,
    },
    Shock {
        time: usize,
        multiplier: f64,
        duration: usize,
    },
    NoiseScale {
        factor: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaseProcess {
    Poisson,
    DeterministicTrace,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DemandModel {
    pub base_mean: f64,
    pub base_process: BaseProcess,
    #[serde(default)]
    pub modifiers: Vec<Modifier>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trace: Option<Vec<f64>>,
}

impl DemandModel {
    pub fn poisson(base_mean: f64) -> Self {
        Self {
            base_mean,
            base_process: BaseProcess::Poisson,
            modifiers: Vec::new(),
            trace: None,
        }
    }

    /// Deterministic replay of `trace`, whose mean becomes `base_mean`.
    pub fn replay(trace: Vec<f64>) -> Self {
        let base_mean = if trace.is_empty() {
            0.0
        } else {
            trace.iter().sum::<f64>() / trace.len() as f64
        };
        Self {
            base_mean,
            base_process: BaseProcess::DeterministicTrace,
            modifiers: Vec::new(),
            trace: Some(trace),
        }
    }

    pub fn with_modifier(mut self, m: Modifier) -> Self {
        self.modifiers.push(m);
        self
    }

    pub fn validate(&self) -> Result<(), DemandError> {
        let bad = |msg: &str| Err(DemandError::Invalid(msg.to_owned()));
        if !(self.base_mean.is_finite() && self.base_mean >= 0.0) {
            return bad("base_mean must be finite and non-negative");
        }
        if let Some(tr) = &self.trace {
            if tr.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
                return bad("trace values must be finite and non-negative");
            }
        }
        for m in &self.modifiers {
            match *m {
                Modifier::Trend { slope } if !slope.is_finite() => return bad("trend slope"),
                Modifier::Seasonal {
                    amplitude,
                    period,
                    phase,
                } if !(amplitude.is_finite() && phase.is_finite() && period > 0.0) => {
                    return bad("seasonal period must be positive")
                }
                Modifier::Shock { multiplier, .. } if !(multiplier.is_finite() && multiplier >= 0.0) => {
                    return bad("shock multiplier must be non-negative")
                }
                Modifier::NoiseScale { factor } if !(factor.is_finite() && factor >= 0.0) => {
                    return bad("noise factor must be non-negative")
                }
                _ => {}
            }
        }
        Ok(())
    }

    /// Pre-modifier path value at `t`.
    fn base_path(&self, t: usize) -> Result<f64, DemandError> {
        match &self.trace {
            Some(tr) => tr
                .get(t)
                .copied()
                .ok_or(DemandError::TraceExhausted { t, len: tr.len() }),
            None => Ok(self.base_mean),
        }
    }

    /// Exogenous mean `λ̄_t` after all modifiers, clamped at zero.
    pub fn exogenous_mean(&self, t: usize) -> Result<f64, DemandError> {
        let base = self.base_path(t)?;
        let tf = t as f64;
        let mut m = base;
        for modifier in &self.modifiers {
            m = match *modifier {
                Modifier::Trend { slope } => m + slope * tf,
                Modifier::Seasonal {
                    amplitude,
                    period,
                    phase,
                } => m + amplitude * (std::f64::consts::TAU * tf / period + phase).sin(),
                Modifier::Shock {
                    time,
                    multiplier,
                    duration,
                } => {
                    if t >= time && t < time + duration {
                        m * multiplier
                    } else {
                        m
                    }
                }
                Modifier::NoiseScale { factor } => base + factor * (m - base),
            };
        }
        Ok(m.max(0.0))
    }

    /// Public view of the model for informed agents. Attached traces are
    /// realized demand, so they are dropped and the declared mean level is
    /// kept.
    pub fn declared(&self) -> Self {
        Self {
            base_mean: self.base_mean,
            base_process: self.base_process,
            modifiers: self.modifiers.clone(),
            trace: None,
        }
    }

    /// Parameters of the active modifiers at `t`, in the fixed order
    /// `[base_mean, trend_slope, seasonal_amplitude, seasonal_period, shock_multiplier]`.
    /// Absent modifiers contribute their neutral value.
    pub fn modifier_features(&self, t: usize) -> [f64; 5] {
        let mut out = [self.base_mean, 0.0, 0.0, 0.0, 1.0];
        for m in &self.modifiers {
            match *m {
                Modifier::Trend { slope } => out[1] += slope,
                Modifier::Seasonal { amplitude, period, .. } => {
                    out[2] += amplitude;
                    out[3] = period;
                }
                Modifier::Shock {
                    time,
                    multiplier,
                    duration,
                } if t >= time && t < time + duration => out[4] *= multiplier,
                _ => {}
            }
        }
        out
    }
}

/// Draw one realization for effective mean `lambda` from draw `counter` of `stream`.
///
/// Poisson models return integer-valued draws; trace replay returns `lambda`
/// itself (the trace value already scaled by sentiment).
pub fn sample_demand(model: &DemandModel, lambda: f64, stream: &RngStream, counter: u64) -> f64 {
    match model.base_process {
        BaseProcess::DeterministicTrace => lambda.max(0.0),
        BaseProcess::Poisson => {
            if lambda <= 0.0 {
                return 0.0;
            }
            let mut rng = stream.generator_at(counter);
            Poisson::new(lambda)
                .expect("positive finite Poisson mean")
                .sample(&mut rng)
        }
    }
}

/// Draw the next realization and advance the stream by one logical draw.
pub fn draw_demand(model: &DemandModel, lambda: f64, stream: &mut RngStream) -> f64 {
    let value = sample_demand(model, lambda, stream, stream.counter());
    *stream = stream.with_counter(stream.counter() + 1);
    value
}

/// Truncated normal draw `max(0, N(mean, std²))`, used for blind scenario sampling.
pub fn sample_normal_floor(mean: f64, std: f64, stream: &RngStream, counter: u64) -> f64 {
    if std <= 0.0 {
        return mean.max(0.0);
    }
    let mut rng = stream.generator_at(counter);
    Normal::new(mean, std)
        .expect("finite normal parameters")
        .sample(&mut rng)
        .max(0.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GoodwillParams {
    pub drop: f64,
    pub recovery: f64,
    pub s_min: f64,
    pub s_max: f64,
}

impl Default for GoodwillParams {
    fn default() -> Self {
        Self {
            drop: 0.90,
            recovery: 1.01,
            s_min: 0.2,
            s_max: 2.0,
        }
    }
}

impl GoodwillParams {
    /// No-stockout probability at which the expected log-drift of sentiment
    /// is zero: `ln(1/drop) / (ln(1/drop) + ln(recovery))`.
    pub fn drift_threshold(&self) -> Result<f64, DemandError> {
        if !(self.drop > 0.0 && self.drop < 1.0 && self.recovery > 1.0) {
            return Err(DemandError::DegenerateGoodwill);
        }
        let down = (1.0 / self.drop).ln();
        Ok(down / (down + self.recovery.ln()))
    }
}

pub fn drift_threshold(params: &GoodwillParams) -> Result<f64, DemandError> {
    params.drift_threshold()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GoodwillState {
    pub sentiment: f64,
    pub params: GoodwillParams,
    pub enabled: bool,
}

impl GoodwillState {
    pub fn new(params: GoodwillParams, enabled: bool) -> Self {
        Self {
            sentiment: 1.0,
            params,
            enabled,
        }
    }

    pub fn disabled() -> Self {
        Self::new(GoodwillParams::default(), false)
    }

    /// Asymmetric multiplicative update; a no-op while disabled.
    pub fn update(self, stockout: bool) -> Self {
        if !self.enabled {
            return self;
        }
        let p = self.params;
        let sentiment = if stockout {
            (p.drop * self.sentiment).max(p.s_min)
        } else {
            (p.recovery * self.sentiment).min(p.s_max)
        };
        Self { sentiment, ..self }
    }

    pub fn effective_mean(&self, exogenous: f64) -> f64 {
        if self.enabled {
            self.sentiment * exogenous
        } else {
            exogenous
        }
    }
}
