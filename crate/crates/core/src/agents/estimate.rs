use serde::{Deserialize, Serialize};

use super::AgentError;
use crate::env::InfoTier;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimateSource {
    History,
    Prior,
    Informed,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DemandEstimate {
    pub mean: f64,
    pub std: f64,
    pub source: EstimateSource,
}

/// Per-period demand moments for one retail edge.
///
/// Blind: full-history mean and sample standard deviation, with the std
/// floored at the Poisson value `√mean`; `prior_mean` when no history exists.
/// Informed: `(λ, √λ)` for the supplied effective mean.
pub fn estimate_demand(
    history: &[f64],
    tier: InfoTier,
    informed_mean: Option<f64>,
    prior_mean: f64,
) -> Result<DemandEstimate, AgentError> {
    if tier != InfoTier::Blind {
        let m = informed_mean.ok_or(AgentError::MissingContext)?.max(0.0);
        return Ok(DemandEstimate {
            mean: m,
            std: m.sqrt(),
            source: EstimateSource::Informed,
        });
    }
    if history.is_empty() {
        return Ok(DemandEstimate {
            mean: prior_mean,
            std: prior_mean.max(0.0).sqrt(),
            source: EstimateSource::Prior,
        });
    }
    let n = history.len() as f64;
    let mean = history.iter().sum::<f64>() / n;
    let sample_std = if history.len() > 1 {
        (history.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    Ok(DemandEstimate {
        mean,
        std: sample_std.max(mean.max(0.0).sqrt()),
        source: EstimateSource::History,
    })
}

/// Holt linear smoothing state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Holt {
    pub level: f64,
    pub trend: f64,
}

impl Holt {
    /// Fit over `history`: the level starts at the first observation, the
    /// trend at the first difference, then standard updates with `(alpha, beta)`.
    pub fn fit(history: &[f64], alpha: f64, beta: f64) -> Option<Self> {
        let (&first, rest) = history.split_first()?;
        let mut h = Holt {
            level: first,
            trend: 0.0,
        };
        for (i, &y) in rest.iter().enumerate() {
            if i == 0 {
                h.trend = y - h.level;
                h.level = y;
                continue;
            }
            let level = alpha * y + (1.0 - alpha) * (h.level + h.trend);
            h.trend = beta * (level - h.level) + (1.0 - beta) * h.trend;
            h.level = level;
        }
        Some(h)
    }

    /// `steps`-ahead forecast.
    pub fn forecast(&self, steps: usize) -> f64 {
        self.level + self.trend * steps as f64
    }
}

/// Smallest `q` with `P(Poisson(mean) ≤ q) ≥ ratio`.
pub fn poisson_quantile(mean: f64, ratio: f64) -> f64 {
    if mean <= 0.0 || ratio <= 0.0 {
        return 0.0;
    }
    let target = ratio.min(1.0 - 1e-12);
    let cap = (mean + 50.0 * mean.sqrt() + 50.0).ceil() as u64;
    let mut log_p = -mean;
    let ln_mean = mean.ln();
    let mut cdf = 0.0;
    for q in 0..=cap {
        cdf += log_p.exp();
        if cdf >= target {
            return q as f64;
        }
        log_p += ln_mean - ((q + 1) as f64).ln();
    }
    cap as f64
}

/// Newsvendor critical ratio `b / (b + h)`.
pub fn critical_ratio(shortage: f64, holding: f64) -> Result<f64, AgentError> {
    let denom = shortage + holding;
    if denom <= 0.0 {
        return Err(AgentError::UndefinedCriticalRatio);
    }
    Ok(shortage / denom)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn informed_moments() {
        let e = estimate_demand(&[], InfoTier::Informed, Some(20.0), 5.0).unwrap();
        assert_eq!(e.mean, 20.0);
        assert_eq!(e.std, 20f64.sqrt());
        assert!(estimate_demand(&[], InfoTier::Informed, None, 5.0).is_err());
    }

    #[test]
    fn blind_estimates() {
        let e = estimate_demand(&[10.0, 10.0, 10.0], InfoTier::Blind, None, 5.0).unwrap();
        assert_eq!(e.mean, 10.0);
        assert_eq!(e.std, 10f64.sqrt());
        let e = estimate_demand(&[0.0, 40.0], InfoTier::Blind, None, 5.0).unwrap();
        assert_eq!(e.mean, 20.0);
        assert!((e.std - 800f64.sqrt()).abs() < 1e-12);
        let e = estimate_demand(&[], InfoTier::Blind, Some(99.0), 5.0).unwrap();
        assert_eq!((e.mean, e.source), (5.0, EstimateSource::Prior));
    }

    #[test]
    fn holt_constant_and_ramp() {
        let h = Holt::fit(&[7.0; 12], 0.3, 0.1).unwrap();
        for k in 1..5 {
            assert!((h.forecast(k) - 7.0).abs() < 1e-12);
        }
        let ramp: Vec<f64> = (0..15).map(|t| 3.0 + 2.5 * t as f64).collect();
        let h = Holt::fit(&ramp, 0.3, 0.1).unwrap();
        for k in 1..5 {
            assert!((h.forecast(k) - (ramp[14] + 2.5 * k as f64)).abs() < 1e-9);
        }
        assert!(Holt::fit(&[], 0.3, 0.1).is_none());
    }

    #[test]
    fn critical_ratio_rules() {
        assert!((critical_ratio(0.9, 0.1).unwrap() - 0.9).abs() < 1e-15);
        assert_eq!(critical_ratio(0.0, 0.1).unwrap(), 0.0);
        assert!(critical_ratio(0.0, 0.0).is_err());
    }

    #[test]
    fn quantile_edges() {
        assert_eq!(poisson_quantile(0.0, 0.9), 0.0);
        assert_eq!(poisson_quantile(20.0, 0.0), 0.0);
        assert!(poisson_quantile(20.0, 1.0) > 40.0);
        assert!(poisson_quantile(2000.0, 0.5) >= 1990.0);
    }
}
