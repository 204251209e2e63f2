//! External demand traces: panel ingestion and volatile-window selection.

use std::io::Read;

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use super::{DemandError, DemandModel};
use crate::rng::RngStream;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PanelSeries {
    pub id: String,
    pub values: Vec<f64>,
}

/// Minimum-activity rule a window must pass to be eligible.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ActivityFilter {
    /// Required fraction of strictly positive periods inside the window.
    pub min_nonzero_fraction: f64,
}

impl Default for ActivityFilter {
    fn default() -> Self {
        Self {
            min_nonzero_fraction: 0.9,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceSelection {
    pub series_id: String,
    pub start: usize,
    pub cv: f64,
    /// Rescaled window, mean equal to the target.
    pub values: Vec<f64>,
}

/// Coefficient of variation with population standard deviation; zero-mean
/// windows score zero.
pub(crate) fn window_cv(w: &[f64]) -> f64 {
    let n = w.len() as f64;
    let mean = w.iter().sum::<f64>() / n;
    if mean <= 0.0 {
        return 0.0;
    }
    let var = w.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    var.sqrt() / mean
}

/// Pick the eligible `window`-length slice with the highest coefficient of
/// variation across all series and offsets, rescale it to `target_mean`, and
/// return it as a deterministic replay model.
///
/// Ties keep the earliest series, then the earliest offset.
pub fn select_trace_window(
    panel: &[PanelSeries],
    window: usize,
    target_mean: f64,
    filter: ActivityFilter,
) -> Result<(DemandModel, TraceSelection), DemandError> {
    if window == 0 {
        return Err(DemandError::Invalid("window must be positive".into()));
    }
    let need = (filter.min_nonzero_fraction * window as f64).ceil() as usize;
    let mut best: Option<(f64, usize, usize)> = None;
    for (si, series) in panel.iter().enumerate() {
        if series.values.len() < window {
            continue;
        }
        for start in 0..=series.values.len() - window {
            let w = &series.values[start..start + window];
            let active = w.iter().filter(|v| **v > 0.0).count();
            if active < need || w.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
                continue;
            }
            let cv = window_cv(w);
            if best.is_none_or(|(b, _, _)| cv > b) {
                best = Some((cv, si, start));
            }
        }
    }
    let (cv, si, start) = best.ok_or(DemandError::NoEligibleSeries)?;
    let raw = &panel[si].values[start..start + window];
    let mean = raw.iter().sum::<f64>() / window as f64;
    let values: Vec<f64> = raw.iter().map(|v| v * target_mean / mean).collect();
    let mut model = DemandModel::replay(values.clone());
    model.base_mean = target_mean;
    Ok((
        model,
        TraceSelection {
            series_id: panel[si].id.clone(),
            start,
            cv,
            values,
        },
    ))
}

/// Long format: header `series_id,t,units`, one row per observation. Rows may
/// arrive in any order; gaps in `t` are filled with zero sales.
pub fn load_long_panel<R: Read>(reader: R) -> Result<Vec<PanelSeries>, DemandError> {
    #[derive(Deserialize)]
    struct Row {
        series_id: String,
        t: usize,
        units: f64,
    }
    let mut rdr = csv::Reader::from_reader(reader);
    let mut panel: Vec<PanelSeries> = Vec::new();
    for row in rdr.deserialize::<Row>() {
        let row = row.map_err(|e| DemandError::Panel(e.to_string()))?;
        if !(row.units.is_finite() && row.units >= 0.0) {
            return Err(DemandError::Panel(format!(
                "negative or non-finite units for `{}` at t={}",
                row.series_id, row.t
            )));
        }
        let idx = match panel.iter().position(|s| s.id == row.series_id) {
            Some(i) => i,
            None => {
                panel.push(PanelSeries {
                    id: row.series_id.clone(),
                    values: Vec::new(),
                });
                panel.len() - 1
            }
        };
        let values = &mut panel[idx].values;
        if values.len() <= row.t {
            values.resize(row.t + 1, 0.0);
        }
        values[row.t] = row.units;
    }
    Ok(panel)
}

/// Wide format as used by item-store sales panels: the first column is the
/// series id and every column whose header starts with `d_` is one day of
/// unit sales. Other metadata columns are ignored.
pub fn load_wide_panel<R: Read>(reader: R) -> Result<Vec<PanelSeries>, DemandError> {
    let mut rdr = csv::Reader::from_reader(reader);
    let headers = rdr.headers().map_err(|e| DemandError::Panel(e.to_string()))?.clone();
    let day_cols: Vec<usize> = headers
        .iter()
        .enumerate()
        .filter(|(_, h)| h.starts_with("d_"))
        .map(|(i, _)| i)
        .collect();
    if day_cols.is_empty() {
        return Err(DemandError::Panel("no `d_` day columns in header".into()));
    }
    let mut panel = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| DemandError::Panel(e.to_string()))?;
        let id = rec.get(0).unwrap_or_default().to_owned();
        let values = day_cols
            .iter()
            .map(|&c| {
                rec.get(c)
                    .unwrap_or("")
                    .trim()
                    .parse::<f64>()
                    .map_err(|e| DemandError::Panel(format!("{id}: {e}")))
            })
            .collect::<Result<Vec<_>, _>>()?;
        panel.push(PanelSeries { id, values });
    }
    Ok(panel)
}

/// Deterministic stand-in for an item-store daily sales panel: per-series
/// level, weekly cycle, short promotions and occasional zero days.
pub fn synthetic_panel(seed: u64, n_series: usize, len: usize) -> Vec<PanelSeries> {
    const WEEK: [f64; 7] = [0.8, 0.85, 0.9, 1.0, 1.1, 1.45, 1.6];
    (0..n_series)
        .map(|i| {
            let id = format!("item_{i:03}");
            let mut rng = RngStream::named(seed, &id).generator_at(0);
            let level = rng.random_range(3.0..15.0);
            let promo_prob = rng.random_range(0.0..0.08);
            let mut promo_left = 0u32;
            let values = (0..len)
                .map(|day| {
                    if promo_left == 0 && rng.random_bool(promo_prob) {
                        promo_left = rng.random_range(2..5);
                    }
                    let lift = if promo_left > 0 {
                        promo_left -= 1;
                        2.5
                    } else {
                        1.0
                    };
                    if rng.random_bool(0.03) {
                        return 0.0;
                    }
                    let mean = level * WEEK[day % 7] * lift;
                    Poisson::new(mean).expect("positive mean").sample(&mut rng)
                })
                .collect();
            PanelSeries { id, values }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn series(id: &str, v: &[f64]) -> PanelSeries {
        PanelSeries {
            id: id.into(),
            values: v.to_vec(),
        }
    }

    #[test]
    fn constant_series_has_zero_cv() {
        assert_eq!(window_cv(&[5.0; 10]), 0.0);
        let panel = vec![
            series("flat", &[5.0; 10]),
            series("wavy", &[1., 9., 1., 9., 1., 9., 1., 9., 1., 9.]),
        ];
        let (_, sel) = select_trace_window(&panel, 4, 20.0, ActivityFilter::default()).unwrap();
        assert_eq!(sel.series_id, "wavy");
    }

    #[test]
    fn single_series_is_rescaled() {
        let panel = vec![series("only", &[2.0, 4.0, 6.0, 8.0])];
        let (model, sel) = select_trace_window(&panel, 4, 20.0, ActivityFilter::default()).unwrap();
        assert_eq!(sel.start, 0);
        let tr = model.trace.as_ref().unwrap();
        assert_eq!(tr.len(), 4);
        let mean = tr.iter().sum::<f64>() / 4.0;
        assert!((mean - 20.0).abs() < 1e-12);
        assert_eq!(model.base_mean, 20.0);
        assert_eq!(tr, &vec![8.0, 16.0, 24.0, 32.0]);
    }

    #[test]
    fn activity_filter_excludes_sparse_windows() {
        let panel = vec![series("sparse", &[0.0, 0.0, 50.0, 0.0])];
        assert_eq!(
            select_trace_window(&panel, 4, 20.0, ActivityFilter::default()).unwrap_err(),
            DemandError::NoEligibleSeries
        );
    }

    #[test]
    fn short_series_skipped() {
        let panel = vec![series("short", &[1.0, 2.0])];
        assert!(select_trace_window(&panel, 3, 20.0, ActivityFilter::default()).is_err());
    }

    #[test]
    fn synthetic_panel_is_deterministic_and_selectable() {
        let a = synthetic_panel(1, 12, 90);
        assert_eq!(a, synthetic_panel(1, 12, 90));
        assert_ne!(a, synthetic_panel(2, 12, 90));
        let (model, sel) = select_trace_window(&a, 30, 20.0, ActivityFilter::default()).unwrap();
        assert_eq!(model.trace.unwrap().len(), 30);
        assert!(sel.cv > 0.0);
    }

    #[test]
    fn long_and_wide_loaders_agree() {
        let long = "series_id,t,units\na,0,1\na,1,2\nb,1,5\nb,0,4\na,2,3\nb,2,6\n";
        let wide = "id,item_id,d_1,d_2,d_3\na,x,1,2,3\nb,y,4,5,6\n";
        let l = load_long_panel(long.as_bytes()).unwrap();
        let w = load_wide_panel(wide.as_bytes()).unwrap();
        assert_eq!(l, w);
    }
}
