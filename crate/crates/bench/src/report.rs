//! Percent-of-Oracle tables.
//!
//! Per scenario, seed profits are averaged first and the ratio is taken of
//! the means. Regime aggregates are the mean and sample standard deviation of
//! the scenario percentages, a heterogeneity summary rather than a confidence
//! interval.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::{RegimeGroup, Scenario};
use crate::registry::{AGENT_IDS, ORACLE};
use crate::runner::ResultRow;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ReportError {
    #[error("no oracle row for scenario `{scenario}` seed {seed}")]
    MissingOracle { scenario: String, seed: u64 },
    #[error("unknown scenario `{0}`")]
    UnknownScenario(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioCell {
    pub agent: String,
    pub scenario: String,
    pub group: RegimeGroup,
    pub pct: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupSummary {
    pub agent: String,
    pub group: RegimeGroup,
    /// Scenarios with a defined percentage.
    pub n: usize,
    pub mean: Option<f64>,
    /// Sample standard deviation; needs two scenarios.
    pub sd: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PctTable {
    pub cells: Vec<ScenarioCell>,
    pub groups: Vec<GroupSummary>,
}

pub fn mean(xs: &[f64]) -> Option<f64> {
    (!xs.is_empty()).then(|| xs.iter().sum::<f64>() / xs.len() as f64)
}

pub fn sample_sd(xs: &[f64]) -> Option<f64> {
    let m = mean(xs)?;
    (xs.len() >= 2).then(|| (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64).sqrt())
}

/// Agents in registry order, unknown ids last in first-seen order.
fn agent_order(rows: &[ResultRow]) -> Vec<String> {
    let mut seen: Vec<String> = Vec::new();
    for r in rows {
        if !seen.contains(&r.agent) {
            seen.push(r.agent.clone());
        }
    }
    let rank = |a: &str| AGENT_IDS.iter().position(|x| *x == a).unwrap_or(AGENT_IDS.len());
    seen.sort_by_key(|a| rank(a));
    seen
}

/// Scenarios in first-seen order.
fn scenario_order(rows: &[ResultRow]) -> Vec<String> {
    let mut seen: Vec<String> = Vec::new();
    for r in rows {
        if !seen.contains(&r.scenario) {
            seen.push(r.scenario.clone());
        }
    }
    seen
}

/// Scenario-level percentages and regime aggregates for every agent in `rows`.
///
/// Every `(scenario, seed)` pair that appears must have an Oracle row. A cell
/// is null when the Oracle mean is not positive or when any contributing
/// episode failed.
pub fn pct_of_oracle(rows: &[ResultRow]) -> Result<PctTable, ReportError> {
    let mut oracle: HashMap<(&str, u64), Option<f64>> = HashMap::new();
    for r in rows.iter().filter(|r| r.agent == ORACLE) {
        oracle.insert((r.scenario.as_str(), r.seed), r.profit);
    }
    for r in rows {
        if !oracle.contains_key(&(r.scenario.as_str(), r.seed)) {
            return Err(ReportError::MissingOracle {
                scenario: r.scenario.clone(),
                seed: r.seed,
            });
        }
    }

    let agents = agent_order(rows);
    let scenarios = scenario_order(rows);
    let mut cells = Vec::new();
    for agent in &agents {
        for sid in &scenarios {
            let sc: Scenario = sid.parse().map_err(|_| ReportError::UnknownScenario(sid.clone()))?;
            let mine: Vec<&ResultRow> = rows
                .iter()
                .filter(|r| &r.agent == agent && &r.scenario == sid)
                .collect();
            if mine.is_empty() {
                continue;
            }
            let mut agent_profits = Vec::new();
            let mut oracle_profits = Vec::new();
            let mut failed = false;
            for r in &mine {
                match (r.profit, oracle[&(sid.as_str(), r.seed)]) {
                    (Some(a), Some(o)) => {
                        agent_profits.push(a);
                        oracle_profits.push(o);
                    }
                    _ => failed = true,
                }
            }
            let (pct, note) = if failed {
                (None, Some("failed episodes".to_owned()))
            } else {
                let om = mean(&oracle_profits).unwrap_or(0.0);
                if om <= 0.0 {
                    (None, Some(format!("oracle mean profit {om} is not positive")))
                } else {
                    (Some(100.0 * mean(&agent_profits).unwrap_or(0.0) / om), None)
                }
            };
            cells.push(ScenarioCell {
                agent: agent.clone(),
                scenario: sid.clone(),
                group: sc.group(),
                pct,
                note,
            });
        }
    }

    let mut groups = Vec::new();
    for agent in &agents {
        for group in RegimeGroup::ALL {
            let pcts: Vec<f64> = cells
                .iter()
                .filter(|c| &c.agent == agent && c.group == group)
                .filter_map(|c| c.pct)
                .collect();
            if cells.iter().any(|c| &c.agent == agent && c.group == group) {
                groups.push(GroupSummary {
                    agent: agent.clone(),
                    group,
                    n: pcts.len(),
                    mean: mean(&pcts),
                    sd: sample_sd(&pcts),
                });
            }
        }
    }
    Ok(PctTable { cells, groups })
}

/// Mean profit over seeds per `(agent, scenario)`, failed rows excluded.
pub fn mean_profit(rows: &[ResultRow]) -> BTreeMap<(String, String), (f64, usize)> {
    let mut acc: BTreeMap<(String, String), (f64, usize)> = BTreeMap::new();
    for r in rows {
        if let Some(p) = r.profit {
            let e = acc.entry((r.agent.clone(), r.scenario.clone())).or_default();
            e.0 += p;
            e.1 += 1;
        }
    }
    for v in acc.values_mut() {
        v.0 /= v.1 as f64;
    }
    acc
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_owned(), |x| format!("{x:.1}"))
}

/// Plain-text rendering: regime summary first, then the scenario matrix.
pub fn render_pct_table(t: &PctTable) -> String {
    let mut agents: Vec<&str> = Vec::new();
    for c in &t.cells {
        if !agents.contains(&c.agent.as_str()) {
            agents.push(&c.agent);
        }
    }
    let mut out = String::new();
    let _ = write!(out, "{:<14}", "agent");
    for g in RegimeGroup::ALL {
        let _ = write!(out, " {:>22}", g.label());
    }
    out.push('\n');
    for a in &agents {
        let _ = write!(out, "{a:<14}");
        for g in RegimeGroup::ALL {
            let cell = t
                .groups
                .iter()
                .find(|s| s.agent == *a && s.group == g)
                .map(|s| format!("{} ± {} (n={})", fmt_opt(s.mean), fmt_opt(s.sd), s.n))
                .unwrap_or_default();
            let _ = write!(out, " {cell:>22}");
        }
        out.push('\n');
    }
    out.push('\n');
    let mut scenarios: Vec<&str> = Vec::new();
    for c in &t.cells {
        if !scenarios.contains(&c.scenario.as_str()) {
            scenarios.push(&c.scenario);
        }
    }
    let _ = write!(out, "{:<40}", "scenario");
    for a in &agents {
        let _ = write!(out, " {a:>13}");
    }
    out.push('\n');
    for s in &scenarios {
        let _ = write!(out, "{s:<40}");
        for a in &agents {
            let v = t
                .cells
                .iter()
                .find(|c| c.agent == *a && c.scenario == *s)
                .and_then(|c| c.pct);
            let _ = write!(out, " {:>13}", fmt_opt(v));
        }
        out.push('\n');
    }
    for c in t.cells.iter().filter(|c| c.note.is_some()) {
        let _ = writeln!(
            out,
            "note: {} / {}: {}",
            c.agent,
            c.scenario,
            c.note.as_deref().unwrap_or("")
        );
    }
    out
}
