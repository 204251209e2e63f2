//! Seeded evaluation episodes and the results CSV.

use std::io::{Read, Write};
use std::time::Instant;

use invmgmt_core::env::kpis;
use invmgmt_core::{Agent, AgentError, CoreEnv, EpisodeRecord, Kpis};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::Scenario;
use crate::registry::{make_agent, UnknownAgent};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EpisodeError {
    #[error(transparent)]
    Agent(#[from] AgentError),
    #[error("environment rejected the action: {0}")]
    Env(String),
    #[error(transparent)]
    Registry(#[from] UnknownAgent),
    #[error("scenario: {0}")]
    Scenario(String),
}

/// Drive `agent` through the remaining periods of `env`.
pub fn drive(agent: &mut dyn Agent, env: &mut CoreEnv, seed: u64) -> Result<(), EpisodeError> {
    agent.reset();
    let mut obs = env.reset(seed);
    while !env.is_done() {
        let action = agent.act(&obs)?;
        obs = env.step(&action).map_err(|e| EpisodeError::Env(e.to_string()))?.0;
    }
    Ok(())
}

/// One `(agent, scenario, seed)` episode and its ledger.
pub fn run_episode(agent_id: &str, scenario: &Scenario, seed: u64) -> Result<EpisodeRecord, EpisodeError> {
    let mut cfg = scenario
        .episode_config()
        .map_err(|e| EpisodeError::Scenario(e.to_string()))?;
    let stream = scenario.episode_seed(seed);
    let mut agent = make_agent(agent_id, &mut cfg, stream)?;
    let mut env = CoreEnv::new(cfg, stream).map_err(|e| EpisodeError::Scenario(e.to_string()))?;
    drive(agent.as_mut(), &mut env, stream)?;
    Ok(env.into_record())
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub agent: String,
    pub scenario: String,
    pub seed: u64,
    pub outcome: Result<Kpis, EpisodeError>,
    pub wall_time_s: f64,
}

impl RunResult {
    pub fn profit(&self) -> Option<f64> {
        self.outcome.as_ref().ok().map(|k| k.profit)
    }

    pub fn is_failed(&self) -> bool {
        self.outcome.is_err()
    }

    /// CSV row; wall time is left blank unless `timing` so that repeated runs
    /// stay byte-identical.
    pub fn to_row(&self, timing: bool) -> ResultRow {
        let k = self.outcome.as_ref().ok();
        ResultRow {
            agent: self.agent.clone(),
            scenario: self.scenario.clone(),
            seed: self.seed,
            profit: k.map(|k| k.profit),
            service_level: k.map(|k| k.service_level),
            fill_rate: k.map(|k| k.fill_rate),
            unfulfilled: k.map(|k| k.total_unfulfilled),
            avg_inventory: k.map(|k| k.avg_inventory),
            bullwhip: k.map(|k| k.bullwhip),
            wall_time_s: timing.then_some(self.wall_time_s),
        }
    }
}

pub fn run_one(agent_id: &str, scenario: &Scenario, seed: u64) -> RunResult {
    let start = Instant::now();
    let outcome = run_episode(agent_id, scenario, seed).map(|rec| kpis(&rec));
    RunResult {
        agent: agent_id.to_owned(),
        scenario: scenario.id.clone(),
        seed,
        outcome,
        wall_time_s: start.elapsed().as_secs_f64(),
    }
}

/// Every `(scenario, seed, agent)` combination, in that nesting order.
///
/// Episodes run in parallel; the output order never depends on scheduling.
/// A failing episode becomes a failed row.
pub fn run_matrix(
    agents: &[String],
    grid: &[Scenario],
    seeds: &[u64],
    on_done: &(dyn Fn(&RunResult) + Sync),
) -> Vec<RunResult> {
    let jobs: Vec<(&Scenario, u64, &str)> = grid
        .iter()
        .flat_map(|sc| {
            seeds
                .iter()
                .flat_map(move |&seed| agents.iter().map(move |a| (sc, seed, a.as_str())))
        })
        .collect();
    jobs.into_par_iter()
        .map(|(sc, seed, agent)| {
            let r = run_one(agent, sc, seed);
            on_done(&r);
            r
        })
        .collect()
}

/// One CSV line. Failed episodes keep the identifying columns and leave the
/// numbers empty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub agent: String,
    pub scenario: String,
    pub seed: u64,
    pub profit: Option<f64>,
    pub service_level: Option<f64>,
    pub fill_rate: Option<f64>,
    pub unfulfilled: Option<f64>,
    pub avg_inventory: Option<f64>,
    pub bullwhip: Option<f64>,
    pub wall_time_s: Option<f64>,
}

pub const CSV_COLUMNS: [&str; 10] = [
    "agent",
    "scenario",
    "seed",
    "profit",
    "service_level",
    "fill_rate",
    "unfulfilled",
    "avg_inventory",
    "bullwhip",
    "wall_time_s",
];

pub fn write_csv<W: Write>(rows: &[ResultRow], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    if rows.is_empty() {
        w.write_record(CSV_COLUMNS)?;
    }
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv<R: Read>(input: R) -> csv::Result<Vec<ResultRow>> {
    csv::Reader::from_reader(input).deserialize().collect()
}

pub fn results_csv(results: &[RunResult], timing: bool) -> String {
    let rows: Vec<_> = results.iter().map(|r| r.to_row(timing)).collect();
    let mut buf = Vec::new();
    write_csv(&rows, &mut buf).expect("writing to memory");
    String::from_utf8(buf).expect("csv is utf-8")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::build_core_grid;

    #[test]
    fn empty_csv_still_has_header() {
        let text = results_csv(&[], false);
        assert_eq!(text.trim_end(), CSV_COLUMNS.join(","));
        assert!(read_csv(text.as_bytes()).unwrap().is_empty());
    }

    #[test]
    fn unknown_agent_is_a_failed_row() {
        let sc = &build_core_grid()[0];
        let r = run_one("ppo", sc, 0);
        assert!(r.is_failed());
        let row = r.to_row(false);
        assert_eq!(row.profit, None);
        assert_eq!(row.scenario, sc.id);
    }
}
