//! Agent ids accepted by the runner and the wire client.

use invmgmt_core::agents::{HeuristicAgent, HeuristicKind, ZeroAgent};
use invmgmt_core::optim::{DlpAgent, MsspAgent, OracleAgent};
use invmgmt_core::{Agent, AgentSetup, EpisodeConfig, InfoTier};
use thiserror::Error;

pub const ORACLE: &str = "oracle";

/// Every registered id, in report order.
pub const AGENT_IDS: [&str; 14] = [
    "oracle",
    "mssp-I",
    "mssp",
    "dlp-I",
    "dlp",
    "newsvendor-I",
    "newsvendor",
    "ss-I",
    "ss",
    "expsmooth-I",
    "expsmooth",
    "echelon-I",
    "echelon",
    "zero",
];

#[derive(Debug, Error, Clone, PartialEq)]
#[error("unknown agent `{0}`")]
pub struct UnknownAgent(pub String);

fn split(id: &str) -> (&str, InfoTier) {
    match id.strip_suffix("-I") {
        Some(base) => (base, InfoTier::Informed),
        None => (id, InfoTier::Blind),
    }
}

/// Information tier the environment must expose to `id`.
pub fn agent_tier(id: &str) -> Result<InfoTier, UnknownAgent> {
    if !AGENT_IDS.contains(&id) {
        return Err(UnknownAgent(id.to_owned()));
    }
    Ok(if id == ORACLE { InfoTier::NonCausal } else { split(id).1 })
}

/// Expand a comma-separated roster; `all` selects every registered id.
pub fn parse_roster(spec: &str) -> Result<Vec<String>, UnknownAgent> {
    let mut out: Vec<String> = Vec::new();
    for part in spec.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        if part == "all" {
            out.extend(AGENT_IDS.iter().map(|s| s.to_string()));
            continue;
        }
        agent_tier(part)?;
        out.push(part.to_owned());
    }
    let mut seen = std::collections::HashSet::new();
    out.retain(|id| seen.insert(id.clone()));
    Ok(out)
}

/// Build agent `id` for one episode of `cfg` with stream seed `seed`.
///
/// `cfg.info_tier` is overwritten to match the agent.
pub fn make_agent(id: &str, cfg: &mut EpisodeConfig, seed: u64) -> Result<Box<dyn Agent>, UnknownAgent> {
    cfg.info_tier = agent_tier(id)?;
    if id == ORACLE {
        return Ok(Box::new(OracleAgent::new(cfg.clone(), seed)));
    }
    let setup = AgentSetup::from_config(cfg);
    let (base, tier) = split(id);
    let agent: Box<dyn Agent> = match base {
        "mssp" => Box::new(MsspAgent::new(setup, tier, seed)),
        "dlp" => Box::new(DlpAgent::new(setup, tier)),
        "zero" => Box::new(ZeroAgent::new(&setup)),
        other => {
            let kind = HeuristicKind::ALL
                .into_iter()
                .find(|k| k.name() == other)
                .ok_or_else(|| UnknownAgent(id.to_owned()))?;
            Box::new(HeuristicAgent::new(kind, tier, setup))
        }
    };
    Ok(agent)
}
