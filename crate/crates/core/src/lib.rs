//! Multi-echelon inventory-control simulation kernel.
//!
//! The crate is organised around one transition contract ([`env::CoreEnv`])
//! that every controller is evaluated through:
//!
//! - [`topology`]: supply-chain graphs, economics and the built-in networks.
//! - [`demand`]: exogenous demand paths, modifiers, trace replay and goodwill.
//! - [`env`]: feasibility allocation, material balance, pipeline, reward,
//!   KPIs and the flat observation vector.
//! - [`agents`]: classical heuristics with blind and informed variants.
//! - [`optim`]: the LP-based planners (Oracle, DLP, MSSP, goodwill Oracle).

pub mod agents;
pub mod defaults;
pub mod demand;
pub mod env;
pub mod optim;
pub mod rng;
pub mod topology;

pub use agents::{Agent, AgentError, AgentSetup, InfoTier};
pub use demand::{DemandModel, GoodwillParams, GoodwillState, Modifier};
pub use env::{CoreEnv, EpisodeConfig, EpisodeRecord, Fulfillment, Kpis, Observation, StepResult};
pub use rng::RngStream;
pub use topology::Topology;
