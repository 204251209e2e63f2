//! Benchmark harness over the inventory kernel: the core scenario grid,
//! seeded matrix runs, percent-of-Oracle reporting and the wire protocol.

pub mod grid;
pub mod registry;
pub mod report;
pub mod runner;
pub mod wire;

pub use grid::{build_core_grid, RegimeGroup, Scenario};
pub use registry::{make_agent, parse_roster, AGENT_IDS};
pub use report::{pct_of_oracle, PctTable};
pub use runner::{run_matrix, run_one, ResultRow, RunResult};
