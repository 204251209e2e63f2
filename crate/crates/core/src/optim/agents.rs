use super::{
    declared_mean_path, dlp_step, exogenous_demand_path, goodwill_oracle, mssp_step, normal_tree, oracle_plan,
    poisson_tree, PlanEconomics, PlanError, PlanStart,
};
use crate::agents::{estimate_demand, Agent, AgentError, AgentSetup, DemandHistory};
use crate::env::{EpisodeConfig, InfoTier, Observation};
use crate::rng::RngStream;

impl From<PlanError> for AgentError {
    fn from(e: PlanError) -> Self {
        match e {
            PlanError::Unsupported(m) => AgentError::Unsupported(m),
            other => AgentError::Solver(other.to_string()),
        }
    }
}

/// Non-causal benchmark: plans once against the realized episode and replays
/// the plan open-loop. Under goodwill it uses the fixed-point procedure.
#[derive(Debug, Clone)]
pub struct OracleAgent {
    cfg: EpisodeConfig,
    seed: u64,
    plan: Option<Vec<Vec<f64>>>,
}

impl OracleAgent {
    pub fn new(cfg: EpisodeConfig, seed: u64) -> Self {
        Self { cfg, seed, plan: None }
    }

    fn ensure_plan(&mut self) -> Result<&[Vec<f64>], AgentError> {
        if self.plan.is_none() {
            let actions = if self.cfg.goodwill_enabled {
                goodwill_oracle(
                    &self.cfg,
                    self.seed,
                    crate::defaults::PlannerParams::default().goodwill_iterations,
                )?
                .actions
            } else {
                let demand = exogenous_demand_path(&self.cfg, self.seed)?;
                oracle_plan(&self.cfg, &demand)?.actions
            };
            self.plan = Some(actions);
        }
        Ok(self.plan.as_deref().expect("just planned"))
    }
}

impl Agent for OracleAgent {
    fn id(&self) -> &str {
        "oracle"
    }

    fn tier(&self) -> InfoTier {
        InfoTier::NonCausal
    }

    fn reset(&mut self) {}

    fn act(&mut self, obs: &Observation) -> Result<Vec<f64>, AgentError> {
        let t = obs.t;
        let plan = self.ensure_plan()?;
        plan.get(t)
            .cloned()
            .ok_or_else(|| AgentError::Solver(format!("plan has no period {t}")))
    }
}

/// Shared forecasting for rolling planners.
#[derive(Debug, Clone)]
struct Rolling {
    setup: AgentSetup,
    econ: PlanEconomics,
    tier: InfoTier,
    history: DemandHistory,
}

impl Rolling {
    fn new(setup: AgentSetup, tier: InfoTier) -> Self {
        let econ = PlanEconomics {
            topology: setup.topology.clone(),
            fulfillment: setup.fulfillment,
            discount: setup.discount,
        };
        Self {
            setup,
            econ,
            tier,
            history: DemandHistory::default(),
        }
    }

    fn stages(&self, t: usize) -> usize {
        self.setup
            .planner
            .horizon_cap
            .min(self.setup.horizon.saturating_sub(t))
            .max(1)
    }

    fn start(&mut self, obs: &Observation) -> PlanStart {
        self.history.observe(obs);
        PlanStart::from_observation(obs, &self.setup.topology)
    }

    /// `(mean, std)` per retail edge from realized history.
    fn blind_moments(&self) -> Result<(Vec<f64>, Vec<f64>), AgentError> {
        let n = self.setup.topology.num_retail();
        let mut mean = Vec::with_capacity(n);
        let mut std = Vec::with_capacity(n);
        for k in 0..n {
            let e = estimate_demand(
                self.history.edge(k),
                InfoTier::Blind,
                None,
                self.setup.heuristics.prior_mean,
            )?;
            mean.push(e.mean);
            std.push(e.std);
        }
        Ok((mean, std))
    }

    fn mean_path(&self, obs: &Observation, stages: usize) -> Result<Vec<Vec<f64>>, AgentError> {
        match self.tier {
            InfoTier::Blind => {
                let (mean, _) = self.blind_moments()?;
                Ok(vec![mean; stages])
            }
            _ => {
                let ctx = obs.context.as_ref().ok_or(AgentError::MissingContext)?;
                Ok(declared_mean_path(&ctx.models, obs.sentiment(), obs.t, stages))
            }
        }
    }
}

fn tiered_id(base: &str, tier: InfoTier) -> String {
    match tier {
        InfoTier::Blind => base.to_owned(),
        _ => format!("{base}-I"),
    }
}

/// Rolling deterministic lookahead on the expected demand path.
#[derive(Debug, Clone)]
pub struct DlpAgent {
    id: String,
    inner: Rolling,
}

impl DlpAgent {
    pub fn new(setup: AgentSetup, tier: InfoTier) -> Self {
        Self {
            id: tiered_id("dlp", tier),
            inner: Rolling::new(setup, tier),
        }
    }
}

impl Agent for DlpAgent {
    fn id(&self) -> &str {
        &self.id
    }

    fn tier(&self) -> InfoTier {
        self.inner.tier
    }

    fn reset(&mut self) {
        self.inner.history.clear();
    }

    fn act(&mut self, obs: &Observation) -> Result<Vec<f64>, AgentError> {
        let start = self.inner.start(obs);
        let forecast = self.inner.mean_path(obs, self.inner.stages(obs.t))?;
        Ok(dlp_step(&self.inner.econ, &start, &forecast)?)
    }
}

/// Rolling multi-stage stochastic program on a sampled scenario tree.
///
/// Informed: Poisson draws around the declared mean path. Blind: truncated
/// normal draws around the history mean with the history std.
#[derive(Debug, Clone)]
pub struct MsspAgent {
    id: String,
    inner: Rolling,
    sampler: RngStream,
}

impl MsspAgent {
    pub fn new(setup: AgentSetup, tier: InfoTier, seed: u64) -> Self {
        Self {
            id: tiered_id("mssp", tier),
            inner: Rolling::new(setup, tier),
            sampler: RngStream::named(seed, "mssp-scenarios"),
        }
    }
}

impl Agent for MsspAgent {
    fn id(&self) -> &str {
        &self.id
    }

    fn tier(&self) -> InfoTier {
        self.inner.tier
    }

    fn reset(&mut self) {
        self.inner.history.clear();
    }

    fn act(&mut self, obs: &Observation) -> Result<Vec<f64>, AgentError> {
        let start = self.inner.start(obs);
        let stages = self.inner.stages(obs.t);
        let branching = self.inner.setup.planner.branching.clone();
        let mut rng = self.sampler.generator_at(obs.t as u64);
        let tree = match self.inner.tier {
            InfoTier::Blind => {
                let (mean, std) = self.inner.blind_moments()?;
                normal_tree(stages, &mean, &std, &branching, &mut rng)?
            }
            _ => {
                let means = self.inner.mean_path(obs, stages)?;
                poisson_tree(&means, &branching, &mut rng)?
            }
        };
        Ok(mssp_step(&self.inner.econ, &start, tree)?)
    }
}
