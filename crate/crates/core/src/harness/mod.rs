//! Episode execution, reference-view evaluation, benchmarks and the
//! experiment drivers built on them.

mod ablation;
mod benchmark;
mod episode;
mod pretrain;
mod reference;
mod stats;

pub use ablation::{
    ablation_suite, parse_flags, variant_name, variant_options, AblationFlag, AblationResult,
};
pub use benchmark::{
    benchmark, read_results_csv, summarize, validation_episodes, write_results_csv,
    BenchmarkOptions, MethodSummary, ResultRow, Split, WorldCache, VALIDATION_STARTS,
};
pub use episode::{
    run_episode, run_episode_detailed, CurvePoint, EpisodeOutcome, EpisodeRecord, RewardParts,
    StepLog, RECORD_VERSION,
};
pub use pretrain::{
    pretrain_experiment, pretrain_model, sample_training_views, PretrainOptions, PretrainReport,
};
pub use reference::{sample_reference_set, sample_start, ReferenceSet};
pub use stats::{paired_t_test, PairedTest};

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::agents::{
    Agent, ComposedAgent, EpisodeContext, ExplorerKind, PerceptionKind, PerceptionStrategy,
};
use crate::error::{Error, Result};
use crate::perception::TrainConfig;
use crate::render::RenderConfig;
use crate::rl::{PolicyModel, RewardConfig, RlAgent};

/// Which of the two termination rules binds.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Regime {
    Steps(usize),
    Budget(usize),
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Regime::Steps(n) => write!(f, "steps:{n}"),
            Regime::Budget(n) => write!(f, "budget:{n}"),
        }
    }
}

impl FromStr for Regime {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Config(format!("regime must be steps:N or budget:N, got `{s}`"));
        let (kind, n) = s.split_once(':').ok_or_else(bad)?;
        let n: usize = n.parse().map_err(|_| bad())?;
        if n == 0 {
            return Err(bad());
        }
        match kind {
            "steps" => Ok(Regime::Steps(n)),
            "budget" => Ok(Regime::Budget(n)),
            _ => Err(bad()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeConfig {
    pub world_seed: u64,
    pub start_seed: u64,
    pub regime: Regime,
    /// Hard step limit for the budget regime.
    pub safety_cap: usize,
    pub radius: f64,
    pub reference_count: usize,
    pub sampling_seed: u64,
    pub policy_seed: u64,
    pub training_seed: u64,
    /// Metrics are also recorded every this many steps.
    pub curve_every: usize,
    pub render: RenderConfig,
    pub train: TrainConfig,
    pub reward: RewardConfig,
}

impl EpisodeConfig {
    /// Defaults for one (world, start) pair; every seed is derived from the
    /// pair so all agents see the same start and reference views.
    pub fn new(world_seed: u64, start_seed: u64, regime: Regime) -> Self {
        Self {
            world_seed,
            start_seed,
            regime,
            safety_cap: 20_000,
            radius: 5.0,
            reference_count: 32,
            sampling_seed: start_seed,
            policy_seed: start_seed,
            training_seed: start_seed,
            curve_every: 32,
            render: RenderConfig::default(),
            train: TrainConfig::default(),
            reward: RewardConfig::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.train.validate()?;
        if self.radius <= 0.0 || self.reference_count == 0 || self.curve_every == 0 {
            return Err(Error::Config(
                "radius, reference_count and curve_every must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// How to build the agent for an episode.
#[derive(Clone, Debug)]
pub enum AgentSpec {
    Baseline {
        explorer: ExplorerKind,
        perception: PerceptionKind,
    },
    Learnt {
        name: String,
        policy: Arc<PolicyModel>,
        base: Option<ExplorerKind>,
    },
}

impl AgentSpec {
    pub fn baseline(explorer: ExplorerKind) -> Self {
        AgentSpec::Baseline {
            explorer,
            perception: PerceptionKind::Threshold,
        }
    }

    pub fn learnt(policy: Arc<PolicyModel>) -> Self {
        AgentSpec::Learnt {
            name: "rl".into(),
            policy,
            base: None,
        }
    }

    pub fn name(&self) -> String {
        match self {
            AgentSpec::Baseline {
                explorer,
                perception: PerceptionKind::Threshold,
            } => explorer.id().to_string(),
            AgentSpec::Baseline {
                explorer,
                perception,
            } => format!("{}+{}", explorer.id(), perception.id()),
            AgentSpec::Learnt { name, .. } => name.clone(),
        }
    }

    pub fn build(&self, ctx: &EpisodeContext<'_>) -> Result<Box<dyn Agent>> {
        match self {
            AgentSpec::Baseline {
                explorer,
                perception,
            } => {
                let strategy = match perception {
                    PerceptionKind::Threshold => PerceptionStrategy::threshold(),
                    PerceptionKind::Random => PerceptionStrategy::random(),
                    PerceptionKind::Learnt => {
                        return Err(Error::Config(
                            "learnt perception needs a policy checkpoint".into(),
                        ));
                    }
                };
                Ok(Box::new(ComposedAgent::new(explorer.build(ctx), strategy)))
            }
            AgentSpec::Learnt { policy, base, .. } => Ok(Box::new(RlAgent::new(
                policy.clone(),
                base.map(|b| b.build(ctx)),
            )?)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn regimes_parse() {
        assert_eq!("steps:256".parse::<Regime>().unwrap(), Regime::Steps(256));
        assert_eq!("budget:100".parse::<Regime>().unwrap(), Regime::Budget(100));
        for bad in ["steps", "budget:x", "walk:3", "steps:0"] {
            assert!(bad.parse::<Regime>().is_err(), "{bad}");
        }
        assert_eq!(Regime::Budget(7).to_string(), "budget:7");
    }

    #[test]
    fn agent_names() {
        assert_eq!(AgentSpec::baseline(ExplorerKind::Bounce).name(), "bounce");
        let random = AgentSpec::Baseline {
            explorer: ExplorerKind::Frontier,
            perception: PerceptionKind::Random,
        };
        assert_eq!(random.name(), "frontier+random");
    }
}
