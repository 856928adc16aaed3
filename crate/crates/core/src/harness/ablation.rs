use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{benchmark, AgentSpec, BenchmarkOptions, EpisodeRecord, WorldCache};
use crate::error::{Error, Result};
use crate::rl::ppo::{ppo_train, TrainLogRow, TrainOptions};
use crate::rl::ActionSet;

/// One switch of the RL ablation study.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum AblationFlag {
    /// Zero every feature derived from the propagated mask.
    NoPropFeatures,
    /// Train without the exploration reward.
    NoExploreReward,
    /// Drop the Collect action.
    NoCollect,
    /// Learn movement only; perception follows the threshold rule.
    HeuristicPerceptionOnly,
}

impl AblationFlag {
    pub const ALL: [AblationFlag; 4] = [
        AblationFlag::NoPropFeatures,
        AblationFlag::NoExploreReward,
        AblationFlag::NoCollect,
        AblationFlag::HeuristicPerceptionOnly,
    ];

    pub fn id(self) -> &'static str {
        match self {
            AblationFlag::NoPropFeatures => "no_prop_features",
            AblationFlag::NoExploreReward => "no_explore_reward",
            AblationFlag::NoCollect => "no_collect",
            AblationFlag::HeuristicPerceptionOnly => "heuristic_perception_only",
        }
    }
}

impl fmt::Display for AblationFlag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for AblationFlag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().replace('-', "_");
        Self::ALL
            .into_iter()
            .find(|f| f.id() == key)
            .ok_or_else(|| Error::UnknownId {
                kind: "ablation flag",
                value: s.to_string(),
            })
    }
}

/// Parses a comma separated flag list into a sorted set. The empty string
/// (or `full`) is the unablated model.
pub fn parse_flags(s: &str) -> Result<Vec<AblationFlag>> {
    let mut flags = Vec::new();
    for part in s
        .split(',')
        .map(str::trim)
        .filter(|p| !p.is_empty() && *p != "full")
    {
        flags.push(part.parse()?);
    }
    flags.sort();
    flags.dedup();
    Ok(flags)
}

/// Method name used in result tables.
pub fn variant_name(flags: &[AblationFlag]) -> String {
    if flags.is_empty() {
        return "rl".into();
    }
    let ids: Vec<&str> = flags.iter().map(|f| f.id()).collect();
    format!("rl-{}", ids.join("+"))
}

/// Training options for a variant. The empty set leaves `base` untouched.
pub fn variant_options(base: &TrainOptions, flags: &[AblationFlag]) -> Result<TrainOptions> {
    let mut opts = base.clone();
    if flags.contains(&AblationFlag::NoCollect)
        && flags.contains(&AblationFlag::HeuristicPerceptionOnly)
    {
        return Err(Error::Config(
            "no_collect and heuristic_perception_only both fix the perception actions".into(),
        ));
    }
    for flag in flags {
        match flag {
            AblationFlag::NoPropFeatures => opts.spec.no_prop_features = true,
            AblationFlag::NoExploreReward => opts.explore_reward = false,
            AblationFlag::NoCollect => opts.action_set = ActionSet::NoCollect,
            AblationFlag::HeuristicPerceptionOnly => opts.action_set = ActionSet::MovementOnly,
        }
    }
    Ok(opts)
}

pub struct AblationResult {
    pub name: String,
    pub flags: Vec<AblationFlag>,
    pub best_val_miou: Option<f64>,
    pub log: Vec<TrainLogRow>,
    pub records: Vec<EpisodeRecord>,
}

/// Trains one policy per flag set and benchmarks each on `eval`.
pub fn ablation_suite(
    variants: &[Vec<AblationFlag>],
    train_opts: &TrainOptions,
    eval: &BenchmarkOptions,
    train: &WorldCache,
    val: &WorldCache,
    test: &WorldCache,
) -> Result<Vec<AblationResult>> {
    let mut out = Vec::with_capacity(variants.len());
    for flags in variants {
        let opts = variant_options(train_opts, flags)?;
        let name = variant_name(flags);
        log::info!("training {name}");
        let trained = ppo_train(&opts, train, val)?;
        let spec = AgentSpec::Learnt {
            name: name.clone(),
            policy: Arc::new(trained.best),
            base: opts.base,
        };
        let records = benchmark(&[spec], eval, test)?;
        out.push(AblationResult {
            name,
            flags: flags.clone(),
            best_val_miou: trained.best_val_miou,
            log: trained.log,
            records,
        });
    }
    Ok(out)
}
