//! The learnt agent: featurization, policy network, rewards and PPO.

mod features;
mod policy;
pub mod ppo;
mod reward;

pub use features::{
    featurize, instant_features, FeatureMemory, FeatureSpec, DEPTH_BINS, MEMORY_DECAY,
};
pub use policy::{
    d_entropy, d_log_prob, read_policy, write_policy, Adam, PolicyModel, PolicyOutput, HIDDEN,
};
pub use reward::{
    annotate_reward, collect_reward, discounted_returns, exploration_reward, final_reward,
    RewardConfig,
};

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::agents::{guard_collect, Action, Agent, Explorer, Observation, PerceptionStrategy};
use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::world::MovementAction;

/// Which decisions the policy makes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ActionSet {
    /// All seven actions.
    Full,
    /// Movement and Annotate.
    NoCollect,
    /// Movement only; perception follows the threshold rule.
    MovementOnly,
    /// Follow a base explorer, Annotate, or Collect.
    PerceptionOnly,
}

impl ActionSet {
    pub const ALL: [ActionSet; 4] = [
        ActionSet::Full,
        ActionSet::NoCollect,
        ActionSet::MovementOnly,
        ActionSet::PerceptionOnly,
    ];

    pub fn len(self) -> usize {
        match self {
            ActionSet::Full => 7,
            ActionSet::NoCollect => 6,
            ActionSet::MovementOnly => 5,
            ActionSet::PerceptionOnly => 3,
        }
    }

    pub fn is_empty(self) -> bool {
        false
    }

    pub fn id(self) -> &'static str {
        match self {
            ActionSet::Full => "full",
            ActionSet::NoCollect => "no-collect",
            ActionSet::MovementOnly => "movement",
            ActionSet::PerceptionOnly => "perception",
        }
    }
}

impl fmt::Display for ActionSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for ActionSet {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|a| a.id() == s)
            .ok_or_else(|| Error::UnknownId {
                kind: "action set",
                value: s.to_string(),
            })
    }
}

/// One policy decision kept for training.
#[derive(Clone, Debug, PartialEq)]
pub struct Transition {
    pub features: Vec<f64>,
    pub action: usize,
    pub log_prob: f64,
    pub value: f64,
    pub reward: f64,
}

pub fn sample_index(probs: &[f64], rng: &mut Rng) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.len() - 1
}

/// Agent driven by a [`PolicyModel`].
pub struct RlAgent {
    pub policy: Arc<PolicyModel>,
    memory: FeatureMemory,
    overlay: PerceptionStrategy,
    base: Option<Box<dyn Explorer>>,
    /// Keep transitions for training.
    pub record: bool,
    pub transitions: Vec<Transition>,
}

impl RlAgent {
    /// `base` is required for [`ActionSet::PerceptionOnly`] and ignored
    /// otherwise.
    pub fn new(policy: Arc<PolicyModel>, base: Option<Box<dyn Explorer>>) -> Result<Self> {
        if policy.action_set == ActionSet::PerceptionOnly && base.is_none() {
            return Err(Error::Config(
                "perception-only policy needs a base explorer".into(),
            ));
        }
        Ok(Self {
            memory: FeatureMemory::new(&policy.spec),
            policy,
            overlay: PerceptionStrategy::threshold(),
            base,
            record: false,
            transitions: Vec::new(),
        })
    }

    fn map_index(&mut self, i: usize, obs: &Observation<'_>, rng: &mut Rng) -> Action {
        match self.policy.action_set {
            ActionSet::Full | ActionSet::NoCollect | ActionSet::MovementOnly => {
                Action::from_index(i).unwrap_or(Action::Annotate)
            }
            ActionSet::PerceptionOnly => match i {
                0 => Action::Move(
                    self.base
                        .as_mut()
                        .map_or(MovementAction::RotateLeft, |b| b.next_move(obs, rng)),
                ),
                1 => Action::Annotate,
                _ => Action::Collect,
            },
        }
    }
}

impl Agent for RlAgent {
    fn act(&mut self, obs: &Observation<'_>, rng: &mut Rng) -> Action {
        let features = featurize(obs, &self.policy.spec, &mut self.memory);
        if self.policy.action_set == ActionSet::MovementOnly {
            if let Some(a) = self.overlay.decide(obs.prop_mask, rng) {
                return a;
            }
        }
        let out = match self.policy.forward(&features) {
            Ok(out) => out,
            Err(e) => {
                log::warn!("policy forward failed: {e}");
                return Action::Move(MovementAction::RotateLeft);
            }
        };
        let i = sample_index(&out.probs, rng);
        let action = match self.map_index(i, obs, rng) {
            Action::Collect => guard_collect(obs.prop_mask),
            a => a,
        };
        if self.record {
            self.transitions.push(Transition {
                log_prob: out.log_prob(i),
                value: out.value,
                features,
                action: i,
                reward: 0.0,
            });
        }
        action
    }

    fn observe_reward(&mut self, reward: f64) {
        if let Some(t) = self.transitions.last_mut() {
            t.reward += reward;
        }
    }
}
