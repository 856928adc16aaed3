//! Pre-specified exploration policies and annotation strategies.
//!
//! An [`Agent`] emits one of seven [`Action`]s per step. Most agents are an
//! [`Explorer`] (movement only) composed with a [`PerceptionStrategy`] that
//! decides when to annotate or collect.

mod basic;
mod frontier;
mod navigate;
mod occupancy;
mod spacefill;
pub mod tsp;

pub use basic::{BounceExplorer, RandomExplorer, RotateExplorer};
pub use frontier::FrontierExplorer;
pub use navigate::Navigator;
pub use occupancy::{MapCell, OccupancyMap, OCCUPANCY_RANGE};
pub use spacefill::{
    build_space_filling_tour, SpaceFillerExplorer, SpaceFillingTour, NODE_SPACING,
};

use std::fmt;
use std::str::FromStr;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::perception::Prediction;
use crate::propagation::PropagatedMask;
use crate::render::View;
use crate::rng::Rng;
use crate::world::{GridWorld, MovementAction, Pose};

/// The seven actions. Indices 0..5 follow [`MovementAction::ALL`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Action {
    Move(MovementAction),
    Annotate,
    Collect,
}

impl Action {
    pub const COUNT: usize = 7;

    pub fn index(self) -> usize {
        match self {
            Action::Move(m) => MovementAction::ALL
                .iter()
                .position(|&a| a == m)
                .unwrap_or(0),
            Action::Annotate => 5,
            Action::Collect => 6,
        }
    }

    pub fn from_index(i: usize) -> Option<Action> {
        match i {
            0..5 => Some(Action::Move(MovementAction::ALL[i])),
            5 => Some(Action::Annotate),
            6 => Some(Action::Collect),
            _ => None,
        }
    }

    pub fn is_perception(self) -> bool {
        matches!(self, Action::Annotate | Action::Collect)
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Action::Move(m) => write!(f, "{m:?}"),
            Action::Annotate => f.write_str("Annotate"),
            Action::Collect => f.write_str("Collect"),
        }
    }
}

/// What an agent sees at one step.
#[derive(Clone, Copy, Debug)]
pub struct Observation<'a> {
    pub view: &'a View,
    pub prediction: &'a Prediction,
    pub prop_mask: &'a PropagatedMask,
    /// Whether the previous action was a blocked translation.
    pub collision: bool,
    pub step_index: usize,
    pub last_action: Option<Action>,
}

impl Observation<'_> {
    pub fn pose(&self) -> Pose {
        self.view.pose
    }
}

/// Episode facts available when an agent is built. Only the space filler
/// reads the world itself.
#[derive(Clone, Copy, Debug)]
pub struct EpisodeContext<'a> {
    pub world: &'a GridWorld,
    pub start: Pose,
    pub radius: f64,
}

pub trait Agent: Send {
    fn act(&mut self, obs: &Observation<'_>, rng: &mut Rng) -> Action;

    /// Reward earned by the action just taken.
    fn observe_reward(&mut self, _reward: f64) {}
}

/// Movement-only policy.
pub trait Explorer: Send {
    fn next_move(&mut self, obs: &Observation<'_>, rng: &mut Rng) -> MovementAction;
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThresholdConfig {
    pub collect_threshold: f64,
    pub annotate_threshold: f64,
}

impl Default for ThresholdConfig {
    fn default() -> Self {
        Self {
            collect_threshold: 0.30,
            annotate_threshold: 0.85,
        }
    }
}

impl ThresholdConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = 0.0 < self.collect_threshold
            && self.collect_threshold < self.annotate_threshold
            && self.annotate_threshold <= 1.0;
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!(
                "need 0 < collect < annotate <= 1, got {self:?}"
            )))
        }
    }
}

/// Threshold rule on the unknown fraction; `None` defers to movement.
/// Annotate is checked first.
pub fn threshold_perception(unknown_fraction: f64, cfg: &ThresholdConfig) -> Option<Action> {
    if unknown_fraction >= cfg.annotate_threshold {
        Some(Action::Annotate)
    } else if unknown_fraction >= cfg.collect_threshold {
        Some(Action::Collect)
    } else {
        None
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ExplorerKind {
    Random,
    Rotate,
    Bounce,
    Frontier,
    SpaceFiller,
}

impl ExplorerKind {
    pub const ALL: [ExplorerKind; 5] = [
        ExplorerKind::Random,
        ExplorerKind::Rotate,
        ExplorerKind::Bounce,
        ExplorerKind::Frontier,
        ExplorerKind::SpaceFiller,
    ];

    pub fn id(self) -> &'static str {
        match self {
            ExplorerKind::Random => "random",
            ExplorerKind::Rotate => "rotate",
            ExplorerKind::Bounce => "bounce",
            ExplorerKind::Frontier => "frontier",
            ExplorerKind::SpaceFiller => "spacefill",
        }
    }

    pub fn build(self, ctx: &EpisodeContext<'_>) -> Box<dyn Explorer> {
        match self {
            ExplorerKind::Random => Box::new(RandomExplorer),
            ExplorerKind::Rotate => Box::new(RotateExplorer),
            ExplorerKind::Bounce => Box::new(BounceExplorer::default()),
            ExplorerKind::Frontier => Box::new(FrontierExplorer::new(ctx)),
            ExplorerKind::SpaceFiller => Box::new(SpaceFillerExplorer::new(ctx)),
        }
    }
}

impl FromStr for ExplorerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.id() == s)
            .ok_or_else(|| Error::UnknownId {
                kind: "agent",
                value: s.to_string(),
            })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PerceptionKind {
    Threshold,
    Random,
    Learnt,
}

impl PerceptionKind {
    pub fn id(self) -> &'static str {
        match self {
            PerceptionKind::Threshold => "threshold",
            PerceptionKind::Random => "random",
            PerceptionKind::Learnt => "learnt",
        }
    }
}

impl FromStr for PerceptionKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [
            PerceptionKind::Threshold,
            PerceptionKind::Random,
            PerceptionKind::Learnt,
        ]
        .into_iter()
        .find(|k| k.id() == s)
        .ok_or_else(|| Error::UnknownId {
            kind: "perception",
            value: s.to_string(),
        })
    }
}

/// Decides perception actions on top of an explorer.
#[derive(Clone, Debug)]
pub enum PerceptionStrategy {
    /// Threshold rule with at most one Collect per annotation: Collect
    /// leaves the unknown fraction unchanged, so without this the rule
    /// would collect the same view forever.
    Threshold {
        cfg: ThresholdConfig,
        collected: bool,
    },
    /// Annotate and Collect with probability `p` each, else movement.
    Random { p: f64 },
}

impl PerceptionStrategy {
    pub fn threshold() -> Self {
        PerceptionStrategy::Threshold {
            cfg: ThresholdConfig::default(),
            collected: false,
        }
    }

    pub fn random() -> Self {
        PerceptionStrategy::Random { p: 0.1 }
    }

    pub fn decide(&mut self, mask: &PropagatedMask, rng: &mut Rng) -> Option<Action> {
        match self {
            PerceptionStrategy::Threshold { cfg, collected } => {
                match threshold_perception(mask.unknown_fraction(), cfg) {
                    Some(Action::Annotate) => {
                        *collected = false;
                        Some(Action::Annotate)
                    }
                    Some(Action::Collect) if !*collected => {
                        *collected = true;
                        Some(Action::Collect)
                    }
                    _ => None,
                }
            }
            PerceptionStrategy::Random { p } => {
                let u: f64 = rng.random();
                if u < *p {
                    Some(Action::Annotate)
                } else if u < 2.0 * *p {
                    Some(guard_collect(mask))
                } else {
                    None
                }
            }
        }
    }
}

/// Collect on an all-unknown mask has nothing to add; it becomes Annotate.
pub fn guard_collect(mask: &PropagatedMask) -> Action {
    if mask.is_all_unknown() {
        Action::Annotate
    } else {
        Action::Collect
    }
}

/// An explorer with a perception strategy layered on top.
pub struct ComposedAgent {
    pub explorer: Box<dyn Explorer>,
    pub perception: PerceptionStrategy,
}

impl ComposedAgent {
    pub fn new(explorer: Box<dyn Explorer>, perception: PerceptionStrategy) -> Self {
        Self {
            explorer,
            perception,
        }
    }
}

impl Agent for ComposedAgent {
    fn act(&mut self, obs: &Observation<'_>, rng: &mut Rng) -> Action {
        if let Some(a) = self.perception.decide(obs.prop_mask, rng) {
            return a;
        }
        Action::Move(self.explorer.next_move(obs, rng))
    }
}
