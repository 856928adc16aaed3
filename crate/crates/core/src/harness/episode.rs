use serde::{Deserialize, Serialize};

use super::reference::{sample_reference_set, sample_start, ReferenceSet};
use super::{EpisodeConfig, Regime};
use crate::agents::{Action, Agent, Observation};
use crate::error::Result;
use crate::perception::{
    confusion, init_model, predict, refine, top_k_classes, ModelShape, SegModel, TrainSet,
};
use crate::propagation::{do_annotate, do_collect, propagate};
use crate::render::{correspondence, render_view};
use crate::rl::{annotate_reward, collect_reward, exploration_reward, final_reward};
use crate::rng::rng_from;
use crate::world::{step_pose, ClassId, GridWorld, Pose};

pub const RECORD_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RewardParts {
    pub exploration: f64,
    pub perception: f64,
    pub terminal: f64,
}

impl RewardParts {
    pub fn total(&self) -> f64 {
        self.exploration + self.perception + self.terminal
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepLog {
    pub step: usize,
    pub action: Action,
    /// Pose after the action.
    pub pose: Pose,
    pub collided: bool,
    /// Unknown fraction of the propagated mask after the action.
    pub unknown_fraction: f64,
    pub reward: RewardParts,
    /// A Collect on an all-unknown mask that was executed as Annotate.
    pub collect_converted: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    /// Steps completed.
    pub step: usize,
    pub n_annotate: usize,
    pub n_collect: usize,
    pub miou: f64,
    pub accuracy: f64,
}

/// Everything needed to replay and plot one episode.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub version: u32,
    pub method: String,
    pub config: EpisodeConfig,
    pub start: Pose,
    pub reference_poses: Vec<Pose>,
    pub reward_classes: Vec<ClassId>,
    pub steps: Vec<StepLog>,
    pub curve: Vec<CurvePoint>,
    pub n_annotate: usize,
    pub n_collect: usize,
    pub n_steps: usize,
    pub final_miou: f64,
    pub final_accuracy: f64,
    /// Reward mIoU (top classes) after training on the initial view.
    pub initial_reward_miou: f64,
    pub final_reward_miou: f64,
    pub total_return: f64,
}

impl EpisodeRecord {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let record: Self = serde_json::from_str(text)?;
        if record.version != RECORD_VERSION {
            return Err(crate::Error::format(
                "episode record",
                format!("unsupported version {}", record.version),
            ));
        }
        Ok(record)
    }

    /// Number of logged actions of the given kind.
    pub fn count(&self, action: Action) -> usize {
        self.steps.iter().filter(|s| s.action == action).count()
    }
}

/// A finished episode with the artifacts that produced the record.
pub struct EpisodeOutcome {
    pub record: EpisodeRecord,
    pub model: SegModel,
    pub trainset: TrainSet,
    pub reference: ReferenceSet,
}

struct Evaluation {
    miou: f64,
    accuracy: f64,
    reward_miou: f64,
}

fn evaluate(
    model: &SegModel,
    reference: &ReferenceSet,
    reward_classes: &[ClassId],
) -> Result<Evaluation> {
    let cm = confusion(model, &reference.views)?;
    Ok(Evaluation {
        miou: cm.miou(None)?,
        accuracy: cm.accuracy().unwrap_or(0.0),
        reward_miou: cm.miou(Some(reward_classes)).unwrap_or(0.0),
    })
}

pub fn run_episode(
    world: &GridWorld,
    cfg: &EpisodeConfig,
    method: &str,
    agent: &mut dyn Agent,
    init: Option<&SegModel>,
) -> Result<EpisodeRecord> {
    run_episode_detailed(world, cfg, method, agent, init).map(|o| o.record)
}

/// Runs one episode. The model starts from `init` (or fresh weights),
/// trains on the initial ground-truth view, then follows the agent until
/// the regime ends.
pub fn run_episode_detailed(
    world: &GridWorld,
    cfg: &EpisodeConfig,
    method: &str,
    agent: &mut dyn Agent,
    init: Option<&SegModel>,
) -> Result<EpisodeOutcome> {
    cfg.validate()?;
    let start = sample_start(world, cfg.start_seed);
    let reference = sample_reference_set(
        world,
        start,
        cfg.radius,
        cfg.reference_count,
        cfg.sampling_seed,
        &cfg.render,
    )?;
    let reward_classes = top_k_classes(&reference.views, cfg.reward.top_k);
    let shape = ModelShape::new(cfg.render.width, world.appearance_dim(), world.class_count);
    let mut model = match init {
        Some(m) => {
            let mut m = m.clone();
            m.reset_momentum();
            m
        }
        None => init_model(
            shape,
            crate::rng::hash_seed(&[world.seed, cfg.start_seed, cfg.training_seed]),
        ),
    };
    let mut train_rng = rng_from(&[world.seed, cfg.start_seed, cfg.training_seed, 0x7A1]);
    let mut agent_rng = rng_from(&[world.seed, cfg.start_seed, cfg.policy_seed, 0xA6E]);

    let mut view = render_view(world, start, &cfg.render);
    let mut trainset = TrainSet::new();
    let mut mask = do_annotate(&mut trainset, &view);
    refine(&mut model, &trainset, &cfg.train, &mut train_rng)?;
    let mut eval = evaluate(&model, &reference, &reward_classes)?;
    let initial_reward_miou = eval.reward_miou;
    let mut prediction = predict(&model, &view)?;

    let mut curve = vec![CurvePoint {
        step: 0,
        n_annotate: 0,
        n_collect: 0,
        miou: eval.miou,
        accuracy: eval.accuracy,
    }];
    let mut steps = Vec::new();
    let mut trace: Vec<(f64, f64)> = Vec::new();
    let (mut n_ann, mut n_coll) = (0usize, 0usize);
    let mut collision = false;
    let mut last_action = None;
    let mut total_return = 0.0;

    let finished = |step: usize, n_ann: usize| match cfg.regime {
        Regime::Steps(n) => step >= n,
        Regime::Budget(b) => n_ann >= b || step >= cfg.safety_cap,
    };

    let mut step = 0;
    while !finished(step, n_ann) {
        let obs = Observation {
            view: &view,
            prediction: &prediction,
            prop_mask: &mask,
            collision,
            step_index: step,
            last_action,
        };
        let mut action = agent.act(&obs, &mut agent_rng);
        let mut converted = false;
        if action == Action::Collect && mask.is_all_unknown() {
            action = Action::Annotate;
            converted = true;
        }
        let mut reward = RewardParts::default();
        collision = false;
        match action {
            Action::Move(m) => {
                let out = step_pose(world, view.pose, m);
                collision = out.collided;
                let next = render_view(world, out.pose, &cfg.render);
                mask = propagate(&mask, &correspondence(&view, &next));
                view = next;
                prediction = predict(&model, &view)?;
                reward.exploration = exploration_reward(&trace, view.pose.position(), &cfg.reward);
            }
            Action::Annotate | Action::Collect => {
                let before = eval.reward_miou;
                if action == Action::Annotate {
                    mask = do_annotate(&mut trainset, &view);
                    n_ann += 1;
                } else {
                    do_collect(&mut trainset, &view, &mask)?;
                    n_coll += 1;
                }
                refine(&mut model, &trainset, &cfg.train, &mut train_rng)?;
                eval = evaluate(&model, &reference, &reward_classes)?;
                prediction = predict(&model, &view)?;
                reward.perception = if action == Action::Annotate {
                    annotate_reward(eval.reward_miou, before, &cfg.reward)
                } else {
                    collect_reward(eval.reward_miou, before)
                };
            }
        }
        trace.push(view.pose.position());
        step += 1;
        if action.is_perception() {
            curve.push(CurvePoint {
                step,
                n_annotate: n_ann,
                n_collect: n_coll,
                miou: eval.miou,
                accuracy: eval.accuracy,
            });
        } else if step % cfg.curve_every == 0 {
            curve.push(CurvePoint {
                step,
                n_annotate: n_ann,
                n_collect: n_coll,
                miou: eval.miou,
                accuracy: eval.accuracy,
            });
        }
        if finished(step, n_ann) {
            reward.terminal = final_reward(eval.reward_miou, initial_reward_miou);
        }
        total_return += reward.total();
        agent.observe_reward(reward.total());
        steps.push(StepLog {
            step: step - 1,
            action,
            pose: view.pose,
            collided: collision,
            unknown_fraction: mask.unknown_fraction(),
            reward,
            collect_converted: converted,
        });
        last_action = Some(action);
    }

    let record = EpisodeRecord {
        version: RECORD_VERSION,
        method: method.to_string(),
        config: cfg.clone(),
        start,
        reference_poses: reference.poses(),
        reward_classes,
        n_annotate: n_ann,
        n_collect: n_coll,
        n_steps: step,
        final_miou: eval.miou,
        final_accuracy: eval.accuracy,
        initial_reward_miou,
        final_reward_miou: eval.reward_miou,
        total_return,
        steps,
        curve,
    };
    Ok(EpisodeOutcome {
        record,
        model,
        trainset,
        reference,
    })
}
