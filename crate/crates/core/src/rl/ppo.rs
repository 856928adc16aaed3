//! Proximal policy optimisation over whole 256-step episodes.
//!
//! Rollout workers run episodes with an immutable snapshot of the policy;
//! the learner then applies clipped-surrogate updates serially. Advantages
//! are discounted returns minus the value estimate, normalised per batch.

use std::io::Write;
use std::sync::Arc;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::{
    d_entropy, d_log_prob, ActionSet, Adam, FeatureSpec, PolicyModel, RlAgent, Transition,
};
use crate::agents::{EpisodeContext, ExplorerKind};
use crate::error::{Error, Result};
use crate::harness::{run_episode, sample_start, EpisodeConfig, Regime, WorldCache};
use crate::par::Execution;
use crate::rng::{hash_seed, rng_from};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PpoConfig {
    pub lr: f64,
    pub clip: f64,
    /// Minimum number of transitions per update.
    pub batch: usize,
    pub minibatch: usize,
    pub epochs: usize,
    pub value_coef: f64,
    pub entropy_coef: f64,
    /// Global gradient-norm limit.
    pub max_grad_norm: f64,
}

impl Default for PpoConfig {
    fn default() -> Self {
        Self {
            lr: 1e-4,
            clip: 0.2,
            batch: 512,
            minibatch: 128,
            epochs: 4,
            value_coef: 0.5,
            entropy_coef: 0.01,
            max_grad_norm: 0.5,
        }
    }
}

impl PpoConfig {
    pub fn validate(&self) -> Result<()> {
        if self.lr <= 0.0
            || self.clip <= 0.0
            || self.batch == 0
            || self.minibatch == 0
            || self.epochs == 0
            || self.max_grad_norm <= 0.0
        {
            return Err(Error::Config("PPO hyperparameters must be positive".into()));
        }
        Ok(())
    }
}

/// Per-sample clipped surrogate `min(r A, clip(r, 1-e, 1+e) A)`.
pub fn clipped_surrogate(ratio: f64, advantage: f64, clip: f64) -> f64 {
    (ratio * advantage).min(ratio.clamp(1.0 - clip, 1.0 + clip) * advantage)
}

/// Derivative of [`clipped_surrogate`] with respect to the ratio. Zero
/// exactly where the clipped branch is the smaller one.
pub fn d_clipped_surrogate(ratio: f64, advantage: f64, clip: f64) -> f64 {
    if ratio * advantage <= ratio.clamp(1.0 - clip, 1.0 + clip) * advantage {
        advantage
    } else {
        0.0
    }
}

/// One training sample after advantage estimation.
#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    pub features: Vec<f64>,
    pub action: usize,
    pub old_log_prob: f64,
    pub ret: f64,
    pub advantage: f64,
}

/// Turns whole-episode transition lists into samples. Advantages are
/// normalised to zero mean and unit variance over the batch.
pub fn build_samples(episodes: &[Vec<Transition>], gamma: f64) -> Vec<Sample> {
    let mut out = Vec::new();
    for ep in episodes {
        let rewards: Vec<f64> = ep.iter().map(|t| t.reward).collect();
        let returns = super::discounted_returns(&rewards, gamma);
        for (t, r) in ep.iter().zip(returns) {
            out.push(Sample {
                features: t.features.clone(),
                action: t.action,
                old_log_prob: t.log_prob,
                ret: r,
                advantage: r - t.value,
            });
        }
    }
    let n = out.len().max(1) as f64;
    let mean = out.iter().map(|s| s.advantage).sum::<f64>() / n;
    let std = (out
        .iter()
        .map(|s| (s.advantage - mean).powi(2))
        .sum::<f64>()
        / n)
        .sqrt();
    for s in &mut out {
        s.advantage = (s.advantage - mean) / (std + 1e-8);
    }
    out
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct LossParts {
    /// Mean negative clipped surrogate.
    pub policy: f64,
    pub value: f64,
    pub entropy: f64,
    pub total: f64,
}

/// Mean PPO loss over `batch` and its gradient (written into `grad`).
pub fn ppo_loss(
    model: &PolicyModel,
    params: &[f64],
    batch: &[&Sample],
    cfg: &PpoConfig,
    grad: &mut [f64],
) -> LossParts {
    grad.iter_mut().for_each(|g| *g = 0.0);
    let mut parts = LossParts::default();
    let n = batch.len().max(1) as f64;
    for s in batch {
        let out = model.forward_with(params, &s.features);
        let ratio = (out.log_prob(s.action) - s.old_log_prob).exp();
        let err = out.value - s.ret;
        let entropy = out.entropy();
        parts.policy -= clipped_surrogate(ratio, s.advantage, cfg.clip) / n;
        parts.value += err * err / n;
        parts.entropy += entropy / n;

        let d_ratio = -d_clipped_surrogate(ratio, s.advantage, cfg.clip) * ratio / n;
        let dl = d_log_prob(&out.probs, s.action);
        let de = d_entropy(&out.probs);
        let d_logits: Vec<f64> = dl
            .iter()
            .zip(&de)
            .map(|(l, e)| d_ratio * l - cfg.entropy_coef * e / n)
            .collect();
        model.backward(
            params,
            &s.features,
            &out,
            &d_logits,
            cfg.value_coef * 2.0 * err / n,
            grad,
        );
    }
    parts.total = parts.policy + cfg.value_coef * parts.value - cfg.entropy_coef * parts.entropy;
    parts
}

fn clip_grad_norm(grad: &mut [f64], max: f64) -> f64 {
    let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
    if norm > max {
        let s = max / norm;
        grad.iter_mut().for_each(|g| *g *= s);
    }
    norm
}

/// Runs the PPO epochs on one batch. Fails on any non-finite loss or
/// parameter.
pub fn ppo_update(
    model: &mut PolicyModel,
    adam: &mut Adam,
    samples: &[Sample],
    cfg: &PpoConfig,
    seed: u64,
) -> Result<LossParts> {
    let mut rng = rng_from(&[seed, 0x990]);
    let mut order: Vec<usize> = (0..samples.len()).collect();
    let mut grad = vec![0.0; model.params.len()];
    let mut last = LossParts::default();
    for epoch in 0..cfg.epochs {
        rand::seq::SliceRandom::shuffle(order.as_mut_slice(), &mut rng);
        for chunk in order.chunks(cfg.minibatch) {
            let batch: Vec<&Sample> = chunk.iter().map(|&i| &samples[i]).collect();
            last = ppo_loss(model, &model.params, &batch, cfg, &mut grad);
            if !last.total.is_finite() {
                return Err(Error::Divergence(format!(
                    "non-finite loss in epoch {epoch} (policy {}, value {}, entropy {})",
                    last.policy, last.value, last.entropy
                )));
            }
            let norm = clip_grad_norm(&mut grad, cfg.max_grad_norm);
            if !norm.is_finite() {
                return Err(Error::Divergence(format!(
                    "non-finite gradient norm in epoch {epoch}"
                )));
            }
            adam.step(&mut model.params, &grad);
        }
    }
    if model.params.iter().any(|p| !p.is_finite()) {
        return Err(Error::Divergence(
            "non-finite policy parameters after update".into(),
        ));
    }
    Ok(last)
}

/// What to train and on which episodes.
#[derive(Clone, Debug)]
pub struct TrainOptions {
    pub episodes: usize,
    /// Episodes collected concurrently with one policy snapshot.
    pub workers: usize,
    pub seed: u64,
    pub action_set: ActionSet,
    pub spec: FeatureSpec,
    /// Base explorer for [`ActionSet::PerceptionOnly`].
    pub base: Option<ExplorerKind>,
    /// When false the exploration reward is zero.
    pub explore_reward: bool,
    pub steps: usize,
    pub ppo: PpoConfig,
    /// Validate after every this many updates (and at the end).
    pub val_every: usize,
    /// (world seed, start seed) pairs for validation.
    pub val_episodes: Vec<(u64, u64)>,
    pub exec: Execution,
}

impl TrainOptions {
    pub fn new(episodes: usize, seed: u64) -> Self {
        Self {
            episodes,
            workers: 4,
            seed,
            action_set: ActionSet::Full,
            spec: FeatureSpec::new(13),
            base: None,
            explore_reward: true,
            steps: 256,
            ppo: PpoConfig::default(),
            val_every: 25,
            val_episodes: Vec::new(),
            exec: Execution::default(),
        }
    }
}

/// One row of the training log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainLogRow {
    pub episode: usize,
    #[serde(rename = "return")]
    pub ret: f64,
    pub n_annotate: usize,
    pub n_collect: usize,
    /// Latest validation mIoU, if one has been run.
    pub val_miou: Option<f64>,
}

pub fn write_train_log<W: Write>(rows: &[TrainLogRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub struct TrainOutcome {
    /// Policy with the best validation mIoU (the final policy when no
    /// validation episodes were given).
    pub best: PolicyModel,
    pub best_val_miou: Option<f64>,
    pub last: PolicyModel,
    pub log: Vec<TrainLogRow>,
}

struct Rollout {
    transitions: Vec<Transition>,
    ret: f64,
    n_annotate: usize,
    n_collect: usize,
}

fn episode_config(opts: &TrainOptions, world_seed: u64, start_seed: u64) -> EpisodeConfig {
    let mut cfg = EpisodeConfig::new(world_seed, start_seed, Regime::Steps(opts.steps));
    if !opts.explore_reward {
        cfg.reward.a = 0.0;
        cfg.reward.b = 0.0;
    }
    cfg
}

fn rollout(
    opts: &TrainOptions,
    policy: &Arc<PolicyModel>,
    worlds: &WorldCache,
    world_seed: u64,
    start_seed: u64,
) -> Result<Rollout> {
    let world = worlds.get(world_seed)?;
    let cfg = episode_config(opts, world_seed, start_seed);
    let ctx = EpisodeContext {
        world: &world,
        start: sample_start(&world, start_seed),
        radius: cfg.radius,
    };
    let mut agent = RlAgent::new(policy.clone(), opts.base.map(|b| b.build(&ctx)))?;
    agent.record = true;
    let record = run_episode(&world, &cfg, "rl", &mut agent, None)?;
    Ok(Rollout {
        transitions: agent.transitions,
        ret: record.total_return,
        n_annotate: record.n_annotate,
        n_collect: record.n_collect,
    })
}

/// Mean final mIoU of `policy` over `episodes`.
pub fn validate_policy(
    opts: &TrainOptions,
    policy: &Arc<PolicyModel>,
    worlds: &WorldCache,
    episodes: &[(u64, u64)],
) -> Result<f64> {
    let results = opts.exec.map(episodes, |&(w, s)| -> Result<f64> {
        let world = worlds.get(w)?;
        let cfg = episode_config(opts, w, s);
        let ctx = EpisodeContext {
            world: &world,
            start: sample_start(&world, s),
            radius: cfg.radius,
        };
        let mut agent = RlAgent::new(policy.clone(), opts.base.map(|b| b.build(&ctx)))?;
        Ok(run_episode(&world, &cfg, "rl", &mut agent, None)?.final_miou)
    });
    let v: Vec<f64> = results.into_iter().collect::<Result<_>>()?;
    Ok(v.iter().sum::<f64>() / v.len().max(1) as f64)
}

/// Trains a policy on `train` worlds and keeps the checkpoint with the best
/// validation mIoU on `val` worlds. Deterministic in the options.
pub fn ppo_train(
    opts: &TrainOptions,
    train: &WorldCache,
    val: &WorldCache,
) -> Result<TrainOutcome> {
    opts.ppo.validate()?;
    if opts.workers == 0 || opts.episodes == 0 || opts.val_every == 0 {
        return Err(Error::Config(
            "episodes, workers and val_every must be positive".into(),
        ));
    }
    if opts.action_set == ActionSet::PerceptionOnly && opts.base.is_none() {
        return Err(Error::Config(
            "perception-only training needs a base explorer".into(),
        ));
    }
    let train_seeds = train.seeds();
    if train_seeds.is_empty() {
        return Err(Error::Config("no training worlds".into()));
    }
    let mut model = PolicyModel::init(opts.spec, opts.action_set, hash_seed(&[opts.seed, 0x1417]));
    let mut adam = Adam::new(model.params.len(), opts.ppo.lr);
    let mut job_rng = rng_from(&[opts.seed, 0x10B5]);
    let mut log = Vec::with_capacity(opts.episodes);
    let mut pending: Vec<Vec<Transition>> = Vec::new();
    let mut pending_len = 0;
    let (mut updates, mut best, mut best_val, mut val_miou) =
        (0usize, model.clone(), None::<f64>, None);
    let gamma = EpisodeConfig::new(0, 0, Regime::Steps(1)).reward.discount;

    let mut done = 0;
    while done < opts.episodes {
        let n = opts.workers.min(opts.episodes - done);
        // start seeds live far from the evaluation starts
        let jobs: Vec<(u64, u64)> = (0..n)
            .map(|_| {
                (
                    train_seeds[job_rng.random_range(0..train_seeds.len())],
                    1_000_000 + job_rng.random_range(0..1_000_000u64),
                )
            })
            .collect();
        let snapshot = Arc::new(model.clone());
        let rollouts = opts
            .exec
            .map(&jobs, |&(w, s)| rollout(opts, &snapshot, train, w, s));
        for r in rollouts {
            let r = r?;
            done += 1;
            log.push(TrainLogRow {
                episode: done,
                ret: r.ret,
                n_annotate: r.n_annotate,
                n_collect: r.n_collect,
                val_miou,
            });
            pending_len += r.transitions.len();
            pending.push(r.transitions);
        }
        if pending_len < opts.ppo.batch && done < opts.episodes {
            continue;
        }
        if pending_len > 0 {
            let samples = build_samples(&pending, gamma);
            let loss = ppo_update(
                &mut model,
                &mut adam,
                &samples,
                &opts.ppo,
                hash_seed(&[opts.seed, updates as u64]),
            )?;
            log::debug!(
                "update {updates}: policy {:.4} value {:.4} entropy {:.3}",
                loss.policy,
                loss.value,
                loss.entropy
            );
            updates += 1;
        }
        pending.clear();
        pending_len = 0;
        if !opts.val_episodes.is_empty() && (updates % opts.val_every == 0 || done == opts.episodes)
        {
            let v = validate_policy(opts, &Arc::new(model.clone()), val, &opts.val_episodes)?;
            log::info!("episode {done}: validation mIoU {v:.4}");
            val_miou = Some(v);
            if let Some(row) = log.last_mut() {
                row.val_miou = Some(v);
            }
            if best_val.is_none_or(|b| v > b) {
                best_val = Some(v);
                best = model.clone();
            }
        }
    }
    if opts.val_episodes.is_empty() {
        best = model.clone();
    }
    Ok(TrainOutcome {
        best,
        best_val_miou: best_val,
        last: model,
        log,
    })
}
