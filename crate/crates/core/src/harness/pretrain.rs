use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::benchmark::{BenchmarkOptions, ResultRow, WorldCache};
use super::episode::run_episode;
use super::reference::{sample_reference_set, sample_start};
use super::{AgentSpec, EpisodeConfig};
use crate::agents::EpisodeContext;
use crate::error::{Error, Result};
use crate::perception::{
    confusion, cross_entropy, init_model, Batch, LabeledView, ModelShape, SegModel, TrainConfig,
    TrainSet,
};
use crate::render::{render_view, RenderConfig};
use crate::rng::rng_from;
use crate::world::{Heading, Pose, HEADING_COUNT};

/// Annotated views at uniform random poses across `worlds`.
pub fn sample_training_views(
    worlds: &WorldCache,
    n: usize,
    seed: u64,
    render: &RenderConfig,
) -> Result<TrainSet> {
    let seeds = worlds.seeds();
    if seeds.is_empty() {
        return Err(Error::Config("no training worlds".into()));
    }
    let mut rng = rng_from(&[seed, 0x9E7]);
    let mut set = TrainSet::new();
    let loaded: Vec<_> = seeds
        .iter()
        .map(|&s| worlds.get(s))
        .collect::<Result<_>>()?;
    let free: Vec<_> = loaded.iter().map(|w| w.free_cells()).collect();
    for _ in 0..n {
        let i = rng.random_range(0..loaded.len());
        let world = &loaded[i];
        let (x, y) = world.cell_center(free[i][rng.random_range(0..free[i].len())]);
        let pose = Pose::new(
            x,
            y,
            Heading::new(rng.random_range(0..HEADING_COUNT as i32)),
        );
        let view = render_view(world, pose, render);
        set.push(LabeledView {
            labels: view.gt_class.clone(),
            view,
        });
    }
    Ok(set)
}

/// Offline momentum SGD on uniformly drawn mini-batches.
pub fn pretrain_model(
    views: &TrainSet,
    shape: ModelShape,
    iterations: usize,
    cfg: &TrainConfig,
    seed: u64,
) -> Result<SegModel> {
    cfg.validate()?;
    if views.is_empty() {
        return Err(Error::EmptyTrainSet);
    }
    let mut model = init_model(shape, seed);
    let mut rng = rng_from(&[seed, 0x9E8]);
    let mut velocity = vec![0.0; model.weights.len()];
    let mut grad = vec![0.0; model.weights.len()];
    let (mut batch, mut scratch, mut probs) = (Batch::default(), Vec::new(), Vec::new());
    for _ in 0..iterations {
        batch.clear();
        for _ in 0..cfg.batch_size {
            batch.push_view(
                &shape,
                &views.views()[rng.random_range(0..views.len())],
                &mut scratch,
            );
        }
        let (loss, _, _) = cross_entropy(&model.weights, &shape, &batch, &mut probs, &mut grad);
        if !loss.is_finite() {
            return Err(Error::NonFinite("pre-training loss"));
        }
        for ((w, v), g) in model.weights.iter_mut().zip(velocity.iter_mut()).zip(&grad) {
            *v = cfg.momentum * *v + g + cfg.weight_decay * *w;
            *w -= cfg.lr * *v;
        }
    }
    Ok(model)
}

#[derive(Clone, Debug)]
pub struct PretrainOptions {
    pub n_views: usize,
    pub iterations: usize,
    pub seed: u64,
    pub eval: BenchmarkOptions,
    pub agent: AgentSpec,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PretrainReport {
    /// Frozen pre-trained model on the evaluation reference sets.
    pub frozen_miou: f64,
    /// Frozen pre-trained model on the views it was trained on.
    pub frozen_train_miou: f64,
    pub scratch_active_miou: f64,
    pub pretrained_active_miou: f64,
    pub rows: Vec<ResultRow>,
}

/// Compares a frozen pre-trained model, per-episode active learning from
/// scratch, and active learning initialised with the pre-trained weights.
pub fn pretrain_experiment(
    opts: &PretrainOptions,
    train_worlds: &WorldCache,
    eval_worlds: &WorldCache,
) -> Result<PretrainReport> {
    let render = RenderConfig::default();
    let views = sample_training_views(train_worlds, opts.n_views, opts.seed, &render)?;
    let first = train_worlds.get(train_worlds.seeds()[0])?;
    let shape = ModelShape::new(render.width, first.appearance_dim(), first.class_count);
    let pretrained = pretrain_model(
        &views,
        shape,
        opts.iterations,
        &TrainConfig::default(),
        opts.seed,
    )?;

    let train_views: Vec<_> = views.views().iter().map(|v| v.view.clone()).collect();
    let frozen_train_miou = confusion(&pretrained, &train_views)?.miou(None)?;

    let jobs = opts.eval.episodes();
    let results = opts
        .eval
        .exec
        .map(&jobs, |&(w, s)| -> Result<Vec<ResultRow>> {
            let world = eval_worlds.get(w)?;
            let mut cfg = EpisodeConfig::new(w, s, opts.eval.regime);
            (opts.eval.configure)(&mut cfg);
            let start = sample_start(&world, s);
            let reference = sample_reference_set(
                &world,
                start,
                cfg.radius,
                cfg.reference_count,
                cfg.sampling_seed,
                &cfg.render,
            )?;
            let cm = confusion(&pretrained, &reference.views)?;
            let mut rows = vec![ResultRow {
                method: "pretrain-frozen".into(),
                world_seed: w,
                start_seed: s,
                miou: cm.miou(None)?,
                acc: cm.accuracy().unwrap_or(0.0),
                n_ann: 0,
                n_coll: 0,
                n_steps: 0,
            }];
            let ctx = EpisodeContext {
                world: &world,
                start,
                radius: cfg.radius,
            };
            for (name, init) in [
                ("scratch-active", None),
                ("pretrain-active", Some(&pretrained)),
            ] {
                let mut agent = opts.agent.build(&ctx)?;
                let record = run_episode(&world, &cfg, name, agent.as_mut(), init)?;
                rows.push(ResultRow::from_record(&record));
            }
            Ok(rows)
        });
    let rows: Vec<ResultRow> = results
        .into_iter()
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect();
    let mean = |m: &str| {
        let v: Vec<f64> = rows
            .iter()
            .filter(|r| r.method == m)
            .map(|r| r.miou)
            .collect();
        v.iter().sum::<f64>() / v.len().max(1) as f64
    };
    Ok(PretrainReport {
        frozen_miou: mean("pretrain-frozen"),
        frozen_train_miou,
        scratch_active_miou: mean("scratch-active"),
        pretrained_active_miou: mean("pretrain-active"),
        rows,
    })
}
