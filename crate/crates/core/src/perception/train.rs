use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::{build_inputs, forward, ModelShape, SegModel, UNKNOWN};
use crate::error::{Error, Result};
use crate::render::View;
use crate::rng::Rng;
use crate::world::ClassId;

/// A view paired with per-pixel labels, some possibly [`UNKNOWN`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabeledView {
    pub view: View,
    pub labels: Vec<ClassId>,
}

impl LabeledView {
    pub fn known_count(&self) -> usize {
        self.labels.iter().filter(|&&l| l != UNKNOWN).count()
    }
}

/// Append-only pool of labelled views for one episode.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainSet {
    views: Vec<LabeledView>,
}

impl TrainSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, item: LabeledView) {
        self.views.push(item);
    }

    pub fn len(&self) -> usize {
        self.views.len()
    }

    pub fn is_empty(&self) -> bool {
        self.views.is_empty()
    }

    pub fn latest(&self) -> Option<&LabeledView> {
        self.views.last()
    }

    pub fn views(&self) -> &[LabeledView] {
        &self.views
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub lr: f64,
    pub momentum: f64,
    pub weight_decay: f64,
    pub max_iters: usize,
    pub early_stop_acc: f64,
    /// Smallest crop, as a fraction of the strip width.
    pub crop_min_fraction: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 8,
            lr: 0.01,
            momentum: 0.9,
            weight_decay: 1e-5,
            max_iters: 1000,
            early_stop_acc: 0.95,
            crop_min_fraction: 0.5,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0
            || self.lr <= 0.0
            || self.momentum < 0.0
            || self.weight_decay < 0.0
            || self.max_iters == 0
        {
            return Err(Error::Config(
                "training hyperparameters must be positive".into(),
            ));
        }
        if !(self.early_stop_acc > 0.0 && self.early_stop_acc <= 1.0) {
            return Err(Error::Config("early_stop_acc must be in (0, 1]".into()));
        }
        if !(self.crop_min_fraction > 0.0 && self.crop_min_fraction <= 1.0) {
            return Err(Error::Config("crop_min_fraction must be in (0, 1]".into()));
        }
        Ok(())
    }
}

/// Stacked design matrix and labels for a set of strips.
#[derive(Clone, Debug, Default)]
pub struct Batch {
    pub inputs: Vec<f64>,
    pub labels: Vec<ClassId>,
}

impl Batch {
    pub fn clear(&mut self) {
        self.inputs.clear();
        self.labels.clear();
    }

    /// Appends a strip given as raw features/depth/labels.
    pub fn push_strip(
        &mut self,
        shape: &ModelShape,
        features: &[f64],
        depth: &[f64],
        labels: &[ClassId],
        scratch: &mut Vec<f64>,
    ) {
        build_inputs(shape, features, depth, scratch);
        self.inputs.extend_from_slice(scratch);
        self.labels.extend_from_slice(labels);
    }

    pub fn push_view(&mut self, shape: &ModelShape, item: &LabeledView, scratch: &mut Vec<f64>) {
        self.push_strip(
            shape,
            &item.view.features,
            &item.view.depth,
            &item.labels,
            scratch,
        );
    }
}

/// Mean pixel-wise cross-entropy over known pixels and its gradient with
/// respect to the weights. Unknown pixels contribute nothing. Returns
/// `(loss, known_pixels, correct_pixels)`; the loss is 0 with no known pixels.
pub fn cross_entropy(
    weights: &[f64],
    shape: &ModelShape,
    batch: &Batch,
    probs: &mut Vec<f64>,
    grad: &mut [f64],
) -> (f64, usize, usize) {
    let k = shape.classes;
    let f = shape.input_dim();
    forward(weights, k, f, &batch.inputs, probs);
    grad.iter_mut().for_each(|g| *g = 0.0);
    let known = batch.labels.iter().filter(|&&l| l != UNKNOWN).count();
    if known == 0 {
        return (0.0, 0, 0);
    }
    let scale = 1.0 / known as f64;
    let mut loss = 0.0;
    let mut correct = 0;
    for (p, &label) in batch.labels.iter().enumerate() {
        if label == UNKNOWN {
            continue;
        }
        let row = &probs[p * k..(p + 1) * k];
        let mut best = 0;
        for c in 1..k {
            if row[c] > row[best] {
                best = c;
            }
        }
        if best == label as usize {
            correct += 1;
        }
        loss -= row[label as usize].max(1e-300).ln();
        let x = &batch.inputs[p * f..(p + 1) * f];
        for c in 0..k {
            let delta = (row[c] - if c == label as usize { 1.0 } else { 0.0 }) * scale;
            if delta != 0.0 {
                let g = &mut grad[c * f..(c + 1) * f];
                for (gi, xi) in g.iter_mut().zip(x) {
                    *gi += delta * xi;
                }
            }
        }
    }
    (loss * scale, known, correct)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RefineStats {
    /// SGD updates applied.
    pub iterations: usize,
    pub stopped_early: bool,
    /// Accuracy of the last evaluated mini-batch.
    pub last_batch_accuracy: f64,
    pub last_loss: f64,
}

/// Random contiguous crop of at least `min_fraction` of the strip, rescaled
/// back to full width with nearest-neighbour sampling. Returns the source
/// pixel index for each output pixel.
fn crop_indices(width: usize, min_fraction: f64, rng: &mut Rng) -> Vec<usize> {
    let min_len = ((width as f64 * min_fraction).ceil() as usize).clamp(1, width);
    let len = rng.random_range(min_len..=width);
    let start = rng.random_range(0..=width - len);
    (0..width).map(|p| start + p * len / width).collect()
}

fn count_correct(probs: &[f64], classes: usize, labels: &[ClassId]) -> (usize, usize) {
    let mut known = 0;
    let mut correct = 0;
    for (p, &label) in labels.iter().enumerate() {
        if label == UNKNOWN {
            continue;
        }
        known += 1;
        let row = &probs[p * classes..(p + 1) * classes];
        let mut best = 0;
        for c in 1..classes {
            if row[c] > row[best] {
                best = c;
            }
        }
        correct += (best == label as usize) as usize;
    }
    (known, correct)
}

/// Refines `model` on `trainset` with momentum SGD.
///
/// Each mini-batch holds `batch_size` views sampled with replacement and
/// always includes the most recently added view. Gradient steps use randomly
/// cropped and rescaled copies of the batch. Training stops after `max_iters`
/// updates, or as soon as the pixel accuracy of the sampled views (at full
/// resolution, current weights) exceeds `early_stop_acc`.
pub fn refine(
    model: &mut SegModel,
    trainset: &TrainSet,
    cfg: &TrainConfig,
    rng: &mut Rng,
) -> Result<RefineStats> {
    cfg.validate()?;
    if trainset.is_empty() {
        return Err(Error::EmptyTrainSet);
    }
    let shape = model.shape;
    for item in trainset.views() {
        if item.view.width != shape.width {
            return Err(Error::WidthMismatch {
                expected: shape.width,
                got: item.view.width,
            });
        }
    }
    if model.velocity.len() != model.weights.len() {
        model.velocity = vec![0.0; model.weights.len()];
    }
    let w = shape.width;
    let d = shape.appearance_dim;
    let mut batch = Batch::default();
    let mut scratch = Vec::new();
    let mut probs = Vec::new();
    let mut grad = vec![0.0; model.weights.len()];
    let (mut feat, mut depth, mut labels) = (
        Vec::with_capacity(w * d),
        Vec::with_capacity(w),
        Vec::with_capacity(w),
    );
    let mut stats = RefineStats::default();

    // Full-resolution design matrices, used for the stopping check.
    let plain: Vec<Vec<f64>> = trainset
        .views()
        .iter()
        .map(|item| {
            let mut m = Vec::new();
            build_inputs(&shape, &item.view.features, &item.view.depth, &mut m);
            m
        })
        .collect();
    let last = trainset.len() - 1;
    let mut picks = Vec::with_capacity(cfg.batch_size);

    for _ in 0..cfg.max_iters {
        picks.clear();
        picks.push(last);
        for _ in 1..cfg.batch_size {
            picks.push(rng.random_range(0..trainset.len()));
        }

        // Stopping rule: pixel accuracy of the sampled mini-batch views.
        let (mut known, mut correct) = (0usize, 0usize);
        for &v in &picks {
            forward(
                &model.weights,
                shape.classes,
                shape.input_dim(),
                &plain[v],
                &mut probs,
            );
            let (k, c) = count_correct(&probs, shape.classes, &trainset.views()[v].labels);
            known += k;
            correct += c;
        }
        if known > 0 {
            stats.last_batch_accuracy = correct as f64 / known as f64;
            if stats.last_batch_accuracy > cfg.early_stop_acc {
                stats.stopped_early = true;
                break;
            }
        }

        batch.clear();
        for &v in &picks {
            let item = &trainset.views()[v];
            let idx = crop_indices(w, cfg.crop_min_fraction, rng);
            feat.clear();
            depth.clear();
            labels.clear();
            for &s in &idx {
                feat.extend_from_slice(item.view.pixel_features(s));
                depth.push(item.view.depth[s]);
                labels.push(item.labels[s]);
            }
            batch.push_strip(&shape, &feat, &depth, &labels, &mut scratch);
        }
        let (loss, known, _) = cross_entropy(&model.weights, &shape, &batch, &mut probs, &mut grad);
        if !loss.is_finite() {
            return Err(Error::NonFinite("segmentation loss"));
        }
        if known == 0 {
            continue;
        }
        stats.last_loss = loss;
        for ((wi, vi), gi) in model
            .weights
            .iter_mut()
            .zip(model.velocity.iter_mut())
            .zip(&grad)
        {
            let g = gi + cfg.weight_decay * *wi;
            *vi = cfg.momentum * *vi + g;
            *wi -= cfg.lr * *vi;
        }
        stats.iterations += 1;
    }
    Ok(stats)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::perception::tests::sample_views;
    use crate::perception::{init_model, predict, ModelShape};
    use crate::rng::rng_from;

    fn full(view: &View) -> LabeledView {
        LabeledView {
            view: view.clone(),
            labels: view.gt_class.clone(),
        }
    }

    #[test]
    fn gradient_matches_central_differences() {
        let (_, views) = sample_views(3, 3);
        let shape = ModelShape::new(64, 8, 13);
        let mut rng = rng_from(&[77]);
        for trial in 0..10u64 {
            let model = init_model(shape, trial);
            let mut weights = model.weights.clone();
            for w in weights.iter_mut() {
                *w *= 30.0;
            }
            let mut batch = Batch::default();
            let mut scratch = Vec::new();
            let mut item = full(&views[trial as usize % 3]);
            for l in item.labels.iter_mut().step_by(3) {
                *l = UNKNOWN;
            }
            batch.push_view(&shape, &item, &mut scratch);
            let mut probs = Vec::new();
            let mut grad = vec![0.0; weights.len()];
            cross_entropy(&weights, &shape, &batch, &mut probs, &mut grad);
            let mut g2 = vec![0.0; weights.len()];
            for _ in 0..25 {
                let i = rng.random_range(0..weights.len());
                let h = 1e-5;
                let mut wp = weights.clone();
                wp[i] += h;
                let lp = cross_entropy(&wp, &shape, &batch, &mut probs, &mut g2).0;
                wp[i] -= 2.0 * h;
                let lm = cross_entropy(&wp, &shape, &batch, &mut probs, &mut g2).0;
                let fd = (lp - lm) / (2.0 * h);
                // near-zero components are compared against a 1e-4 floor
                let rel = (fd - grad[i]).abs() / fd.abs().max(grad[i].abs()).max(1e-4);
                assert!(
                    rel < 1e-5,
                    "trial {trial} param {i}: fd {fd} analytic {}",
                    grad[i]
                );
            }
        }
    }

    #[test]
    fn unknown_pixels_have_no_influence() {
        let (_, views) = sample_views(3, 1);
        let shape = ModelShape::new(64, 8, 13);
        let weights = init_model(shape, 1).weights;
        let mut a = full(&views[0]);
        for l in a.labels.iter_mut().take(20) {
            *l = UNKNOWN;
        }
        let mut scratch = Vec::new();
        let mut ba = Batch::default();
        ba.push_view(&shape, &a, &mut scratch);
        let mut probs = Vec::new();
        let mut ga = vec![0.0; weights.len()];
        let la = cross_entropy(&weights, &shape, &ba, &mut probs, &mut ga);
        // Unknown pixels carry no label to perturb, so drop them entirely.
        let mut b = Batch::default();
        let f = shape.input_dim();
        for p in 20..64 {
            b.inputs.extend_from_slice(&ba.inputs[p * f..(p + 1) * f]);
            b.labels.push(ba.labels[p]);
        }
        let mut gb = vec![0.0; weights.len()];
        let lb = cross_entropy(&weights, &shape, &b, &mut probs, &mut gb);
        assert_eq!(la.0.to_bits(), lb.0.to_bits());
        assert_eq!(ga, gb);
    }

    #[test]
    fn single_view_converges_or_runs_full_budget() {
        let (_, views) = sample_views(4, 2);
        let shape = ModelShape::new(64, 8, 13);
        for v in &views {
            let mut model = init_model(shape, 5);
            let mut set = TrainSet::new();
            set.push(full(v));
            let stats = refine(
                &mut model,
                &set,
                &TrainConfig::default(),
                &mut rng_from(&[1]),
            )
            .unwrap();
            let pred = predict(&model, v).unwrap().argmax();
            let acc = pred.iter().zip(&v.gt_class).filter(|(a, b)| a == b).count() as f64 / 64.0;
            assert!(
                acc >= 0.95 || stats.iterations == 1000,
                "acc {acc} after {stats:?}"
            );
        }
    }

    #[test]
    fn one_known_pixel_still_moves_weights() {
        let (_, views) = sample_views(4, 1);
        let shape = ModelShape::new(64, 8, 13);
        let mut model = init_model(shape, 5);
        let before = model.weights.clone();
        let mut item = full(&views[0]);
        for l in item.labels.iter_mut() {
            *l = UNKNOWN;
        }
        item.labels[32] = 3;
        let mut set = TrainSet::new();
        set.push(item);
        let cfg = TrainConfig {
            max_iters: 20,
            crop_min_fraction: 1.0,
            ..TrainConfig::default()
        };
        refine(&mut model, &set, &cfg, &mut rng_from(&[2])).unwrap();
        assert_ne!(model.weights, before);
    }

    #[test]
    fn loss_decreases_on_separable_fixture() {
        let (_, views) = sample_views(6, 4);
        let shape = ModelShape::new(64, 8, 13);
        let mut model = init_model(shape, 0);
        let mut set = TrainSet::new();
        for v in &views {
            set.push(full(v));
        }
        let mut batch = Batch::default();
        let mut scratch = Vec::new();
        for item in set.views() {
            batch.push_view(&shape, item, &mut scratch);
        }
        let mut probs = Vec::new();
        let mut g = vec![0.0; shape.param_count()];
        let mut last = cross_entropy(&model.weights, &shape, &batch, &mut probs, &mut g).0;
        let cfg = TrainConfig {
            max_iters: 1,
            crop_min_fraction: 1.0,
            early_stop_acc: 1.0,
            ..TrainConfig::default()
        };
        let mut rng = rng_from(&[3]);
        for it in 0..10 {
            refine(&mut model, &set, &cfg, &mut rng).unwrap();
            let now = cross_entropy(&model.weights, &shape, &batch, &mut probs, &mut g).0;
            assert!(now < last, "iteration {it}: {now} >= {last}");
            last = now;
        }
    }

    #[test]
    fn refine_is_deterministic_and_rejects_empty_sets() {
        let (_, views) = sample_views(4, 3);
        let shape = ModelShape::new(64, 8, 13);
        let mut set = TrainSet::new();
        for v in &views {
            set.push(full(v));
        }
        let run = || {
            let mut m = init_model(shape, 9);
            refine(&mut m, &set, &TrainConfig::default(), &mut rng_from(&[4])).unwrap();
            m
        };
        assert_eq!(run().weights, run().weights);
        let mut m = init_model(shape, 9);
        assert!(matches!(
            refine(
                &mut m,
                &TrainSet::new(),
                &TrainConfig::default(),
                &mut rng_from(&[4])
            ),
            Err(Error::EmptyTrainSet)
        ));
    }

    #[test]
    fn crops_cover_at_least_half_the_strip() {
        let mut rng = rng_from(&[8]);
        for _ in 0..200 {
            let idx = crop_indices(64, 0.5, &mut rng);
            assert_eq!(idx.len(), 64);
            assert!(idx.windows(2).all(|w| w[1] >= w[0] && w[1] - w[0] <= 1));
            assert!(idx[63] - idx[0] + 1 >= 32);
        }
    }
}
