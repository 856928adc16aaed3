//! Online per-pixel segmentation model.
//!
//! A linear softmax classifier over a context window of appearance features
//! (plus normalized depth and a bias), refined online with SGD whenever the
//! agent adds a labelled view.

mod checkpoint;
mod metrics;
mod train;

pub use checkpoint::{read_model, write_model};
pub use metrics::{
    confusion, evaluate, mean_accuracy, miou, top_k_classes, ConfusionMatrix, Metrics,
};
pub use train::{cross_entropy, refine, Batch, LabeledView, RefineStats, TrainConfig, TrainSet};

use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::render::View;
use crate::rng::rng_from;
use crate::world::{ClassId, NO_CLASS};

/// Label value for pixels without a known class.
pub const UNKNOWN: ClassId = NO_CLASS;

/// Depth is divided by this and clamped to 1 before entering the model.
pub const DEPTH_SCALE: f64 = 8.0;

const INIT_STD: f64 = 0.01;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelShape {
    pub width: usize,
    pub appearance_dim: usize,
    /// Half-width of the context window.
    pub context: usize,
    pub classes: usize,
}

impl ModelShape {
    pub fn new(width: usize, appearance_dim: usize, classes: usize) -> Self {
        Self {
            width,
            appearance_dim,
            context: 2,
            classes,
        }
    }

    /// Per-pixel input length: window features, depth, bias.
    pub fn input_dim(&self) -> usize {
        (2 * self.context + 1) * self.appearance_dim + 2
    }

    pub fn param_count(&self) -> usize {
        self.classes * self.input_dim()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SegModel {
    pub shape: ModelShape,
    pub init_seed: u64,
    /// Row-major `classes x input_dim`.
    pub weights: Vec<f64>,
    /// SGD momentum buffer. Persists across refinements of one episode and
    /// is not part of checkpoints.
    #[serde(skip)]
    pub(crate) velocity: Vec<f64>,
}

impl SegModel {
    pub fn from_weights(shape: ModelShape, init_seed: u64, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != shape.param_count() {
            return Err(Error::Config(format!(
                "expected {} weights, got {}",
                shape.param_count(),
                weights.len()
            )));
        }
        let velocity = vec![0.0; weights.len()];
        Ok(Self {
            shape,
            init_seed,
            weights,
            velocity,
        })
    }

    pub fn reset_momentum(&mut self) {
        self.velocity.iter_mut().for_each(|v| *v = 0.0);
    }
}

/// Fresh model with N(0, 0.01^2) weights, deterministic in `seed`.
pub fn init_model(shape: ModelShape, seed: u64) -> SegModel {
    let mut rng = rng_from(&[seed, 0x5E6]);
    let normal = Normal::new(0.0, INIT_STD).expect("valid std");
    let weights = (0..shape.param_count())
        .map(|_| normal.sample(&mut rng))
        .collect();
    SegModel::from_weights(shape, seed, weights).expect("shape-consistent weights")
}

/// Writes the `width x input_dim` design matrix of a strip into `out`.
/// Window positions past either end clamp to the edge pixel.
pub(crate) fn build_inputs(
    shape: &ModelShape,
    features: &[f64],
    depth: &[f64],
    out: &mut Vec<f64>,
) {
    let w = depth.len();
    let d = shape.appearance_dim;
    let c = shape.context as isize;
    out.clear();
    out.reserve(w * shape.input_dim());
    for p in 0..w as isize {
        for o in -c..=c {
            let q = (p + o).clamp(0, w as isize - 1) as usize;
            out.extend_from_slice(&features[q * d..(q + 1) * d]);
        }
        out.push((depth[p as usize] / DEPTH_SCALE).min(1.0));
        out.push(1.0);
    }
}

/// Softmax rows of `inputs * weights^T`, written into `probs`.
pub(crate) fn forward(
    weights: &[f64],
    classes: usize,
    input_dim: usize,
    inputs: &[f64],
    probs: &mut Vec<f64>,
) {
    let n = inputs.len() / input_dim;
    probs.clear();
    probs.resize(n * classes, 0.0);
    for p in 0..n {
        let x = &inputs[p * input_dim..(p + 1) * input_dim];
        let row = &mut probs[p * classes..(p + 1) * classes];
        for (k, r) in row.iter_mut().enumerate() {
            let wk = &weights[k * input_dim..(k + 1) * input_dim];
            *r = wk.iter().zip(x).map(|(a, b)| a * b).sum();
        }
        softmax_in_place(row);
    }
}

pub(crate) fn softmax_in_place(row: &mut [f64]) {
    let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in row.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in row.iter_mut() {
        *v /= sum;
    }
}

/// Per-pixel class distribution for one view.
#[derive(Clone, Debug, PartialEq)]
pub struct Prediction {
    pub width: usize,
    pub classes: usize,
    /// Row-major `width x classes`; rows sum to one.
    pub probs: Vec<f64>,
}

impl Prediction {
    pub fn row(&self, i: usize) -> &[f64] {
        &self.probs[i * self.classes..(i + 1) * self.classes]
    }

    /// Predicted mask; ties go to the lowest class id.
    pub fn argmax(&self) -> Vec<ClassId> {
        (0..self.width)
            .map(|i| {
                let row = self.row(i);
                let mut best = 0;
                for k in 1..row.len() {
                    if row[k] > row[best] {
                        best = k;
                    }
                }
                best as ClassId
            })
            .collect()
    }
}

pub fn predict(model: &SegModel, view: &View) -> Result<Prediction> {
    let shape = &model.shape;
    if view.width != shape.width {
        return Err(Error::WidthMismatch {
            expected: shape.width,
            got: view.width,
        });
    }
    if view.appearance_dim != shape.appearance_dim {
        return Err(Error::Config(format!(
            "view appearance_dim {} != model {}",
            view.appearance_dim, shape.appearance_dim
        )));
    }
    let mut inputs = Vec::new();
    build_inputs(shape, &view.features, &view.depth, &mut inputs);
    let mut probs = Vec::new();
    forward(
        &model.weights,
        shape.classes,
        shape.input_dim(),
        &inputs,
        &mut probs,
    );
    Ok(Prediction {
        width: view.width,
        classes: shape.classes,
        probs,
    })
}
