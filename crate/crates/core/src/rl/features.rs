use serde::{Deserialize, Serialize};

use crate::agents::{Action, Observation};
use crate::perception::UNKNOWN;

/// Depth histogram range and resolution.
pub const DEPTH_BINS: usize = 8;
pub const DEPTH_MAX: f64 = 4.0;
/// Decay of the memory block.
pub const MEMORY_DECAY: f64 = 0.9;
/// Scale of the steps-since-annotation feature.
pub const ANNOTATE_HORIZON: f64 = 64.0;

/// Feature layout for `classes` segmentation classes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureSpec {
    pub classes: usize,
    /// Zeroes every feature derived from the propagated mask.
    pub no_prop_features: bool,
}

impl FeatureSpec {
    pub fn new(classes: usize) -> Self {
        Self {
            classes,
            no_prop_features: false,
        }
    }

    /// Entropy, disagreement, unknown fraction, depth histogram, predicted
    /// class histogram, propagated class histogram (with an unknown bin).
    pub fn instant_dim(&self) -> usize {
        3 + DEPTH_BINS + self.classes + self.classes + 1
    }

    pub fn dim(&self) -> usize {
        2 * self.instant_dim() + 1 + Action::COUNT + 1
    }

    fn prop_hist_offset(&self) -> usize {
        3 + DEPTH_BINS + self.classes
    }
}

/// Per-episode state carried between featurizations.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureMemory {
    pub ema: Vec<f64>,
    pub steps_since_annotate: usize,
}

impl FeatureMemory {
    pub fn new(spec: &FeatureSpec) -> Self {
        Self {
            ema: vec![0.0; spec.instant_dim()],
            steps_since_annotate: 0,
        }
    }
}

fn entropy(row: &[f64]) -> f64 {
    -row.iter()
        .filter(|&&p| p > 0.0)
        .map(|p| p * p.ln())
        .sum::<f64>()
}

/// Features that depend on the current observation only.
pub fn instant_features(obs: &Observation<'_>, spec: &FeatureSpec) -> Vec<f64> {
    let k = spec.classes;
    let pred = obs.prediction;
    let w = pred.width as f64;
    let mut out = Vec::with_capacity(spec.instant_dim());

    let mean_entropy = (0..pred.width).map(|i| entropy(pred.row(i))).sum::<f64>() / w;
    out.push(mean_entropy / (k as f64).ln());

    let argmax = pred.argmax();
    let labels = obs.prop_mask.labels();
    let known = labels.iter().filter(|&&l| l != UNKNOWN).count();
    let disagree = labels
        .iter()
        .zip(&argmax)
        .filter(|(l, p)| **l != UNKNOWN && l != p)
        .count();
    out.push(if known == 0 {
        0.0
    } else {
        disagree as f64 / known as f64
    });
    out.push(obs.prop_mask.unknown_fraction());

    let mut depth = [0.0; DEPTH_BINS];
    for &d in &obs.view.depth {
        let b = ((d / DEPTH_MAX * DEPTH_BINS as f64) as usize).min(DEPTH_BINS - 1);
        depth[b] += 1.0 / obs.view.width as f64;
    }
    out.extend_from_slice(&depth);

    let mut pred_hist = vec![0.0; k];
    for &c in &argmax {
        pred_hist[c as usize] += 1.0 / w;
    }
    out.extend_from_slice(&pred_hist);

    let mut prop_hist = vec![0.0; k + 1];
    for &l in labels {
        let b = if l == UNKNOWN { k } else { l as usize };
        prop_hist[b] += 1.0 / labels.len() as f64;
    }
    out.extend_from_slice(&prop_hist);

    if spec.no_prop_features {
        out[1] = 0.0;
        out[2] = 0.0;
        let o = spec.prop_hist_offset();
        out[o..o + k + 1].fill(0.0);
    }
    out
}

/// Full feature vector; updates `memory` in place.
pub fn featurize(
    obs: &Observation<'_>,
    spec: &FeatureSpec,
    memory: &mut FeatureMemory,
) -> Vec<f64> {
    let inst = instant_features(obs, spec);
    if obs.last_action == Some(Action::Annotate) {
        memory.steps_since_annotate = 0;
    }
    let mut out = Vec::with_capacity(spec.dim());
    out.extend_from_slice(&inst);
    out.push((memory.steps_since_annotate as f64 / ANNOTATE_HORIZON).min(1.0));
    let mut onehot = [0.0; Action::COUNT];
    if let Some(a) = obs.last_action {
        onehot[a.index()] = 1.0;
    }
    out.extend_from_slice(&onehot);
    out.push(if obs.collision { 1.0 } else { 0.0 });
    for (m, x) in memory.ema.iter_mut().zip(&inst) {
        *m = MEMORY_DECAY * *m + (1.0 - MEMORY_DECAY) * x;
    }
    out.extend_from_slice(&memory.ema);
    memory.steps_since_annotate += 1;
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agents::tests::ObsParts;
    use crate::perception::Prediction;
    use crate::propagation::PropagatedMask;
    use crate::world::{generate_world, GenParams, Heading, Pose};

    fn parts() -> (crate::world::GridWorld, ObsParts) {
        let world = generate_world(1, &GenParams::default()).unwrap();
        let (x, y) = world.cell_center(world.free_cells()[50]);
        let p = ObsParts::new(&world, Pose::new(x, y, Heading::new(5)));
        (world, p)
    }

    #[test]
    fn dimensions_and_histograms() {
        let (world, p) = parts();
        let spec = FeatureSpec::new(world.class_count);
        assert_eq!(spec.instant_dim(), 38);
        assert_eq!(spec.dim(), 85);
        let mut mem = FeatureMemory::new(&spec);
        let f = featurize(&p.obs(true, 0), &spec, &mut mem);
        assert_eq!(f.len(), 85);
        assert!(f.iter().all(|v| v.is_finite()));
        let k = spec.classes;
        for range in [
            3..3 + DEPTH_BINS,
            3 + DEPTH_BINS..3 + DEPTH_BINS + k,
            3 + DEPTH_BINS + k..spec.instant_dim(),
        ] {
            assert!((f[range].iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
        assert_eq!(f[spec.instant_dim() + 1 + Action::COUNT], 1.0);
    }

    #[test]
    fn uniform_prediction_has_unit_entropy() {
        let (_, mut p) = parts();
        p.prediction = Prediction {
            width: 64,
            classes: 13,
            probs: vec![1.0 / 13.0; 64 * 13],
        };
        let f = instant_features(&p.obs(false, 0), &FeatureSpec::new(13));
        assert!((f[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn all_unknown_mask_has_zero_disagreement() {
        let (_, mut p) = parts();
        p.mask = PropagatedMask::all_unknown(64);
        let f = instant_features(&p.obs(false, 0), &FeatureSpec::new(13));
        assert_eq!(f[1], 0.0);
        assert_eq!(f[2], 1.0);
        assert_eq!(f[spec_prop_unknown_bin(13)], 1.0);
    }

    fn spec_prop_unknown_bin(k: usize) -> usize {
        3 + DEPTH_BINS + k + k
    }

    #[test]
    fn prop_features_can_be_removed() {
        let (_, p) = parts();
        let spec = FeatureSpec {
            classes: 13,
            no_prop_features: true,
        };
        let f = instant_features(&p.obs(false, 0), &spec);
        assert_eq!(f[1], 0.0);
        assert_eq!(f[2], 0.0);
        assert!(f[3 + DEPTH_BINS + 13..].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn memory_halves_its_gap_every_six_and_a_half_steps() {
        let (_, p) = parts();
        let spec = FeatureSpec::new(13);
        let inst = instant_features(&p.obs(false, 0), &spec);
        let mut mem = FeatureMemory::new(&spec);
        let gap = |m: &FeatureMemory| {
            m.ema
                .iter()
                .zip(&inst)
                .map(|(a, b)| (a - b).powi(2))
                .sum::<f64>()
                .sqrt()
        };
        let g0 = gap(&mem);
        let mut gaps = vec![g0];
        for t in 0..40 {
            featurize(&p.obs(false, t), &spec, &mut mem);
            gaps.push(gap(&mem));
        }
        for (t, g) in gaps.iter().enumerate() {
            assert!((g - g0 * 0.9f64.powi(t as i32)).abs() < 1e-12);
        }
        let half_life = 0.5f64.ln() / 0.9f64.ln();
        assert!((half_life - 6.58).abs() < 0.01);
    }

    #[test]
    fn steps_since_annotation_resets_and_saturates() {
        let (_, p) = parts();
        let spec = FeatureSpec::new(13);
        let mut mem = FeatureMemory::new(&spec);
        let at = spec.instant_dim();
        for t in 0..100 {
            let f = featurize(&p.obs(false, t), &spec, &mut mem);
            assert_eq!(f[at], (t as f64 / 64.0).min(1.0));
        }
        let mut obs = p.obs(false, 100);
        obs.last_action = Some(Action::Annotate);
        assert_eq!(featurize(&obs, &spec, &mut mem)[at], 0.0);
    }
}
