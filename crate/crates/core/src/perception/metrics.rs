use std::collections::BTreeSet;

use super::{predict, SegModel};
use crate::error::{Error, Result};
use crate::render::View;
use crate::world::ClassId;

/// Pooled confusion counts, `counts[gt * classes + pred]`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConfusionMatrix {
    pub classes: usize,
    pub counts: Vec<u64>,
}

impl ConfusionMatrix {
    pub fn new(classes: usize) -> Self {
        Self {
            classes,
            counts: vec![0; classes * classes],
        }
    }

    pub fn add(&mut self, gt: &[ClassId], pred: &[ClassId]) {
        for (&g, &p) in gt.iter().zip(pred) {
            self.counts[g as usize * self.classes + p as usize] += 1;
        }
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn correct(&self) -> u64 {
        (0..self.classes)
            .map(|k| self.counts[k * self.classes + k])
            .sum()
    }

    pub fn gt_count(&self, k: usize) -> u64 {
        self.counts[k * self.classes..(k + 1) * self.classes]
            .iter()
            .sum()
    }

    pub fn pred_count(&self, k: usize) -> u64 {
        (0..self.classes)
            .map(|g| self.counts[g * self.classes + k])
            .sum()
    }

    /// `(intersection, union)` for class `k`.
    pub fn iou_parts(&self, k: usize) -> (u64, u64) {
        let tp = self.counts[k * self.classes + k];
        (tp, self.gt_count(k) + self.pred_count(k) - tp)
    }

    pub fn accuracy(&self) -> Option<f64> {
        let total = self.total();
        (total > 0).then(|| self.correct() as f64 / total as f64)
    }

    /// Mean IoU over `subset` (or over every class present in ground truth
    /// or predictions). Classes absent from both are skipped.
    pub fn miou(&self, subset: Option<&[ClassId]>) -> Result<f64> {
        let candidates: Vec<usize> = match subset {
            Some(s) => s
                .iter()
                .map(|&k| k as usize)
                .filter(|&k| k < self.classes)
                .collect(),
            None => (0..self.classes).collect(),
        };
        let mut sum = 0.0;
        let mut n = 0usize;
        for k in candidates {
            let (inter, union) = self.iou_parts(k);
            if union > 0 {
                sum += inter as f64 / union as f64;
                n += 1;
            }
        }
        if n == 0 {
            return Err(Error::EmptyClassSet);
        }
        Ok(sum / n as f64)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Metrics {
    pub miou: f64,
    pub accuracy: f64,
}

pub fn confusion(model: &SegModel, refset: &[View]) -> Result<ConfusionMatrix> {
    if refset.is_empty() {
        return Err(Error::EmptyReferenceSet);
    }
    let mut cm = ConfusionMatrix::new(model.shape.classes);
    for v in refset {
        let pred = predict(model, v)?.argmax();
        cm.add(&v.gt_class, &pred);
    }
    Ok(cm)
}

pub fn miou(model: &SegModel, refset: &[View], class_subset: Option<&[ClassId]>) -> Result<f64> {
    confusion(model, refset)?.miou(class_subset)
}

pub fn mean_accuracy(model: &SegModel, refset: &[View]) -> Result<f64> {
    confusion(model, refset)?
        .accuracy()
        .ok_or(Error::EmptyReferenceSet)
}

/// Both metrics from a single pass over the reference views.
pub fn evaluate(
    model: &SegModel,
    refset: &[View],
    class_subset: Option<&[ClassId]>,
) -> Result<Metrics> {
    let cm = confusion(model, refset)?;
    Ok(Metrics {
        miou: cm.miou(class_subset)?,
        accuracy: cm.accuracy().ok_or(Error::EmptyReferenceSet)?,
    })
}

/// The `k` classes with the most ground-truth pixels, ties broken toward
/// the lower class id. Returned in ascending id order.
pub fn top_k_classes(refset: &[View], k: usize) -> Vec<ClassId> {
    let mut counts: std::collections::BTreeMap<ClassId, u64> = Default::default();
    for v in refset {
        for &c in &v.gt_class {
            *counts.entry(c).or_default() += 1;
        }
    }
    let mut ranked: Vec<(ClassId, u64)> = counts.into_iter().collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    let chosen: BTreeSet<ClassId> = ranked.into_iter().take(k).map(|(c, _)| c).collect();
    chosen.into_iter().collect()
}
