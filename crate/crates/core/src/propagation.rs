//! Propagated annotation masks and the two perception actions.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
pub use crate::perception::UNKNOWN;
use crate::perception::{LabeledView, TrainSet};
use crate::render::{CorrespondenceMap, View};
use crate::world::ClassId;

/// Labels carried along the agent's motion since the last `Annotate`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PropagatedMask {
    labels: Vec<ClassId>,
    unknown_fraction: f64,
}

impl PropagatedMask {
    pub fn from_labels(labels: Vec<ClassId>) -> Self {
        let unknown = labels.iter().filter(|&&l| l == UNKNOWN).count();
        let unknown_fraction = if labels.is_empty() {
            1.0
        } else {
            unknown as f64 / labels.len() as f64
        };
        Self {
            labels,
            unknown_fraction,
        }
    }

    pub fn all_unknown(width: usize) -> Self {
        Self::from_labels(vec![UNKNOWN; width])
    }

    pub fn labels(&self) -> &[ClassId] {
        &self.labels
    }

    pub fn width(&self) -> usize {
        self.labels.len()
    }

    pub fn unknown_fraction(&self) -> f64 {
        self.unknown_fraction
    }

    pub fn known_count(&self) -> usize {
        self.labels.iter().filter(|&&l| l != UNKNOWN).count()
    }

    pub fn is_all_unknown(&self) -> bool {
        self.known_count() == 0
    }
}

pub fn init_from_gt(view: &View) -> PropagatedMask {
    PropagatedMask::from_labels(view.gt_class.clone())
}

/// Moves labels through a correspondence map; unmatched target pixels and
/// pixels matched to unknown sources become [`UNKNOWN`].
pub fn propagate(mask: &PropagatedMask, corr: &CorrespondenceMap) -> PropagatedMask {
    debug_assert_eq!(mask.width(), corr.source_width);
    let labels = corr
        .sources
        .iter()
        .map(|s| s.map_or(UNKNOWN, |i| mask.labels[i]))
        .collect();
    PropagatedMask::from_labels(labels)
}

/// `Annotate`: adds the view with its ground truth and resets the mask.
pub fn do_annotate(trainset: &mut TrainSet, view: &View) -> PropagatedMask {
    trainset.push(LabeledView {
        view: view.clone(),
        labels: view.gt_class.clone(),
    });
    init_from_gt(view)
}

/// `Collect`: adds the view with the propagated labels. Unknown pixels stay
/// unknown and are ignored by the loss; the mask itself is unchanged.
pub fn do_collect(trainset: &mut TrainSet, view: &View, mask: &PropagatedMask) -> Result<()> {
    if mask.is_all_unknown() {
        return Err(Error::NothingToCollect);
    }
    if mask.width() != view.width {
        return Err(Error::WidthMismatch {
            expected: view.width,
            got: mask.width(),
        });
    }
    trainset.push(LabeledView {
        view: view.clone(),
        labels: mask.labels.clone(),
    });
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::render::{correspondence, render_view, RenderConfig};
    use crate::world::fixtures::walled_room;
    use crate::world::{generate_world, step_pose, GenParams, Heading, MovementAction, Pose};
    use rand::Rng;

    fn striped_room() -> crate::world::GridWorld {
        walled_room(24, |x, y| Some(((x / 3 + y / 3) % 3) as u8))
    }

    #[test]
    fn init_from_gt_is_fully_known() {
        let world = striped_room();
        let v = render_view(
            &world,
            Pose::new(2.0, 3.0, Heading::new(7)),
            &RenderConfig::default(),
        );
        let m = init_from_gt(&v);
        assert_eq!(m.unknown_fraction(), 0.0);
        assert_eq!(m.labels(), &v.gt_class[..]);
    }

    #[test]
    fn identity_and_empty_maps() {
        let labels: Vec<u8> = (0..64).map(|i| (i % 3) as u8).collect();
        let m = PropagatedMask::from_labels(labels.clone());
        assert_eq!(propagate(&m, &CorrespondenceMap::identity(64)), m);
        let gone = propagate(&m, &CorrespondenceMap::empty(64, 64));
        assert_eq!(gone.unknown_fraction(), 1.0);
    }

    #[test]
    fn rotation_loses_at_least_a_sixth() {
        let world = striped_room();
        let cfg = RenderConfig::default();
        let pose = Pose::new(3.125, 3.125, Heading::new(2));
        let a = render_view(&world, pose, &cfg);
        let b = render_view(
            &world,
            step_pose(&world, pose, MovementAction::RotateLeft).pose,
            &cfg,
        );
        let m = propagate(&init_from_gt(&a), &correspondence(&a, &b));
        let lost = m.unknown_fraction();
        assert!(lost >= 15.0 / 90.0 - 1.0 / 64.0 && lost <= 0.3, "{lost}");
        for (j, l) in m.labels().iter().enumerate() {
            assert!(*l == UNKNOWN || *l == b.gt_class[j]);
        }
    }

    #[test]
    fn annotate_and_collect_bookkeeping() {
        let world = striped_room();
        let cfg = RenderConfig::default();
        let v = render_view(&world, Pose::new(2.0, 2.0, Heading::new(0)), &cfg);
        let mut set = TrainSet::new();
        let mask = do_annotate(&mut set, &v);
        assert_eq!(set.len(), 1);
        assert_eq!(mask.unknown_fraction(), 0.0);
        assert_eq!(set.latest().unwrap().labels, v.gt_class);

        do_collect(&mut set, &v, &mask).unwrap();
        assert_eq!(set.len(), 2);
        assert_eq!(set.latest().unwrap().labels, v.gt_class);

        let mut partial = v.gt_class.clone();
        for l in partial.iter_mut().take(26) {
            *l = UNKNOWN;
        }
        let pm = PropagatedMask::from_labels(partial.clone());
        let before = pm.unknown_fraction();
        do_collect(&mut set, &v, &pm).unwrap();
        assert_eq!(set.latest().unwrap().labels, partial);
        assert_eq!(pm.unknown_fraction(), before);

        assert!(matches!(
            do_collect(&mut set, &v, &PropagatedMask::all_unknown(64)),
            Err(Error::NothingToCollect)
        ));
        assert_eq!(set.len(), 3);
    }

    #[test]
    fn annotate_after_motion_resets_to_ground_truth() {
        let world = striped_room();
        let cfg = RenderConfig::default();
        let p0 = Pose::new(2.0, 2.0, Heading::new(0));
        let v0 = render_view(&world, p0, &cfg);
        let p1 = step_pose(&world, p0, MovementAction::RotateLeft).pose;
        let v1 = render_view(&world, p1, &cfg);
        let moved = propagate(&init_from_gt(&v0), &correspondence(&v0, &v1));
        assert!(moved.unknown_fraction() > 0.0);
        let mut set = TrainSet::new();
        assert_eq!(do_annotate(&mut set, &v1), init_from_gt(&v1));
    }

    #[test]
    fn random_walks_keep_labels_sound_and_never_gain_pixels() {
        let world = generate_world(12, &GenParams::default()).unwrap();
        let cfg = RenderConfig::default();
        let free = world.free_cells();
        let mut rng = crate::rng::rng_from(&[12]);
        let (mut tracked, mut exact) = (0usize, 0usize);
        for _ in 0..100 {
            let (x, y) = world.cell_center(free[rng.random_range(0..free.len())]);
            let mut pose = Pose::new(x, y, Heading::new(rng.random_range(0..24)));
            let mut view = render_view(&world, pose, &cfg);
            let mut mask = init_from_gt(&view);
            for _ in 0..10 {
                let a = MovementAction::ALL[rng.random_range(0..5)];
                pose = step_pose(&world, pose, a).pose;
                let next = render_view(&world, pose, &cfg);
                let moved = propagate(&mask, &correspondence(&view, &next));
                assert!(
                    moved.known_count() <= mask.known_count(),
                    "known pixels grew"
                );
                for (j, l) in moved.labels().iter().enumerate() {
                    if *l != UNKNOWN {
                        tracked += 1;
                        exact += (*l == next.gt_class[j]) as usize;
                    }
                }
                view = next;
                mask = moved;
            }
        }
        assert!(tracked > 10_000);
        assert!(exact as f64 >= 0.99 * tracked as f64, "{exact}/{tracked}");
    }
}
