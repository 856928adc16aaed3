use super::View;
use crate::world::CellPos;

/// Maximum hit-point distance for a match: half a cell.
pub const MATCH_TOLERANCE: f64 = 0.125;

/// Per destination pixel, the matched source pixel or `None`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CorrespondenceMap {
    pub source_width: usize,
    pub sources: Vec<Option<usize>>,
}

impl CorrespondenceMap {
    pub fn identity(width: usize) -> Self {
        Self {
            source_width: width,
            sources: (0..width).map(Some).collect(),
        }
    }

    pub fn empty(source_width: usize, target_width: usize) -> Self {
        Self {
            source_width,
            sources: vec![None; target_width],
        }
    }

    pub fn defined_count(&self) -> usize {
        self.sources.iter().filter(|s| s.is_some()).count()
    }
}

/// Nearest point among those whose cell equals `cell`.
fn nearest_on(
    points: &[(f64, f64)],
    cells: &[CellPos],
    cell: CellPos,
    q: (f64, f64),
) -> Option<(usize, f64)> {
    let mut best: Option<(usize, f64)> = None;
    for (i, p) in points.iter().enumerate() {
        if cells[i] != cell {
            continue;
        }
        let d = (p.0 - q.0).powi(2) + (p.1 - q.1).powi(2);
        if best.is_none_or(|b| d < b.1) {
            best = Some((i, d));
        }
    }
    best.map(|(i, d)| (i, d.sqrt()))
}

/// Matches destination pixels to source pixels through their surface hit
/// points.
///
/// Only hit points on the same wall cell can match. Pixel `j` maps to the
/// source pixel with the nearest such hit point if that point is closer
/// than [`MATCH_TOLERANCE`] and the reverse nearest match
/// from that source pixel lands within one pixel of `j`. When several
/// destination pixels claim the same source pixel only the closest keeps
/// it, so defined correspondences are injective. Ties resolve to the lowest
/// index.
pub fn correspondence(src: &View, dst: &View) -> CorrespondenceMap {
    let candidates: Vec<Option<(usize, f64)>> = dst
        .hit_points
        .iter()
        .enumerate()
        .map(|(j, &q)| {
            let cell = dst.hit_cells[j];
            let (i, dist) = nearest_on(&src.hit_points, &src.hit_cells, cell, q)?;
            if dist >= MATCH_TOLERANCE {
                return None;
            }
            let (back, _) = nearest_on(&dst.hit_points, &dst.hit_cells, cell, src.hit_points[i])?;
            (back.abs_diff(j) <= 1).then_some((i, dist))
        })
        .collect();
    let mut owner: Vec<Option<(usize, f64)>> = vec![None; src.width];
    for (j, c) in candidates.iter().enumerate() {
        if let Some((i, d)) = *c {
            if owner[i].is_none_or(|(_, best)| d < best) {
                owner[i] = Some((j, d));
            }
        }
    }
    let sources = candidates
        .iter()
        .enumerate()
        .map(|(j, c)| c.and_then(|(i, _)| (owner[i].map(|o| o.0) == Some(j)).then_some(i)))
        .collect();
    CorrespondenceMap {
        source_width: src.width,
        sources,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::render::{render_view, RenderConfig};
    use crate::world::{step_pose, Heading, MovementAction, Pose};

    fn open_room() -> crate::world::GridWorld {
        crate::world::fixtures::walled_room(24, |x, y| Some(((x / 3 + y / 3) % 3) as u8))
    }

    #[test]
    fn identical_views_map_to_identity() {
        let world = open_room();
        let cfg = RenderConfig::default();
        let v = render_view(&world, Pose::new(3.1, 2.9, Heading::new(4)), &cfg);
        assert_eq!(correspondence(&v, &v), CorrespondenceMap::identity(64));
    }

    #[test]
    fn opposite_headings_share_nothing() {
        let world = open_room();
        let cfg = RenderConfig::default();
        let a = render_view(&world, Pose::new(3.125, 3.125, Heading::new(0)), &cfg);
        let b = render_view(&world, Pose::new(3.125, 3.125, Heading::new(12)), &cfg);
        assert_eq!(correspondence(&a, &b).defined_count(), 0);
    }

    /// Geometric oracle for a pure rotation by one heading step: destination
    /// pixel `j` looks along the source ray direction of fractional pixel
    /// `j - W*15/90`, so exactly the destination pixels whose direction lies
    /// inside the source FOV can be matched, and each lands on the nearest
    /// source pixel center.
    #[test]
    fn rotate_left_shifts_by_a_sixth_of_the_strip() {
        let world = open_room();
        let cfg = RenderConfig::default();
        let pose = Pose::new(3.125, 3.125, Heading::new(1));
        let src = render_view(&world, pose, &cfg);
        let dst = render_view(
            &world,
            step_pose(&world, pose, MovementAction::RotateLeft).pose,
            &cfg,
        );
        let corr = correspondence(&src, &dst);
        let shift = 64.0 * 15.0 / 90.0;
        let mut oracle = vec![None; 64];
        for (j, o) in oracle.iter_mut().enumerate() {
            let f = j as f64 - shift;
            if f > -0.5 && f < 63.5 {
                *o = Some(f.round().clamp(0.0, 63.0) as usize);
            }
        }
        let defined: Vec<usize> = (0..64).filter(|&j| corr.sources[j].is_some()).collect();
        let window = oracle.iter().filter(|o| o.is_some()).count();
        // Pixels whose nearest source straddles a cell edge drop out (44 of 53 here).
        assert!(
            defined.len() as f64 >= 0.8 * window as f64,
            "{} of {window}",
            defined.len()
        );
        let mut agree = 0;
        for &j in &defined {
            let i = corr.sources[j].unwrap();
            assert!(((j as f64 - i as f64) - shift).abs() <= 1.0);
            if oracle[j] == Some(i) {
                agree += 1;
            }
        }
        assert!(agree as f64 >= 0.9 * defined.len() as f64);
    }

    #[test]
    fn random_pose_pairs_are_injective_round_trip_and_label_exact() {
        use rand::Rng;
        let world = crate::world::generate_world(4, &crate::world::GenParams::default()).unwrap();
        let cfg = RenderConfig::default();
        let free = world.free_cells();
        let mut rng = crate::rng::rng_from(&[4, 4]);
        let (mut matched, mut same) = (0usize, 0usize);
        for _ in 0..200 {
            let (x, y) = world.cell_center(free[rng.random_range(0..free.len())]);
            let mut pose = Pose::new(x, y, Heading::new(rng.random_range(0..24)));
            let a = render_view(&world, pose, &cfg);
            for _ in 0..3 {
                pose = step_pose(&world, pose, MovementAction::ALL[rng.random_range(0..5)]).pose;
            }
            let b = render_view(&world, pose, &cfg);
            let ab = correspondence(&a, &b);
            let ba = correspondence(&b, &a);
            let mut seen = vec![false; 64];
            for (j, s) in ab.sources.iter().enumerate() {
                let Some(i) = *s else { continue };
                assert!(!seen[i], "source pixel {i} used twice");
                seen[i] = true;
                matched += 1;
                same += (b.gt_class[j] == a.gt_class[i]) as usize;
                if let Some(back) = ba.sources[i] {
                    assert!(back.abs_diff(j) <= 1);
                }
            }
        }
        assert!(same as f64 >= 0.99 * matched as f64, "{same}/{matched}");
    }
}
