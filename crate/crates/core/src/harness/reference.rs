use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::render::{render_view, RenderConfig, View};
use crate::rng::rng_from;
use crate::world::{DistanceField, GridWorld, Heading, Pose, HEADING_COUNT};

/// Evaluation views around the start of an episode.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReferenceSet {
    pub views: Vec<View>,
}

impl ReferenceSet {
    pub fn poses(&self) -> Vec<Pose> {
        self.views.iter().map(|v| v.pose).collect()
    }
}

/// Uniform free cell center with a uniform heading.
pub fn sample_start(world: &GridWorld, start_seed: u64) -> Pose {
    let mut rng = rng_from(&[world.seed, start_seed, 0x57A7]);
    let free = world.free_cells();
    let (x, y) = world.cell_center(free[rng.random_range(0..free.len())]);
    Pose::new(
        x,
        y,
        Heading::new(rng.random_range(0..HEADING_COUNT as i32)),
    )
}

/// `n` views at poses drawn uniformly from the free space within geodesic
/// distance `radius` of `start`, with uniform headings. Positions are
/// continuous inside their cell.
pub fn sample_reference_set(
    world: &GridWorld,
    start: Pose,
    radius: f64,
    n: usize,
    seed: u64,
    render: &RenderConfig,
) -> Result<ReferenceSet> {
    let field = DistanceField::from_cell(world, world.cell_of(start.x, start.y));
    let limit = (radius / world.cell_size).floor() as u32;
    let candidates: Vec<_> = world
        .free_cells()
        .into_iter()
        .filter(|&c| field.steps(c) <= limit)
        .collect();
    if candidates.len() < 2 {
        return Err(Error::InsufficientFreeSpace(format!(
            "{} free cells within {radius} m of the start",
            candidates.len()
        )));
    }
    let mut rng = rng_from(&[world.seed, seed, 0x12EF]);
    let cs = world.cell_size;
    let views = (0..n)
        .map(|_| {
            let c = candidates[rng.random_range(0..candidates.len())];
            let x = (c.x as f64 + rng.random_range(0.05..0.95)) * cs;
            let y = (c.y as f64 + rng.random_range(0.05..0.95)) * cs;
            let pose = Pose::new(
                x,
                y,
                Heading::new(rng.random_range(0..HEADING_COUNT as i32)),
            );
            render_view(world, pose, render)
        })
        .collect();
    Ok(ReferenceSet { views })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::{generate_world, geodesic_distance, GenParams};

    #[test]
    fn reference_views_lie_within_the_radius_and_are_shared() {
        let world = generate_world(8, &GenParams::default()).unwrap();
        let start = sample_start(&world, 3);
        let cfg = RenderConfig::default();
        let a = sample_reference_set(&world, start, 5.0, 32, 3, &cfg).unwrap();
        assert_eq!(a.views.len(), 32);
        for p in a.poses() {
            assert!(world.is_free_point(p.x, p.y));
            assert!(geodesic_distance(&world, start.position(), p.position()) <= 5.0);
        }
        assert_eq!(
            a,
            sample_reference_set(&world, start, 5.0, 32, 3, &cfg).unwrap()
        );
        assert_ne!(
            a.poses(),
            sample_reference_set(&world, start, 5.0, 32, 4, &cfg)
                .unwrap()
                .poses()
        );
    }

    #[test]
    fn tiny_rooms_are_rejected() {
        let world = crate::world::fixtures::walled_room(1, |_, _| None);
        let start = Pose::new(0.375, 0.375, Heading::new(0));
        assert!(matches!(
            sample_reference_set(&world, start, 5.0, 4, 0, &RenderConfig::default()),
            Err(Error::InsufficientFreeSpace(_))
        ));
    }

    #[test]
    fn starts_are_free_and_seeded() {
        let world = generate_world(8, &GenParams::default()).unwrap();
        let s = sample_start(&world, 1);
        assert!(world.is_free_point(s.x, s.y));
        assert_eq!(s, sample_start(&world, 1));
        assert_ne!(s, sample_start(&world, 2));
    }
}
