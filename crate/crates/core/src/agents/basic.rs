use rand::Rng as _;

use super::{Explorer, Observation};
use crate::rng::Rng;
use crate::world::{Heading, MovementAction, HEADING_COUNT};

/// Uniform over the five movement actions.
#[derive(Clone, Copy, Debug, Default)]
pub struct RandomExplorer;

impl Explorer for RandomExplorer {
    fn next_move(&mut self, _obs: &Observation<'_>, rng: &mut Rng) -> MovementAction {
        MovementAction::ALL[rng.random_range(0..MovementAction::ALL.len())]
    }
}

#[derive(Clone, Copy, Debug, Default)]
pub struct RotateExplorer;

impl Explorer for RotateExplorer {
    fn next_move(&mut self, _obs: &Observation<'_>, _rng: &mut Rng) -> MovementAction {
        MovementAction::RotateLeft
    }
}

/// Walks forward until blocked, then turns to a uniformly drawn heading.
/// A draw that is blocked again simply triggers another draw.
#[derive(Clone, Copy, Debug, Default)]
pub struct BounceExplorer {
    target: Option<Heading>,
}

/// Rotation that turns `from` toward `to` along the shorter way.
pub(crate) fn rotate_toward(from: Heading, to: Heading) -> MovementAction {
    if from.steps_to(to) > 0 {
        MovementAction::RotateLeft
    } else {
        MovementAction::RotateRight
    }
}

impl Explorer for BounceExplorer {
    fn next_move(&mut self, obs: &Observation<'_>, rng: &mut Rng) -> MovementAction {
        let heading = obs.pose().heading;
        if obs.collision {
            self.target = Some(Heading::new(rng.random_range(0..HEADING_COUNT as i32)));
        }
        match self.target {
            Some(t) if t != heading => rotate_toward(heading, t),
            _ => {
                self.target = None;
                MovementAction::MoveForward
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agents::tests::ObsParts;
    use crate::rng::rng_from;
    use crate::world::fixtures::walled_room;
    use crate::world::{step_pose, Pose};

    #[test]
    fn random_is_uniform_and_seeded() {
        let world = walled_room(8, |_, _| None);
        let parts = ObsParts::new(&world, Pose::new(1.0, 1.0, Heading::new(0)));
        let obs = parts.obs(false, 0);
        let mut rng = rng_from(&[3]);
        let mut counts = [0usize; 5];
        let n = 100_000;
        for _ in 0..n {
            let a = RandomExplorer.next_move(&obs, &mut rng);
            counts[MovementAction::ALL.iter().position(|&m| m == a).unwrap()] += 1;
        }
        for c in counts {
            assert!((c as f64 / n as f64 - 0.2).abs() < 0.01, "{counts:?}");
        }
        let draw = |s| {
            let mut r = rng_from(&[s]);
            (0..50)
                .map(|_| RandomExplorer.next_move(&obs, &mut r))
                .collect::<Vec<_>>()
        };
        assert_eq!(draw(8), draw(8));
    }

    #[test]
    fn rotate_stays_put_and_closes_the_circle() {
        let world = walled_room(8, |_, _| None);
        let start = Pose::new(1.1, 1.3, Heading::new(5));
        let mut pose = start;
        let mut rng = rng_from(&[0]);
        for step in 0..24 {
            let parts = ObsParts::new(&world, pose);
            let a = RotateExplorer.next_move(&parts.obs(false, step), &mut rng);
            assert_eq!(a, MovementAction::RotateLeft);
            pose = step_pose(&world, pose, a).pose;
            assert_eq!(pose.position(), start.position());
        }
        assert_eq!(pose, start);
    }

    #[test]
    fn bounce_walks_straight_then_turns_after_collision() {
        let world = walled_room(12, |_, _| None);
        let mut pose = Pose::new(1.125, 1.625, Heading::new(0));
        let mut rng = rng_from(&[9]);
        let mut bounce = BounceExplorer::default();
        let mut collided = false;
        let mut actions = Vec::new();
        for step in 0..60 {
            let parts = ObsParts::new(&world, pose);
            let a = bounce.next_move(&parts.obs(collided, step), &mut rng);
            actions.push((a, collided));
            let out = step_pose(&world, pose, a);
            pose = out.pose;
            collided = out.collided;
        }
        // open room: forward until the far wall (x from 1.125 to 3.125)
        assert!(actions[..8]
            .iter()
            .all(|(a, _)| *a == MovementAction::MoveForward));
        let first_collision = actions.iter().position(|(_, c)| *c).unwrap();
        assert_eq!(first_collision, 9);
        // after the collision: some rotations in one direction, then forward
        let tail: Vec<_> = actions[first_collision..]
            .iter()
            .map(|(a, _)| *a)
            .take_while(|a| *a != MovementAction::MoveForward)
            .collect();
        assert!(tail.len() <= 12);
        assert!(tail.windows(2).all(|w| w[0] == w[1]));
    }
}
