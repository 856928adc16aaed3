use super::basic::rotate_toward;
use crate::world::pose::segment_clear_by;
use crate::world::{CellPos, Heading, MovementAction, Pose, HEADING_COUNT, STEP_LENGTH};

/// Turns a cell path into rotate/translate primitives.
///
/// Each step aims at the farthest path cell (up to `lookahead`) that is in
/// straight-line sight, then either translates (forward or strafe) if that
/// makes nearly as much progress as the best reachable heading, or rotates
/// toward that heading.
#[derive(Clone, Copy, Debug)]
pub struct Navigator {
    pub cell_size: f64,
    pub lookahead: usize,
    /// Whether sideways steps may be used; without them the agent always
    /// faces where it goes.
    pub strafe: bool,
}

impl Navigator {
    pub fn new(cell_size: f64) -> Self {
        Self {
            cell_size,
            lookahead: 8,
            strafe: true,
        }
    }

    fn center(&self, c: CellPos) -> (f64, f64) {
        (
            (c.x as f64 + 0.5) * self.cell_size,
            (c.y as f64 + 0.5) * self.cell_size,
        )
    }

    /// Point to steer at for `path`, which starts at the agent's cell.
    pub fn waypoint(
        &self,
        pose: Pose,
        path: &[CellPos],
        free: impl Fn(f64, f64) -> bool,
    ) -> (f64, f64) {
        let p = pose.position();
        let last = (path.len() - 1).min(self.lookahead);
        (1..=last)
            .rev()
            .map(|k| self.center(path[k]))
            .find(|&w| segment_clear_by(p, w, &free))
            .unwrap_or_else(|| self.center(path[last.min(1)]))
    }

    /// One primitive toward the end of `path`; `None` once the agent is in
    /// the last cell.
    pub fn step(
        &self,
        pose: Pose,
        path: &[CellPos],
        free: impl Fn(f64, f64) -> bool,
    ) -> Option<MovementAction> {
        if path.len() <= 1 {
            return None;
        }
        let target = self.waypoint(pose, path, &free);
        Some(self.step_to_point(pose, target, free))
    }

    pub fn step_to_point(
        &self,
        pose: Pose,
        target: (f64, f64),
        free: impl Fn(f64, f64) -> bool,
    ) -> MovementAction {
        let p = pose.position();
        let dist = (target.0 - p.0).hypot(target.1 - p.1);
        let progress = |h: Heading| {
            let (dx, dy) = h.unit();
            let q = (p.0 + dx * STEP_LENGTH, p.1 + dy * STEP_LENGTH);
            if segment_clear_by(p, q, &free) {
                dist - (target.0 - q.0).hypot(target.1 - q.1)
            } else {
                f64::NEG_INFINITY
            }
        };
        let mut best = (pose.heading, f64::NEG_INFINITY);
        for s in 0..HEADING_COUNT as i32 {
            let h = pose.heading.rotated(s);
            let g = progress(h);
            let closer = pose.heading.steps_to(h).abs() < pose.heading.steps_to(best.0).abs();
            if g > best.1 + 1e-12 || (g > best.1 - 1e-12 && closer) {
                best = (h, g);
            }
        }
        if best.1 <= 0.0 {
            return MovementAction::RotateLeft;
        }
        let moves = [
            (MovementAction::MoveForward, 0),
            (MovementAction::MoveLeft, 6),
            (MovementAction::MoveRight, -6),
        ];
        let usable = if self.strafe { 3 } else { 1 };
        let (m, g) = moves[..usable]
            .iter()
            .map(|&(m, s)| (m, progress(pose.heading.rotated(s))))
            .fold((MovementAction::MoveForward, f64::NEG_INFINITY), |a, b| {
                if b.1 > a.1 {
                    b
                } else {
                    a
                }
            });
        if g >= 0.75 * best.1 {
            m
        } else {
            rotate_toward(pose.heading, best.0)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::fixtures::walled_room;
    use crate::world::{step_pose, DistanceField};

    #[test]
    fn straight_four_meter_leg_is_sixteen_forwards() {
        let world = walled_room(30, |_, _| None);
        let nav = Navigator::new(0.25);
        let mut pose = Pose::new(1.125, 2.125, Heading::new(0));
        let goal = world.cell_of(5.125, 2.125);
        let mut actions = Vec::new();
        loop {
            let field = DistanceField::from_cell(&world, world.cell_of(pose.x, pose.y));
            let path = field.path_to(goal).unwrap();
            let Some(a) = nav.step(pose, &path, |x, y| world.is_free_point(x, y)) else {
                break;
            };
            actions.push(a);
            pose = step_pose(&world, pose, a).pose;
            assert!(actions.len() < 100);
        }
        assert_eq!(actions, vec![MovementAction::MoveForward; 16]);
    }

    #[test]
    fn target_behind_needs_at_most_twelve_rotations() {
        let world = walled_room(30, |_, _| None);
        let nav = Navigator::new(0.25);
        for h in 0..24 {
            let mut pose = Pose::new(4.0, 4.0, Heading::new(h));
            let target = (2.0, 4.1);
            let mut rotations = 0;
            loop {
                let a = nav.step_to_point(pose, target, |x, y| world.is_free_point(x, y));
                if a.is_translation() {
                    break;
                }
                rotations += 1;
                pose = step_pose(&world, pose, a).pose;
                assert!(rotations <= 12, "heading {h}");
            }
        }
    }

    #[test]
    fn reaches_goal_around_a_wall() {
        let mut cells = Vec::new();
        for y in 1..=20 {
            cells.push((12, y));
        }
        let world = crate::world::fixtures::with_block(walled_room(24, |_, _| None), &cells, 1);
        let nav = Navigator::new(0.25);
        let mut pose = Pose::new(1.6, 1.4, Heading::new(7));
        let goal = CellPos::new(20, 3);
        for _ in 0..400 {
            let here = world.cell_of(pose.x, pose.y);
            let path = DistanceField::from_cell(&world, here)
                .path_to(goal)
                .unwrap();
            match nav.step(pose, &path, |x, y| world.is_free_point(x, y)) {
                None => return,
                Some(a) => pose = step_pose(&world, pose, a).pose,
            }
        }
        panic!("did not arrive: {pose:?}");
    }
}
