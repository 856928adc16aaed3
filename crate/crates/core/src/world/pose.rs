use serde::{Deserialize, Serialize};

use super::GridWorld;

pub const HEADING_COUNT: u8 = 24;
pub const HEADING_STEP_DEG: f64 = 15.0;
/// Translation per movement action, meters.
pub const STEP_LENGTH: f64 = 0.25;
/// Sampling interval of the swept-segment collision test, meters.
const SWEEP_SAMPLE: f64 = 0.05;

/// Heading as a multiple of 15 degrees, counter-clockwise from +x.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Heading(u8);

impl Heading {
    pub fn new(steps: i32) -> Self {
        Heading(steps.rem_euclid(HEADING_COUNT as i32) as u8)
    }

    pub fn from_degrees(deg: f64) -> Self {
        Heading::new((deg / HEADING_STEP_DEG).round() as i32)
    }

    /// Nearest heading to a direction given in radians.
    pub fn nearest(radians: f64) -> Self {
        Heading::from_degrees(radians.to_degrees())
    }

    pub fn steps(self) -> u8 {
        self.0
    }

    pub fn degrees(self) -> f64 {
        self.0 as f64 * HEADING_STEP_DEG
    }

    pub fn radians(self) -> f64 {
        self.degrees().to_radians()
    }

    pub fn rotated(self, steps: i32) -> Self {
        Heading::new(self.0 as i32 + steps)
    }

    /// Signed number of 15-degree steps from `self` to `other`, in [-11, 12].
    pub fn steps_to(self, other: Heading) -> i32 {
        let d = (other.0 as i32 - self.0 as i32).rem_euclid(HEADING_COUNT as i32);
        if d > 12 {
            d - HEADING_COUNT as i32
        } else {
            d
        }
    }

    /// Unit direction vector. Exact on the axis-aligned headings.
    pub fn unit(self) -> (f64, f64) {
        match self.0 {
            0 => (1.0, 0.0),
            6 => (0.0, 1.0),
            12 => (-1.0, 0.0),
            18 => (0.0, -1.0),
            _ => {
                let r = self.radians();
                (r.cos(), r.sin())
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub x: f64,
    pub y: f64,
    pub heading: Heading,
}

impl Pose {
    pub fn new(x: f64, y: f64, heading: Heading) -> Self {
        Self { x, y, heading }
    }

    pub fn position(&self) -> (f64, f64) {
        (self.x, self.y)
    }

    pub fn distance_to(&self, other: &Pose) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MovementAction {
    MoveForward,
    MoveLeft,
    MoveRight,
    RotateLeft,
    RotateRight,
}

impl MovementAction {
    pub const ALL: [MovementAction; 5] = [
        MovementAction::MoveForward,
        MovementAction::MoveLeft,
        MovementAction::MoveRight,
        MovementAction::RotateLeft,
        MovementAction::RotateRight,
    ];

    pub fn is_translation(self) -> bool {
        matches!(
            self,
            MovementAction::MoveForward | MovementAction::MoveLeft | MovementAction::MoveRight
        )
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepOutcome {
    pub pose: Pose,
    pub collided: bool,
}

/// Applies one movement action.
///
/// Translations move [`STEP_LENGTH`] along the heading (forward) or
/// perpendicular to it (strafe, heading unchanged). The swept segment is
/// sampled every 5 cm; if any sample lands in a wall the whole translation
/// is cancelled and `collided` is set. Rotations always succeed.
pub fn step_pose(world: &GridWorld, pose: Pose, action: MovementAction) -> StepOutcome {
    let direction = match action {
        MovementAction::RotateLeft => {
            return StepOutcome {
                pose: Pose {
                    heading: pose.heading.rotated(1),
                    ..pose
                },
                collided: false,
            };
        }
        MovementAction::RotateRight => {
            return StepOutcome {
                pose: Pose {
                    heading: pose.heading.rotated(-1),
                    ..pose
                },
                collided: false,
            };
        }
        MovementAction::MoveForward => pose.heading,
        MovementAction::MoveLeft => pose.heading.rotated(6),
        MovementAction::MoveRight => pose.heading.rotated(-6),
    };
    let (dx, dy) = direction.unit();
    let (nx, ny) = (pose.x + dx * STEP_LENGTH, pose.y + dy * STEP_LENGTH);
    if segment_is_free(world, (pose.x, pose.y), (nx, ny)) {
        StepOutcome {
            pose: Pose {
                x: nx,
                y: ny,
                heading: pose.heading,
            },
            collided: false,
        }
    } else {
        StepOutcome {
            pose,
            collided: true,
        }
    }
}

/// True if every 5 cm sample along `a -> b` (endpoints included) lies in a
/// free cell.
pub fn segment_is_free(world: &GridWorld, a: (f64, f64), b: (f64, f64)) -> bool {
    segment_clear_by(a, b, |x, y| world.is_free_point(x, y))
}

pub(crate) fn segment_clear_by(
    a: (f64, f64),
    b: (f64, f64),
    free: impl Fn(f64, f64) -> bool,
) -> bool {
    let len = (b.0 - a.0).hypot(b.1 - a.1);
    let n = (len / SWEEP_SAMPLE).ceil().max(1.0) as usize;
    (0..=n).all(|k| {
        let t = k as f64 / n as f64;
        free(a.0 + (b.0 - a.0) * t, a.1 + (b.1 - a.1) * t)
    })
}
