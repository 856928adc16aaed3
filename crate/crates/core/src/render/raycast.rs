use crate::world::{CellPos, GridWorld};

/// Amanatides-Woo traversal of the cells a ray passes through.
///
/// Yields `(cell, t_enter, t_exit)` with `t` in meters along the ray,
/// starting with the cell containing the origin.
#[derive(Clone, Debug)]
pub struct GridRay {
    cell: CellPos,
    step: (i32, i32),
    t_max: (f64, f64),
    t_delta: (f64, f64),
    t_enter: f64,
}

impl GridRay {
    pub fn new(origin: (f64, f64), angle: f64, cell_size: f64) -> Self {
        let (dx, dy) = (angle.cos(), angle.sin());
        let cell = CellPos::new(
            (origin.0 / cell_size).floor() as i32,
            (origin.1 / cell_size).floor() as i32,
        );
        let axis = |o: f64, d: f64, c: i32| -> (i32, f64, f64) {
            if d > 1e-12 {
                (1, ((c + 1) as f64 * cell_size - o) / d, cell_size / d)
            } else if d < -1e-12 {
                (-1, (c as f64 * cell_size - o) / d, -cell_size / d)
            } else {
                (0, f64::INFINITY, f64::INFINITY)
            }
        };
        let (sx, tmx, tdx) = axis(origin.0, dx, cell.x);
        let (sy, tmy, tdy) = axis(origin.1, dy, cell.y);
        Self {
            cell,
            step: (sx, sy),
            t_max: (tmx, tmy),
            t_delta: (tdx, tdy),
            t_enter: 0.0,
        }
    }
}

impl Iterator for GridRay {
    type Item = (CellPos, f64, f64);

    fn next(&mut self) -> Option<Self::Item> {
        let cell = self.cell;
        let enter = self.t_enter;
        let exit;
        if self.t_max.0 < self.t_max.1 {
            exit = self.t_max.0;
            self.cell.x += self.step.0;
            self.t_max.0 += self.t_delta.0;
        } else {
            exit = self.t_max.1;
            self.cell.y += self.step.1;
            self.t_max.1 += self.t_delta.1;
        }
        self.t_enter = exit;
        Some((cell, enter, exit))
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RayHit {
    pub cell: CellPos,
    pub distance: f64,
    pub point: (f64, f64),
}

/// First wall cell along the ray within `max_range` meters.
pub fn cast_ray(
    world: &GridWorld,
    origin: (f64, f64),
    angle: f64,
    max_range: f64,
) -> Option<RayHit> {
    for (cell, t_enter, _) in GridRay::new(origin, angle, world.cell_size) {
        if t_enter > max_range {
            return None;
        }
        if !world.is_free(cell) {
            let point = (
                origin.0 + t_enter * angle.cos(),
                origin.1 + t_enter * angle.sin(),
            );
            return Some(RayHit {
                cell,
                distance: t_enter,
                point,
            });
        }
        if !world.in_bounds(cell) {
            return None;
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn axis_ray_visits_consecutive_cells() {
        let cells: Vec<_> = GridRay::new((1.0, 1.125), 0.0, 0.25).take(5).collect();
        let xs: Vec<i32> = cells.iter().map(|c| c.0.x).collect();
        assert_eq!(xs, vec![4, 5, 6, 7, 8]);
        assert!(cells.iter().all(|c| c.0.y == 4));
        assert_eq!(cells[1].1, 0.25);
        assert_eq!(cells[4].1, 1.0);
    }

    #[test]
    fn diagonal_ray_steps_monotonically() {
        let mut last = 0.0;
        for (c, enter, exit) in GridRay::new((0.1, 0.2), 0.7, 0.25).take(30) {
            assert!(enter >= last && exit >= enter, "{c:?}");
            last = enter;
        }
    }
}
