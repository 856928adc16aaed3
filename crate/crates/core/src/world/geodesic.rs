use std::collections::VecDeque;

use super::{CellPos, GridWorld};

pub const UNREACHABLE: u32 = u32::MAX;

/// Breadth-first step counts from one source cell over 4-connected
/// passable cells.
#[derive(Clone, Debug)]
pub struct DistanceField {
    pub width: usize,
    pub height: usize,
    pub source: CellPos,
    steps: Vec<u32>,
    parent: Vec<u32>,
}

impl DistanceField {
    pub fn from_cell(world: &GridWorld, source: CellPos) -> Self {
        Self::over(world.width, world.height, source, |c| world.is_free(c))
    }

    /// BFS on an arbitrary passability predicate. The source itself is
    /// always expanded.
    pub fn over(
        width: usize,
        height: usize,
        source: CellPos,
        passable: impl Fn(CellPos) -> bool,
    ) -> Self {
        let n = width * height;
        let mut steps = vec![UNREACHABLE; n];
        let mut parent = vec![u32::MAX; n];
        let idx = |c: CellPos| c.y as usize * width + c.x as usize;
        let inside =
            |c: CellPos| c.x >= 0 && c.y >= 0 && (c.x as usize) < width && (c.y as usize) < height;
        let mut queue = VecDeque::new();
        if inside(source) {
            steps[idx(source)] = 0;
            queue.push_back(source);
        }
        while let Some(c) = queue.pop_front() {
            let d = steps[idx(c)];
            for nb in c.neighbors4() {
                if inside(nb) && steps[idx(nb)] == UNREACHABLE && passable(nb) {
                    steps[idx(nb)] = d + 1;
                    parent[idx(nb)] = idx(c) as u32;
                    queue.push_back(nb);
                }
            }
        }
        Self {
            width,
            height,
            source,
            steps,
            parent,
        }
    }

    fn inside(&self, c: CellPos) -> bool {
        c.x >= 0 && c.y >= 0 && (c.x as usize) < self.width && (c.y as usize) < self.height
    }

    pub fn steps(&self, c: CellPos) -> u32 {
        if self.inside(c) {
            self.steps[c.y as usize * self.width + c.x as usize]
        } else {
            UNREACHABLE
        }
    }

    pub fn steps_by_index(&self, i: usize) -> u32 {
        self.steps[i]
    }

    pub fn meters(&self, c: CellPos, cell_size: f64) -> f64 {
        match self.steps(c) {
            UNREACHABLE => f64::INFINITY,
            s => s as f64 * cell_size,
        }
    }

    pub fn reachable_count(&self) -> usize {
        self.steps.iter().filter(|&&s| s != UNREACHABLE).count()
    }

    /// Shortest path from the source to `target`, both included.
    pub fn path_to(&self, target: CellPos) -> Option<Vec<CellPos>> {
        if self.steps(target) == UNREACHABLE {
            return None;
        }
        let mut path = vec![target];
        let mut i = target.y as usize * self.width + target.x as usize;
        while self.parent[i] != u32::MAX {
            i = self.parent[i] as usize;
            path.push(CellPos::new(
                (i % self.width) as i32,
                (i / self.width) as i32,
            ));
        }
        path.reverse();
        Some(path)
    }
}

/// Shortest 4-connected free-cell path length between the cells containing
/// `a` and `b`, in meters. Infinite when unreachable, which a valid world
/// never produces.
pub fn geodesic_distance(world: &GridWorld, a: (f64, f64), b: (f64, f64)) -> f64 {
    let ca = world.cell_of(a.0, a.1);
    let cb = world.cell_of(b.0, b.1);
    if ca == cb {
        return 0.0;
    }
    let d = DistanceField::from_cell(world, ca).meters(cb, world.cell_size);
    debug_assert!(d.is_finite(), "unreachable pair in a connected world");
    d
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::{generate_world, Cell, GenParams, NO_CLASS};
    use rand::Rng;

    fn room_with_block() -> GridWorld {
        // 12x12 free interior, 4x4 block in the middle
        let w = 14;
        let mut occupancy = vec![Cell::Wall; w * w];
        let mut surface_class = vec![0; w * w];
        for y in 1..13 {
            for x in 1..13 {
                if !(5..9).contains(&x) || !(5..9).contains(&y) {
                    occupancy[y * w + x] = Cell::Free;
                    surface_class[y * w + x] = NO_CLASS;
                }
            }
        }
        GridWorld {
            seed: 0,
            cell_size: 0.25,
            width: w,
            height: w,
            class_count: 1,
            occupancy,
            surface_class,
            texture: vec![0.0; w * w],
            class_embeddings: vec![vec![0.0]],
            texture_direction: vec![0.0],
        }
    }

    /// Independent relaxation oracle: iterate min-plus updates to a fixpoint.
    fn relaxation_oracle(world: &GridWorld, from: CellPos) -> Vec<u32> {
        let n = world.width * world.height;
        let mut d = vec![u32::MAX; n];
        d[world.index(from)] = 0;
        loop {
            let mut changed = false;
            for i in 0..n {
                let c = world.cell_pos(i);
                if !world.is_free(c) {
                    continue;
                }
                for nb in c.neighbors4() {
                    if world.is_free(nb) {
                        let dn = d[world.index(nb)];
                        if dn != u32::MAX && dn + 1 < d[i] {
                            d[i] = dn + 1;
                            changed = true;
                        }
                    }
                }
            }
            if !changed {
                return d;
            }
        }
    }

    #[test]
    fn zero_for_same_cell_and_one_step_for_neighbors() {
        let world = room_with_block();
        assert_eq!(geodesic_distance(&world, (0.3, 0.3), (0.4, 0.45)), 0.0);
        assert_eq!(geodesic_distance(&world, (0.3, 0.3), (0.55, 0.3)), 0.25);
    }

    #[test]
    fn around_block_matches_relaxation_oracle() {
        let world = room_with_block();
        let from = CellPos::new(3, 6);
        let oracle = relaxation_oracle(&world, from);
        let field = DistanceField::from_cell(&world, from);
        for i in 0..oracle.len() {
            let expected = if oracle[i] == u32::MAX {
                UNREACHABLE
            } else {
                oracle[i]
            };
            assert_eq!(field.steps_by_index(i), expected);
        }
        // straight across the block needs a detour
        let d = geodesic_distance(
            &world,
            world.cell_center(from),
            world.cell_center(CellPos::new(10, 6)),
        );
        assert_eq!(d, 0.25 * 11.0);
    }

    #[test]
    fn symmetric_and_bounded_below_by_euclidean() {
        let world = generate_world(5, &GenParams::default()).unwrap();
        let free = world.free_cells();
        let mut rng = crate::rng::rng_from(&[5]);
        for _ in 0..60 {
            let a = world.cell_center(free[rng.random_range(0..free.len())]);
            let b = world.cell_center(free[rng.random_range(0..free.len())]);
            let ab = geodesic_distance(&world, a, b);
            let ba = geodesic_distance(&world, b, a);
            assert_eq!(ab, ba);
            let euclid = (a.0 - b.0).hypot(a.1 - b.1);
            assert!(ab >= euclid - world.cell_size, "{ab} < {euclid}");
        }
    }

    #[test]
    fn path_has_expected_length() {
        let world = room_with_block();
        let field = DistanceField::from_cell(&world, CellPos::new(1, 1));
        let path = field.path_to(CellPos::new(12, 12)).unwrap();
        assert_eq!(path.len(), 23);
        for w in path.windows(2) {
            assert_eq!((w[0].x - w[1].x).abs() + (w[0].y - w[1].y).abs(), 1);
            assert!(world.is_free(w[1]));
        }
    }
}
