//! Small hand-built worlds for tests and examples.

use super::{Cell, ClassId, GridWorld, NO_CLASS};

/// An `n x n` free room inside a one-cell wall ring, 0.25 m cells. Wall
/// cells are class 0 unless `paint(x, y)` returns another class. Three
/// classes with two-dimensional appearance codes.
pub fn walled_room(n: usize, paint: impl Fn(usize, usize) -> Option<ClassId>) -> GridWorld {
    let w = n + 2;
    let mut occupancy = vec![Cell::Wall; w * w];
    let mut surface_class = vec![0; w * w];
    for y in 0..w {
        for x in 0..w {
            let i = y * w + x;
            if (1..=n).contains(&x) && (1..=n).contains(&y) {
                occupancy[i] = Cell::Free;
                surface_class[i] = NO_CLASS;
            } else if let Some(k) = paint(x, y) {
                surface_class[i] = k;
            }
        }
    }
    GridWorld {
        seed: 9,
        cell_size: 0.25,
        width: w,
        height: w,
        class_count: 3,
        occupancy,
        surface_class,
        texture: vec![0.5; w * w],
        class_embeddings: vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![-1.0, -1.0]],
        texture_direction: vec![0.1, 0.1],
    }
}

/// Turns the given cells of `world` into walls of `class`.
pub fn with_block(mut world: GridWorld, cells: &[(usize, usize)], class: ClassId) -> GridWorld {
    for &(x, y) in cells {
        let i = y * world.width + x;
        world.occupancy[i] = Cell::Wall;
        world.surface_class[i] = class;
    }
    world
}
