//! Grid worlds: occupancy, per-surface classes and appearance, agent poses.

pub mod fixtures;
mod generate;
mod geodesic;
mod io;
pub(crate) mod pose;

pub use generate::{generate_world, GenParams};
pub use geodesic::{geodesic_distance, DistanceField, UNREACHABLE};
pub use io::{read_world, write_world};
pub use pose::{
    segment_is_free, step_pose, Heading, MovementAction, Pose, StepOutcome, HEADING_COUNT,
    HEADING_STEP_DEG, STEP_LENGTH,
};

use serde::{Deserialize, Serialize};

/// Semantic class identifier. Class 0 is the plain wall/background class.
pub type ClassId = u8;

/// Marker stored in `surface_class` for free cells.
pub const NO_CLASS: ClassId = u8::MAX;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Cell {
    Free,
    Wall,
}

/// Integer cell coordinates.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CellPos {
    pub x: i32,
    pub y: i32,
}

impl CellPos {
    pub const fn new(x: i32, y: i32) -> Self {
        Self { x, y }
    }

    pub fn neighbors4(self) -> [CellPos; 4] {
        [
            CellPos::new(self.x + 1, self.y),
            CellPos::new(self.x - 1, self.y),
            CellPos::new(self.x, self.y + 1),
            CellPos::new(self.x, self.y - 1),
        ]
    }
}

/// Closed occupancy grid with per-wall-cell class and texture.
///
/// Immutable after generation. World coordinates are meters with cell
/// `(i, j)` covering `[i, i+1) x [j, j+1)` times `cell_size`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridWorld {
    pub seed: u64,
    pub cell_size: f64,
    pub width: usize,
    pub height: usize,
    pub class_count: usize,
    pub occupancy: Vec<Cell>,
    pub surface_class: Vec<ClassId>,
    pub texture: Vec<f64>,
    /// `class_count` appearance codes, each `appearance_dim` long.
    pub class_embeddings: Vec<Vec<f64>>,
    /// Appearance direction scaled by the per-cell texture value.
    pub texture_direction: Vec<f64>,
}

impl GridWorld {
    pub fn appearance_dim(&self) -> usize {
        self.texture_direction.len()
    }

    pub fn in_bounds(&self, c: CellPos) -> bool {
        c.x >= 0 && c.y >= 0 && (c.x as usize) < self.width && (c.y as usize) < self.height
    }

    pub fn index(&self, c: CellPos) -> usize {
        c.y as usize * self.width + c.x as usize
    }

    pub fn cell_pos(&self, index: usize) -> CellPos {
        CellPos::new((index % self.width) as i32, (index / self.width) as i32)
    }

    /// Out-of-bounds cells read as walls.
    pub fn cell(&self, c: CellPos) -> Cell {
        if self.in_bounds(c) {
            self.occupancy[self.index(c)]
        } else {
            Cell::Wall
        }
    }

    pub fn is_free(&self, c: CellPos) -> bool {
        self.cell(c) == Cell::Free
    }

    /// Class of a wall cell; `None` for free or out-of-bounds cells.
    pub fn surface_class(&self, c: CellPos) -> Option<ClassId> {
        if !self.in_bounds(c) {
            return None;
        }
        match self.surface_class[self.index(c)] {
            NO_CLASS => None,
            k => Some(k),
        }
    }

    pub fn texture_at(&self, c: CellPos) -> f64 {
        if self.in_bounds(c) {
            self.texture[self.index(c)]
        } else {
            0.0
        }
    }

    pub fn cell_of(&self, x: f64, y: f64) -> CellPos {
        CellPos::new(
            (x / self.cell_size).floor() as i32,
            (y / self.cell_size).floor() as i32,
        )
    }

    pub fn cell_center(&self, c: CellPos) -> (f64, f64) {
        (
            (c.x as f64 + 0.5) * self.cell_size,
            (c.y as f64 + 0.5) * self.cell_size,
        )
    }

    pub fn is_free_point(&self, x: f64, y: f64) -> bool {
        self.is_free(self.cell_of(x, y))
    }

    pub fn free_cells(&self) -> Vec<CellPos> {
        (0..self.occupancy.len())
            .filter(|&i| self.occupancy[i] == Cell::Free)
            .map(|i| self.cell_pos(i))
            .collect()
    }

    pub fn free_count(&self) -> usize {
        self.occupancy.iter().filter(|&&c| c == Cell::Free).count()
    }

    /// Size of the free component containing `start` (4-connectivity).
    pub fn flood_fill_count(&self, start: CellPos) -> usize {
        DistanceField::from_cell(self, start).reachable_count()
    }

    /// Checks the structural invariants: closed boundary, one free component,
    /// classes on exactly the wall cells.
    pub fn validate(&self) -> Result<(), String> {
        let n = self.width * self.height;
        if self.occupancy.len() != n || self.surface_class.len() != n || self.texture.len() != n {
            return Err("grid array length mismatch".into());
        }
        if self.class_embeddings.len() != self.class_count {
            return Err("embedding count differs from class count".into());
        }
        for x in 0..self.width as i32 {
            for y in [0, self.height as i32 - 1] {
                if self.is_free(CellPos::new(x, y)) {
                    return Err(format!("boundary cell ({x},{y}) is free"));
                }
            }
        }
        for y in 0..self.height as i32 {
            for x in [0, self.width as i32 - 1] {
                if self.is_free(CellPos::new(x, y)) {
                    return Err(format!("boundary cell ({x},{y}) is free"));
                }
            }
        }
        for i in 0..n {
            let class = self.surface_class[i];
            match self.occupancy[i] {
                Cell::Wall if class == NO_CLASS || class as usize >= self.class_count => {
                    return Err(format!("wall cell {i} has invalid class {class}"));
                }
                Cell::Free if class != NO_CLASS => {
                    return Err(format!("free cell {i} carries class {class}"));
                }
                _ => {}
            }
            if !(0.0..=1.0).contains(&self.texture[i]) {
                return Err(format!("texture out of range at {i}"));
            }
        }
        let free = self.free_cells();
        let Some(&first) = free.first() else {
            return Err("no free cells".into());
        };
        if self.flood_fill_count(first) != free.len() {
            return Err("free space is not connected".into());
        }
        Ok(())
    }
}
