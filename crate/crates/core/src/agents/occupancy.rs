use crate::render::{GridRay, View};
use crate::world::{CellPos, GridWorld};

/// Depth beyond which observations are not trusted.
pub const OCCUPANCY_RANGE: f64 = 4.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MapCell {
    Unknown,
    Free,
    Obstacle,
}

/// Occupancy grid built from depth rays. Obstacles are never downgraded.
#[derive(Clone, Debug, PartialEq)]
pub struct OccupancyMap {
    pub width: usize,
    pub height: usize,
    pub cell_size: f64,
    pub range: f64,
    cells: Vec<MapCell>,
}

impl OccupancyMap {
    pub fn new(width: usize, height: usize, cell_size: f64) -> Self {
        Self {
            width,
            height,
            cell_size,
            range: OCCUPANCY_RANGE,
            cells: vec![MapCell::Unknown; width * height],
        }
    }

    /// Empty map with the dimensions of `world`; nothing else is read.
    pub fn for_world(world: &GridWorld) -> Self {
        Self::new(world.width, world.height, world.cell_size)
    }

    pub fn in_bounds(&self, c: CellPos) -> bool {
        c.x >= 0 && c.y >= 0 && (c.x as usize) < self.width && (c.y as usize) < self.height
    }

    pub fn get(&self, c: CellPos) -> MapCell {
        if self.in_bounds(c) {
            self.cells[c.y as usize * self.width + c.x as usize]
        } else {
            MapCell::Obstacle
        }
    }

    pub fn is_free(&self, c: CellPos) -> bool {
        self.get(c) == MapCell::Free
    }

    pub fn cell_of(&self, x: f64, y: f64) -> CellPos {
        CellPos::new(
            (x / self.cell_size).floor() as i32,
            (y / self.cell_size).floor() as i32,
        )
    }

    pub fn is_free_point(&self, x: f64, y: f64) -> bool {
        self.is_free(self.cell_of(x, y))
    }

    pub fn count(&self, kind: MapCell) -> usize {
        self.cells.iter().filter(|&&c| c == kind).count()
    }

    fn mark(&mut self, c: CellPos, kind: MapCell) {
        if !self.in_bounds(c) {
            return;
        }
        let slot = &mut self.cells[c.y as usize * self.width + c.x as usize];
        if *slot != MapCell::Obstacle {
            *slot = kind;
        }
    }

    pub fn mark_obstacle(&mut self, c: CellPos) {
        self.mark(c, MapCell::Obstacle);
    }

    /// Marks the cells of one ray: free up to the hit (or up to the range
    /// limit), obstacle at a hit within range.
    pub fn integrate_ray(&mut self, origin: (f64, f64), angle: f64, depth: f64, hit_cell: CellPos) {
        let within = depth <= self.range;
        let reach = if within { depth } else { self.range };
        for (cell, t_enter, _) in GridRay::new(origin, angle, self.cell_size) {
            if t_enter >= reach || !self.in_bounds(cell) {
                break;
            }
            if within && cell == hit_cell {
                break;
            }
            self.mark(cell, MapCell::Free);
        }
        if within {
            self.mark(hit_cell, MapCell::Obstacle);
        }
    }

    /// Integrates every pixel of `view`, plus the agent's own cell.
    pub fn update(&mut self, view: &View) {
        let origin = view.pose.position();
        self.mark(self.cell_of(origin.0, origin.1), MapCell::Free);
        for i in 0..view.width {
            let (hx, hy) = view.hit_points[i];
            let angle = (hy - origin.1).atan2(hx - origin.0);
            self.integrate_ray(origin, angle, view.depth[i], view.hit_cells[i]);
        }
    }
}
