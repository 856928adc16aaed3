use std::collections::BTreeSet;

use rand::seq::IndexedRandom as _;
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{Cell, CellPos, ClassId, GridWorld, NO_CLASS};
use crate::error::{Error, Result};
use crate::rng::{rng_from, Rng};

/// Seed of the appearance codes shared by every world. Each world mixes
/// these with its own random codes, so appearance only partly transfers
/// between worlds.
const SHARED_APPEARANCE_SEED: u64 = 0xA99E_A4A1_CE00_0001;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenParams {
    /// Side length of the square world, meters.
    pub extent_m: f64,
    pub cell_size: f64,
    /// Inclusive room count range.
    pub rooms: (usize, usize),
    /// Inclusive room side range, meters.
    pub room_size_m: (f64, f64),
    pub corridor_width_cells: usize,
    /// Inclusive range of painted object patches per room.
    pub patches_per_room: (usize, usize),
    /// Object classes available to each room; rooms draw their own subset.
    pub classes_per_room: usize,
    /// Inclusive range of free-standing obstacle blocks per room.
    pub obstacles_per_room: (usize, usize),
    pub class_count: usize,
    pub appearance_dim: usize,
    /// Norm of the texture direction.
    pub texture_strength: f64,
    /// Weight in [0, 1] of the shared appearance code in each class embedding.
    pub shared_appearance: f64,
    pub max_attempts: usize,
}

impl Default for GenParams {
    fn default() -> Self {
        Self {
            extent_m: 24.0,
            cell_size: 0.25,
            rooms: (8, 12),
            room_size_m: (2.5, 5.0),
            corridor_width_cells: 4,
            patches_per_room: (8, 14),
            classes_per_room: 4,
            obstacles_per_room: (1, 3),
            class_count: 13,
            appearance_dim: 8,
            texture_strength: 0.6,
            shared_appearance: 0.5,
            max_attempts: 25,
        }
    }
}

impl GenParams {
    fn check(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.cell_size <= 0.0 || self.extent_m < 4.0 * self.cell_size {
            return bad("extent too small for cell size");
        }
        if self.class_count < 2 || self.class_count >= NO_CLASS as usize {
            return bad("class_count must be in [2, 254]");
        }
        if self.appearance_dim == 0 {
            return bad("appearance_dim must be positive");
        }
        if self.rooms.0 == 0 || self.rooms.0 > self.rooms.1 {
            return bad("room range must be non-empty and start at >= 1");
        }
        if self.room_size_m.0 <= 0.0 || self.room_size_m.0 > self.room_size_m.1 {
            return bad("room size range invalid");
        }
        if self.classes_per_room == 0 {
            return bad("classes_per_room must be positive");
        }
        if !(0.0..=1.0).contains(&self.shared_appearance) {
            return bad("shared_appearance must be in [0, 1]");
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug)]
struct Rect {
    x0: i32,
    y0: i32,
    w: i32,
    h: i32,
}

impl Rect {
    fn center(&self) -> (i32, i32) {
        (self.x0 + self.w / 2, self.y0 + self.h / 2)
    }

    fn overlaps_with_margin(&self, o: &Rect, margin: i32) -> bool {
        self.x0 - margin < o.x0 + o.w
            && o.x0 - margin < self.x0 + self.w
            && self.y0 - margin < o.y0 + o.h
            && o.y0 - margin < self.y0 + self.h
    }
}

/// Procedurally generates a closed, connected floor plan.
///
/// Rooms are axis-aligned rectangles joined by L-shaped corridors. Wall
/// cells default to class 0; rectangular patches of object classes are
/// painted onto room walls and free-standing blocks are dropped inside rooms
/// whenever they keep free space connected. Deterministic in `(seed, params)`.
pub fn generate_world(seed: u64, params: &GenParams) -> Result<GridWorld> {
    params.check()?;
    let mut last_reason = String::new();
    for attempt in 0..params.max_attempts {
        let mut rng = rng_from(&[seed, attempt as u64]);
        match try_generate(seed, params, &mut rng) {
            Ok(world) => return Ok(world),
            Err(reason) => last_reason = reason,
        }
    }
    Err(Error::Generation {
        attempts: params.max_attempts,
        reason: last_reason,
    })
}

fn try_generate(seed: u64, p: &GenParams, rng: &mut Rng) -> std::result::Result<GridWorld, String> {
    let n = (p.extent_m / p.cell_size).round() as i32;
    let cells = |m: f64| (m / p.cell_size).round() as i32;
    let (min_side, max_side) = (cells(p.room_size_m.0).max(3), cells(p.room_size_m.1).max(3));
    if max_side + 4 > n {
        return Err("rooms do not fit in the world".into());
    }

    let target = rng.random_range(p.rooms.0..=p.rooms.1);
    let mut rooms: Vec<Rect> = Vec::new();
    for _ in 0..400 {
        if rooms.len() == target {
            break;
        }
        let w = rng.random_range(min_side..=max_side);
        let h = rng.random_range(min_side..=max_side);
        let r = Rect {
            x0: rng.random_range(2..=n - 2 - w),
            y0: rng.random_range(2..=n - 2 - h),
            w,
            h,
        };
        if rooms.iter().all(|o| !r.overlaps_with_margin(o, 3)) {
            rooms.push(r);
        }
    }
    if rooms.len() < p.rooms.0 {
        return Err(format!(
            "placed {} of at least {} rooms",
            rooms.len(),
            p.rooms.0
        ));
    }

    let size = (n * n) as usize;
    let mut occupancy = vec![Cell::Wall; size];
    let idx = |x: i32, y: i32| (y * n + x) as usize;
    let carve = |occ: &mut Vec<Cell>, x0: i32, y0: i32, x1: i32, y1: i32| {
        for y in y0.max(1)..=y1.min(n - 2) {
            for x in x0.max(1)..=x1.min(n - 2) {
                occ[idx(x, y)] = Cell::Free;
            }
        }
    };
    for r in &rooms {
        carve(&mut occupancy, r.x0, r.y0, r.x0 + r.w - 1, r.y0 + r.h - 1);
    }
    let cw = p.corridor_width_cells.max(1) as i32;
    let lo = |v: i32| v - cw / 2;
    let hi = |v: i32| v - cw / 2 + cw - 1;
    for i in 1..rooms.len() {
        let (ax, ay) = rooms[i].center();
        let j = (0..i)
            .min_by_key(|&j| {
                let (bx, by) = rooms[j].center();
                (ax - bx).pow(2) + (ay - by).pow(2)
            })
            .unwrap();
        let (bx, by) = rooms[j].center();
        if rng.random_bool(0.5) {
            carve(
                &mut occupancy,
                ax.min(bx),
                lo(ay),
                ax.max(bx) + cw / 2,
                hi(ay),
            );
            carve(&mut occupancy, lo(bx), ay.min(by), hi(bx), ay.max(by));
        } else {
            carve(
                &mut occupancy,
                lo(ax),
                ay.min(by),
                hi(ax),
                ay.max(by) + cw / 2,
            );
            carve(&mut occupancy, ax.min(bx), lo(by), ax.max(bx), hi(by));
        }
    }

    let mut surface_class: Vec<ClassId> = occupancy
        .iter()
        .map(|c| if *c == Cell::Wall { 0 } else { NO_CLASS })
        .collect();
    let palettes: Vec<Vec<ClassId>> = rooms
        .iter()
        .map(|_| {
            let objects: Vec<ClassId> = (1..p.class_count as ClassId).collect();
            objects
                .choose_multiple(rng, p.classes_per_room.min(objects.len()))
                .copied()
                .collect()
        })
        .collect();
    let object_class =
        |rng: &mut Rng, room: usize| *palettes[room].choose(rng).expect("palette is non-empty");

    // Object patches painted onto room walls, two cells deep.
    for (ri, r) in rooms.iter().enumerate() {
        let count = rng.random_range(p.patches_per_room.0..=p.patches_per_room.1);
        for _ in 0..count {
            let class = object_class(rng, ri);
            let horizontal = rng.random_bool(0.5);
            let span = if horizontal { r.w } else { r.h };
            let len = rng.random_range(3..=12.min(span));
            let start = rng.random_range(0..=span - len);
            let (x0, y0, x1, y1) = match (horizontal, rng.random_bool(0.5)) {
                (true, true) => (r.x0 + start, r.y0 - 2, r.x0 + start + len - 1, r.y0 - 1),
                (true, false) => (
                    r.x0 + start,
                    r.y0 + r.h,
                    r.x0 + start + len - 1,
                    r.y0 + r.h + 1,
                ),
                (false, true) => (r.x0 - 2, r.y0 + start, r.x0 - 1, r.y0 + start + len - 1),
                (false, false) => (
                    r.x0 + r.w,
                    r.y0 + start,
                    r.x0 + r.w + 1,
                    r.y0 + start + len - 1,
                ),
            };
            for y in y0.max(0)..=y1.min(n - 1) {
                for x in x0.max(0)..=x1.min(n - 1) {
                    if occupancy[idx(x, y)] == Cell::Wall {
                        surface_class[idx(x, y)] = class;
                    }
                }
            }
        }
    }

    // Free-standing obstacle blocks, kept only if free space stays connected.
    for (ri, r) in rooms.iter().enumerate() {
        let count = rng.random_range(p.obstacles_per_room.0..=p.obstacles_per_room.1);
        for _ in 0..count {
            let (bw, bh) = (rng.random_range(2..=3), rng.random_range(2..=3));
            if r.w < bw + 8 || r.h < bh + 8 {
                continue;
            }
            let bx = rng.random_range(r.x0 + 4..=r.x0 + r.w - 4 - bw);
            let by = rng.random_range(r.y0 + 4..=r.y0 + r.h - 4 - bh);
            let block: Vec<usize> = (by..by + bh)
                .flat_map(|y| (bx..bx + bw).map(move |x| (x, y)))
                .map(|(x, y)| idx(x, y))
                .collect();
            if block.iter().any(|&i| occupancy[i] != Cell::Free) {
                continue;
            }
            let class = object_class(rng, ri);
            for &i in &block {
                occupancy[i] = Cell::Wall;
                surface_class[i] = class;
            }
            if !is_connected(&occupancy, n) {
                for &i in &block {
                    occupancy[i] = Cell::Free;
                    surface_class[i] = NO_CLASS;
                }
            }
        }
    }

    // Smooth texture: a few random plane waves mapped into [0, 1].
    let waves: Vec<(f64, f64, f64)> = (0..3)
        .map(|_| {
            let wavelength = rng.random_range(1.0..4.0);
            let angle: f64 = rng.random_range(0.0..std::f64::consts::TAU);
            let k = std::f64::consts::TAU / wavelength;
            (
                k * angle.cos(),
                k * angle.sin(),
                rng.random_range(0.0..std::f64::consts::TAU),
            )
        })
        .collect();
    let mut texture = vec![0.0; size];
    for y in 0..n {
        for x in 0..n {
            let i = idx(x, y);
            if occupancy[i] == Cell::Wall {
                let (wx, wy) = (
                    (x as f64 + 0.5) * p.cell_size,
                    (y as f64 + 0.5) * p.cell_size,
                );
                let s: f64 = waves
                    .iter()
                    .map(|(kx, ky, ph)| (kx * wx + ky * wy + ph).sin())
                    .sum::<f64>()
                    / 3.0;
                texture[i] = (0.5 + 0.5 * s).clamp(0.0, 1.0);
            }
        }
    }

    let d = p.appearance_dim;
    let mut shared_rng = rng_from(&[SHARED_APPEARANCE_SEED, p.class_count as u64, d as u64]);
    let (ws, wl) = (
        p.shared_appearance.sqrt(),
        (1.0 - p.shared_appearance).sqrt(),
    );
    let class_embeddings: Vec<Vec<f64>> = (0..p.class_count)
        .map(|_| {
            (0..d)
                .map(|_| {
                    let shared: f64 = StandardNormal.sample(&mut shared_rng);
                    let local: f64 = StandardNormal.sample(rng);
                    ws * shared + wl * local
                })
                .collect()
        })
        .collect();
    let raw: Vec<f64> = (0..d).map(|_| StandardNormal.sample(rng)).collect();
    let norm = raw.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-12);
    let texture_direction = raw.iter().map(|v| v / norm * p.texture_strength).collect();

    let world = GridWorld {
        seed,
        cell_size: p.cell_size,
        width: n as usize,
        height: n as usize,
        class_count: p.class_count,
        occupancy,
        surface_class,
        texture,
        class_embeddings,
        texture_direction,
    };
    world.validate()?;
    let visible = visible_wall_classes(&world);
    if visible.len() < 5.min(p.class_count) {
        return Err(format!("only {} classes face free space", visible.len()));
    }
    Ok(world)
}

fn is_connected(occupancy: &[Cell], n: i32) -> bool {
    let Some(first) = occupancy.iter().position(|c| *c == Cell::Free) else {
        return false;
    };
    let start = CellPos::new(first as i32 % n, first as i32 / n);
    let free = occupancy.iter().filter(|c| **c == Cell::Free).count();
    let field = super::DistanceField::over(n as usize, n as usize, start, |c| {
        occupancy[(c.y * n + c.x) as usize] == Cell::Free
    });
    field.reachable_count() == free
}

/// Classes of wall cells that border free space.
pub(crate) fn visible_wall_classes(world: &GridWorld) -> BTreeSet<ClassId> {
    let mut out = BTreeSet::new();
    for c in world.free_cells() {
        for nb in c.neighbors4() {
            if let Some(k) = world.surface_class(nb) {
                out.insert(k);
            }
        }
    }
    out
}
