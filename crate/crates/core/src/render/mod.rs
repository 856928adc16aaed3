//! First-person strip rendering and exact inter-view correspondence.

mod correspondence;
mod raycast;

pub use correspondence::{correspondence, CorrespondenceMap, MATCH_TOLERANCE};
pub use raycast::{cast_ray, GridRay, RayHit};

use std::io::Write;

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::rng::{hash_seed, rng_from};
use crate::world::{CellPos, ClassId, GridWorld, Pose};

pub const DEFAULT_WIDTH: usize = 64;
pub const FIELD_OF_VIEW_DEG: f64 = 90.0;
pub const DEFAULT_NOISE: f64 = 0.1;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RenderConfig {
    pub width: usize,
    pub fov_deg: f64,
    pub noise_sigma: f64,
}

impl Default for RenderConfig {
    fn default() -> Self {
        Self {
            width: DEFAULT_WIDTH,
            fov_deg: FIELD_OF_VIEW_DEG,
            noise_sigma: DEFAULT_NOISE,
        }
    }
}

impl RenderConfig {
    /// Direction of pixel `i` in radians. Pixel 0 is the leftmost
    /// (counter-clockwise) ray; rays sit at pixel centers.
    pub fn ray_angle(&self, heading_rad: f64, i: usize) -> f64 {
        let fov = self.fov_deg.to_radians();
        heading_rad + fov / 2.0 - (i as f64 + 0.5) * fov / self.width as f64
    }
}

/// One rendered strip.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct View {
    pub pose: Pose,
    pub width: usize,
    pub appearance_dim: usize,
    /// Row-major `width x appearance_dim`.
    pub features: Vec<f64>,
    pub gt_class: Vec<ClassId>,
    pub depth: Vec<f64>,
    pub hit_points: Vec<(f64, f64)>,
    pub hit_cells: Vec<CellPos>,
}

impl View {
    pub fn pixel_features(&self, i: usize) -> &[f64] {
        &self.features[i * self.appearance_dim..(i + 1) * self.appearance_dim]
    }

    /// Debug dump: `pixel,class,depth` rows.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["pixel", "class", "depth"])?;
        for i in 0..self.width {
            w.write_record([
                i.to_string(),
                self.gt_class[i].to_string(),
                self.depth[i].to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Raycasts a strip view.
///
/// Pixel features are the hit surface's class embedding, plus its texture
/// value times the world's texture direction, plus Gaussian noise seeded by
/// `(world, pose, pixel)` so repeated renders are identical.
pub fn render_view(world: &GridWorld, pose: Pose, cfg: &RenderConfig) -> View {
    let w = cfg.width;
    let d = world.appearance_dim();
    let mut view = View {
        pose,
        width: w,
        appearance_dim: d,
        features: Vec::with_capacity(w * d),
        gt_class: Vec::with_capacity(w),
        depth: Vec::with_capacity(w),
        hit_points: Vec::with_capacity(w),
        hit_cells: Vec::with_capacity(w),
    };
    let pose_seed = hash_seed(&[
        world.seed,
        pose.x.to_bits(),
        pose.y.to_bits(),
        pose.heading.steps() as u64,
    ]);
    let heading = pose.heading.radians();
    for i in 0..w {
        let hit = cast_ray(
            world,
            (pose.x, pose.y),
            cfg.ray_angle(heading, i),
            f64::INFINITY,
        )
        .expect("closed world always yields a hit");
        let class = world
            .surface_class(hit.cell)
            .expect("ray hits are wall cells");
        let texture = world.texture_at(hit.cell);
        let mut noise = rng_from(&[pose_seed, i as u64]);
        let emb = &world.class_embeddings[class as usize];
        for k in 0..d {
            let n: f64 = StandardNormal.sample(&mut noise);
            view.features
                .push(emb[k] + texture * world.texture_direction[k] + cfg.noise_sigma * n);
        }
        view.gt_class.push(class);
        view.depth.push(hit.distance.max(1e-9));
        view.hit_points.push(hit.point);
        view.hit_cells.push(hit.cell);
    }
    view
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::fixtures::walled_room as room;
    use crate::world::{ClassId, Heading};

    #[test]
    fn centered_in_square_room_depth_is_symmetric() {
        let world = room(16, |_, _| None);
        // room spans 0.25..4.25; center 2.25
        let view = render_view(
            &world,
            Pose::new(2.25, 2.25, Heading::new(0)),
            &RenderConfig::default(),
        );
        for i in 0..32 {
            assert!(
                (view.depth[i] - view.depth[63 - i]).abs() < 1e-9,
                "pixel {i}"
            );
        }
        assert!(view.depth.iter().all(|&d| d > 0.0));
        // central rays hit the wall at x = 4.25
        assert!((view.depth[31] - 2.0 / (0.703125f64.to_radians().cos())).abs() < 1e-9);
    }

    #[test]
    fn render_is_pure() {
        let world = room(10, |x, _| Some((x % 3) as ClassId));
        let pose = Pose::new(1.3, 1.1, Heading::new(5));
        let cfg = RenderConfig::default();
        assert_eq!(
            render_view(&world, pose, &cfg),
            render_view(&world, pose, &cfg)
        );
    }

    #[test]
    fn patch_spanning_fov_fills_view() {
        // class 2 painted on the east wall (x = 17) over rows 5..=12
        let world = room(16, |x, y| (x == 17 && (5..=12).contains(&y)).then_some(2));
        // one cell in front of the wall, centered on the patch: 45 deg half-FOV
        // at 0.125 m covers +/- 0.125 m, well inside rows 5..=12 (1.25 m..3.25 m)
        let view = render_view(
            &world,
            Pose::new(4.125, 2.25, Heading::new(0)),
            &RenderConfig::default(),
        );
        assert!(view.gt_class.iter().all(|&c| c == 2), "{:?}", view.gt_class);
        for (i, &(hx, _)) in view.hit_points.iter().enumerate() {
            assert!((hx - 4.25).abs() < 1e-12, "pixel {i}");
        }
    }

    #[test]
    fn gt_class_matches_hit_cell() {
        let world = crate::world::generate_world(4, &crate::world::GenParams::default()).unwrap();
        let free = world.free_cells();
        for k in (0..free.len()).step_by(97) {
            let (x, y) = world.cell_center(free[k]);
            let v = render_view(
                &world,
                Pose::new(x, y, Heading::new(k as i32)),
                &RenderConfig::default(),
            );
            for i in 0..v.width {
                assert_eq!(Some(v.gt_class[i]), world.surface_class(v.hit_cells[i]));
                assert_eq!(
                    world.cell_of(
                        v.hit_points[i].0 + 1e-9 * (v.hit_points[i].0 - x).signum(),
                        v.hit_points[i].1 + 1e-9 * (v.hit_points[i].1 - y).signum()
                    ),
                    v.hit_cells[i]
                );
            }
        }
    }

    #[test]
    fn csv_dump_has_one_row_per_pixel() {
        let world = room(8, |_, _| None);
        let view = render_view(
            &world,
            Pose::new(1.0, 1.0, Heading::new(2)),
            &RenderConfig::default(),
        );
        let mut buf = Vec::new();
        view.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 65);
        assert!(text.starts_with("pixel,class,depth"));
    }
}
