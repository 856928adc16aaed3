use serde::{Deserialize, Serialize};

use super::navigate::Navigator;
use super::tsp::{solve_open_path, DistMatrix};
use super::{EpisodeContext, Explorer, Observation};
use crate::rng::Rng;
use crate::world::{CellPos, DistanceField, GridWorld, MovementAction, Pose, UNREACHABLE};

/// Node grid spacing in meters.
pub const NODE_SPACING: f64 = 1.0;

/// Nodes on a 1 m grid within the radius, in visiting order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpaceFillingTour {
    pub nodes: Vec<CellPos>,
    /// Cell paths between consecutive nodes, endpoints included.
    pub legs: Vec<Vec<CellPos>>,
}

impl SpaceFillingTour {
    pub fn length_steps(&self) -> usize {
        self.legs.iter().map(|l| l.len().saturating_sub(1)).sum()
    }
}

struct Region {
    radius_steps: u32,
    from_start: DistanceField,
}

impl Region {
    fn new(world: &GridWorld, start: CellPos, radius: f64) -> Self {
        Self {
            radius_steps: (radius / world.cell_size).floor() as u32,
            from_start: DistanceField::from_cell(world, start),
        }
    }

    fn contains(&self, world: &GridWorld, c: CellPos) -> bool {
        world.is_free(c) && self.from_start.steps(c) <= self.radius_steps
    }
}

/// Plans the tour with full knowledge of the floor plan: grid nodes whose
/// cell is free and within geodesic `radius` of the start, ordered by
/// nearest neighbor from the start plus 2-opt on geodesic distances.
pub fn build_space_filling_tour(world: &GridWorld, start: Pose, radius: f64) -> SpaceFillingTour {
    let start_cell = world.cell_of(start.x, start.y);
    let region = Region::new(world, start_cell, radius);
    let stride = node_stride(world.cell_size);
    let inside = |c: CellPos| region.contains(world, c);
    plan_tour(
        world.width,
        world.height,
        &inside,
        start_cell,
        stride,
        (stride / 2, stride / 2),
    )
}

fn node_stride(cell_size: f64) -> i32 {
    (NODE_SPACING / cell_size).round().max(1.0) as i32
}

/// Open tour from `from` over the lattice `offset + stride * (i, j)`
/// restricted to cells where `inside` holds.
fn plan_tour(
    width: usize,
    height: usize,
    inside: &dyn Fn(CellPos) -> bool,
    from: CellPos,
    stride: i32,
    offset: (i32, i32),
) -> SpaceFillingTour {
    let mut nodes = Vec::new();
    for y in (offset.1..height as i32).step_by(stride as usize) {
        for x in (offset.0..width as i32).step_by(stride as usize) {
            let c = CellPos::new(x, y);
            if inside(c) {
                nodes.push(c);
            }
        }
    }
    // index 0 is the start; it anchors the open path but is not a node
    let points: Vec<CellPos> = std::iter::once(from).chain(nodes.iter().copied()).collect();
    let fields: Vec<DistanceField> = points
        .iter()
        .map(|&p| DistanceField::over(width, height, p, inside))
        .collect();
    let m = DistMatrix::new(points.len(), |i, j| match fields[i].steps(points[j]) {
        UNREACHABLE => f64::INFINITY,
        s => s as f64,
    });
    let order = solve_open_path(&m, Some(0));
    let ordered: Vec<CellPos> = order[1..].iter().map(|&i| points[i]).collect();
    let legs = order[1..]
        .windows(2)
        .map(|w| fields[w[0]].path_to(points[w[1]]).unwrap_or_default())
        .collect();
    SpaceFillingTour {
        nodes: ordered,
        legs,
    }
}

/// Follows the space-filling tour. Once it is done, a new tour is planned
/// from the current cell over the node lattice shifted by half the spacing
/// (cycling through the four shifts), so later passes see new viewpoints
/// instead of replaying the first one.
pub struct SpaceFillerExplorer {
    pub tour: SpaceFillingTour,
    region_cells: Vec<bool>,
    width: usize,
    height: usize,
    stride: i32,
    pass: usize,
    nav: Navigator,
    next: usize,
    steps_on_target: usize,
    /// Nodes reached, across passes.
    pub visited: Vec<CellPos>,
}

impl SpaceFillerExplorer {
    pub fn new(ctx: &EpisodeContext<'_>) -> Self {
        let world = ctx.world;
        let tour = build_space_filling_tour(world, ctx.start, ctx.radius);
        let region = Region::new(world, world.cell_of(ctx.start.x, ctx.start.y), ctx.radius);
        let region_cells = (0..world.width * world.height)
            .map(|i| region.contains(world, world.cell_pos(i)))
            .collect();
        Self {
            tour,
            region_cells,
            width: world.width,
            height: world.height,
            stride: node_stride(world.cell_size),
            pass: 0,
            nav: Navigator::new(world.cell_size),
            next: 0,
            steps_on_target: 0,
            visited: Vec::new(),
        }
    }

    fn inside(&self, c: CellPos) -> bool {
        c.x >= 0
            && c.y >= 0
            && (c.x as usize) < self.width
            && (c.y as usize) < self.height
            && self.region_cells[c.y as usize * self.width + c.x as usize]
    }

    fn lattice_offset(&self) -> (i32, i32) {
        let (h, z) = (self.stride / 2, 0);
        [(h, h), (z, z), (z, h), (h, z)][self.pass % 4]
    }

    fn advance(&mut self, cur: CellPos) {
        self.steps_on_target = 0;
        if self.next + 1 < self.tour.nodes.len() {
            self.next += 1;
            return;
        }
        self.pass += 1;
        let offset = self.lattice_offset();
        let inside = |c: CellPos| self.inside(c);
        let tour = plan_tour(self.width, self.height, &inside, cur, self.stride, offset);
        self.tour = tour;
        self.next = 0;
    }
}

impl Explorer for SpaceFillerExplorer {
    fn next_move(&mut self, obs: &Observation<'_>, _rng: &mut Rng) -> MovementAction {
        let pose = obs.pose();
        let cell_size = self.nav.cell_size;
        let cur = CellPos::new(
            (pose.x / cell_size).floor() as i32,
            (pose.y / cell_size).floor() as i32,
        );
        for _ in 0..4 {
            if self.tour.nodes.is_empty() {
                self.advance(cur);
                continue;
            }
            let target = self.tour.nodes[self.next];
            if cur != target && self.steps_on_target < 400 {
                break;
            }
            if cur == target {
                self.visited.push(cur);
            }
            self.advance(cur);
        }
        let Some(&target) = self.tour.nodes.get(self.next) else {
            return MovementAction::RotateLeft;
        };
        if target == cur {
            return MovementAction::RotateLeft;
        }
        self.steps_on_target += 1;
        let field = DistanceField::over(self.width, self.height, cur, |c| self.inside(c));
        let Some(path) = field.path_to(target) else {
            self.steps_on_target = usize::MAX;
            return MovementAction::RotateLeft;
        };
        let free = |x: f64, y: f64| {
            self.inside(CellPos::new(
                (x / cell_size).floor() as i32,
                (y / cell_size).floor() as i32,
            ))
        };
        self.nav
            .step(pose, &path, free)
            .unwrap_or(MovementAction::RotateLeft)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agents::tests::ObsParts;
    use crate::rng::rng_from;
    use crate::world::fixtures::walled_room;
    use crate::world::{generate_world, step_pose, GenParams, Heading};

    #[test]
    fn nodes_sit_on_the_meter_grid_within_radius() {
        let world = generate_world(2, &GenParams::default()).unwrap();
        let free = world.free_cells();
        let (x, y) = world.cell_center(free[free.len() / 2]);
        let start = Pose::new(x, y, Heading::new(0));
        let tour = build_space_filling_tour(&world, start, 5.0);
        assert!(tour.nodes.len() > 3);
        let field = DistanceField::from_cell(&world, world.cell_of(x, y));
        let mut sorted = tour.nodes.clone();
        sorted.sort_by_key(|c| (c.y, c.x));
        sorted.dedup();
        assert_eq!(sorted.len(), tour.nodes.len());
        for c in &tour.nodes {
            assert_eq!((c.x % 4, c.y % 4), (2, 2));
            assert!(world.is_free(*c));
            assert!(field.steps(*c) <= 20);
        }
        assert_eq!(tour.legs.len(), tour.nodes.len() - 1);
        for (leg, w) in tour.legs.iter().zip(tour.nodes.windows(2)) {
            assert_eq!((leg[0], *leg.last().unwrap()), (w[0], w[1]));
            assert!(leg
                .windows(2)
                .all(|p| (p[0].x - p[1].x).abs() + (p[0].y - p[1].y).abs() == 1));
            assert!(leg
                .iter()
                .all(|&c| world.is_free(c) && field.steps(c) <= 20));
        }
    }

    #[test]
    fn single_node_tour_has_no_legs() {
        let world = walled_room(4, |_, _| None);
        let tour = build_space_filling_tour(&world, Pose::new(0.6, 0.6, Heading::new(0)), 5.0);
        assert_eq!(tour.nodes, vec![CellPos::new(2, 2)]);
        assert!(tour.legs.is_empty());
    }

    #[test]
    fn traversal_visits_every_node_and_stays_in_radius() {
        let world = generate_world(5, &GenParams::default()).unwrap();
        let free = world.free_cells();
        let (x, y) = world.cell_center(free[free.len() / 3]);
        let start = Pose::new(x, y, Heading::new(4));
        let ctx = EpisodeContext {
            world: &world,
            start,
            radius: 5.0,
        };
        let mut agent = SpaceFillerExplorer::new(&ctx);
        let field = DistanceField::from_cell(&world, world.cell_of(x, y));
        let mut pose = start;
        let mut rng = rng_from(&[0]);
        let budget = 4 * agent.tour.length_steps() + 600;
        let mut steps = 0;
        let first = agent.tour.nodes.clone();
        while agent.visited.len() < first.len() && steps < budget {
            let parts = ObsParts::new(&world, pose);
            let a = agent.next_move(&parts.obs(false, steps), &mut rng);
            pose = step_pose(&world, pose, a).pose;
            assert!(field.steps(world.cell_of(pose.x, pose.y)) <= 21);
            steps += 1;
        }
        assert_eq!(agent.visited, first, "after {steps} steps");
    }
}
