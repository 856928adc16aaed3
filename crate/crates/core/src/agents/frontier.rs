use std::collections::HashSet;

use super::navigate::Navigator;
use super::occupancy::{MapCell, OccupancyMap};
use super::{EpisodeContext, Explorer, Observation};
use crate::rng::Rng;
use crate::world::{CellPos, DistanceField, MovementAction, Pose, UNREACHABLE};

/// Frontiers closer than this many BFS steps are cleared by turning on the
/// spot instead of walking.
const NEAR_FRONTIER: u32 = 2;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Goal {
    Frontier(CellPos),
    Revisit(CellPos),
}

impl Goal {
    fn cell(self) -> CellPos {
        match self {
            Goal::Frontier(c) | Goal::Revisit(c) => c,
        }
    }
}

/// Frontier-based exploration on an online occupancy map, confined to the
/// cells within the radius of the start as measured on the agent's own map.
/// Once no frontier remains it walks to the least recently visited cell.
pub struct FrontierExplorer {
    pub map: OccupancyMap,
    start: CellPos,
    radius_steps: u32,
    nav: Navigator,
    last_visit: Vec<i64>,
    goal: Option<Goal>,
    goal_steps: usize,
    goal_budget: usize,
    spins: usize,
    blacklist: HashSet<CellPos>,
}

impl FrontierExplorer {
    pub fn new(ctx: &EpisodeContext<'_>) -> Self {
        let map = OccupancyMap::for_world(ctx.world);
        let start = map.cell_of(ctx.start.x, ctx.start.y);
        let n = map.width * map.height;
        Self {
            radius_steps: (ctx.radius / map.cell_size).floor() as u32,
            nav: Navigator {
                strafe: false,
                ..Navigator::new(map.cell_size)
            },
            map,
            start,
            last_visit: vec![-1; n],
            goal: None,
            goal_steps: 0,
            goal_budget: 0,
            spins: 0,
            blacklist: HashSet::new(),
        }
    }

    fn index(&self, c: CellPos) -> usize {
        c.y as usize * self.map.width + c.x as usize
    }

    /// Free cells of the own map within the radius of the start.
    pub fn allowed_cells(&self) -> DistanceField {
        DistanceField::over(self.map.width, self.map.height, self.start, |c| {
            self.map.is_free(c)
        })
    }

    pub fn is_frontier(&self, c: CellPos) -> bool {
        self.map.is_free(c)
            && c.neighbors4()
                .iter()
                .any(|&n| self.map.get(n) == MapCell::Unknown)
    }

    fn choose_goal(&self, here: &DistanceField, allowed: &DistanceField) -> (Option<Goal>, bool) {
        let mut best_frontier: Option<(u32, CellPos)> = None;
        let mut near_frontier = false;
        let mut best_revisit: Option<(i64, u32, CellPos)> = None;
        let cur = here.source;
        for i in 0..self.map.width * self.map.height {
            let c = CellPos::new((i % self.map.width) as i32, (i / self.map.width) as i32);
            let d = here.steps_by_index(i);
            if d == UNREACHABLE
                || allowed.steps_by_index(i) > self.radius_steps
                || self.blacklist.contains(&c)
            {
                continue;
            }
            if self.is_frontier(c) {
                if d <= NEAR_FRONTIER {
                    near_frontier = true;
                } else if best_frontier.is_none_or(|(bd, _)| d < bd) {
                    best_frontier = Some((d, c));
                }
            }
            if c != cur {
                let key = (self.last_visit[i], d);
                if best_revisit.is_none_or(|(t, bd, _)| key < (t, bd)) {
                    best_revisit = Some((key.0, key.1, c));
                }
            }
        }
        if let Some((_, c)) = best_frontier {
            return (Some(Goal::Frontier(c)), near_frontier);
        }
        (
            best_revisit.map(|(_, _, c)| Goal::Revisit(c)),
            near_frontier,
        )
    }

    fn note_collision(&mut self, pose: Pose, last: Option<super::Action>) {
        let turn = match last {
            Some(super::Action::Move(MovementAction::MoveForward)) => 0,
            Some(super::Action::Move(MovementAction::MoveLeft)) => 6,
            Some(super::Action::Move(MovementAction::MoveRight)) => -6,
            _ => return,
        };
        let (dx, dy) = pose.heading.rotated(turn).unit();
        let here = self.map.cell_of(pose.x, pose.y);
        let blocked = self.map.cell_of(pose.x + dx * 0.25, pose.y + dy * 0.25);
        if blocked != here {
            self.map.mark_obstacle(blocked);
        }
    }
}

impl Explorer for FrontierExplorer {
    fn next_move(&mut self, obs: &Observation<'_>, _rng: &mut Rng) -> MovementAction {
        let pose = obs.pose();
        self.map.update(obs.view);
        if obs.collision {
            self.note_collision(pose, obs.last_action);
        }
        let cur = self.map.cell_of(pose.x, pose.y);
        let ci = self.index(cur);
        self.last_visit[ci] = obs.step_index as i64;

        let allowed = self.allowed_cells();
        let radius = self.radius_steps;
        let passable = |c: CellPos| self.map.is_free(c) && allowed.steps(c) <= radius;
        let here = DistanceField::over(self.map.width, self.map.height, cur, passable);

        let stale = match self.goal {
            None => true,
            Some(g) => {
                g.cell() == cur
                    || here.steps(g.cell()) == UNREACHABLE
                    || matches!(g, Goal::Frontier(c) if !self.is_frontier(c))
                    || self.goal_steps > self.goal_budget
            }
        };
        if stale {
            if let Some(g) = self.goal.take() {
                if g.cell() != cur && self.goal_steps > self.goal_budget {
                    self.blacklist.insert(g.cell());
                }
            }
            let (goal, near) = self.choose_goal(&here, &allowed);
            let frontier_goal = matches!(goal, Some(Goal::Frontier(_)));
            if near && !frontier_goal && self.spins < 24 {
                self.spins += 1;
                return MovementAction::RotateLeft;
            }
            self.goal = goal;
            self.goal_steps = 0;
            if let Some(g) = goal {
                self.goal_budget = 2 * here.steps(g.cell()) as usize + 30;
            }
        }
        let Some(goal) = self.goal else {
            return MovementAction::RotateLeft;
        };
        self.goal_steps += 1;
        let path = here.path_to(goal.cell()).unwrap_or_default();
        let map = &self.map;
        let free = |x: f64, y: f64| {
            let c = map.cell_of(x, y);
            map.is_free(c) && allowed.steps(c) <= radius
        };
        match self.nav.step(pose, &path, free) {
            Some(a) => {
                if a.is_translation() {
                    self.spins = 0;
                }
                a
            }
            None => MovementAction::RotateLeft,
        }
    }
}
