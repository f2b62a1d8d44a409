use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::grid::Pose2;
use crate::map_io::{Occupancy, OccupancyGrid};
use crate::planning::integrate;

#[derive(Debug, Clone, PartialEq)]
pub struct RobotState {
    pub name: String,
    pub pose: Pose2,
    pub v: f64,
    pub w: f64,
    pub radius: f64,
    /// Lower is served first.
    pub priority: i64,
    pub goal: Pose2,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EventKind {
    RobotRobot { a: String, b: String, distance: f64 },
    RobotWall { robot: String, col: usize, row: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimEvent {
    pub step: u64,
    #[serde(flatten)]
    pub kind: EventKind,
}

#[derive(Debug, Clone)]
pub struct WorldState {
    pub step: u64,
    pub robots: Vec<RobotState>,
    pub occupancy: Arc<OccupancyGrid>,
    /// Append-only.
    pub events: Vec<SimEvent>,
}

impl WorldState {
    pub fn new(robots: Vec<RobotState>, occupancy: Arc<OccupancyGrid>) -> Self {
        Self {
            step: 0,
            robots,
            occupancy,
            events: Vec::new(),
        }
    }
}

/// Advances every robot by its command over `dt`, all from the pre-step
/// poses, and increments the step counter.
pub fn step_world(mut world: WorldState, commands: &[(f64, f64)], dt: f64) -> WorldState {
    assert_eq!(commands.len(), world.robots.len(), "one command per robot");
    for (robot, &(v, w)) in world.robots.iter_mut().zip(commands) {
        robot.pose = integrate(&robot.pose, v, w, dt);
        robot.v = v;
        robot.w = w;
    }
    world.step += 1;
    world
}

/// Whether a disc overlaps the axis-aligned cell `(col, row)`.
fn disc_hits_cell(occ: &OccupancyGrid, x: f64, y: f64, radius: f64, col: usize, row: usize) -> bool {
    let m = occ.meta;
    let x0 = m.origin_x + col as f64 * m.resolution;
    let y0 = m.origin_y + row as f64 * m.resolution;
    let dx = (x0 - x).max(0.0).max(x - x0 - m.resolution);
    let dy = (y0 - y).max(0.0).max(y - y0 - m.resolution);
    dx * dx + dy * dy < radius * radius
}

/// Robot pairs closer than the sum of their radii, and robots whose disc
/// overlaps an occupied cell of the static map.
pub fn check_collisions(world: &WorldState) -> Vec<SimEvent> {
    let mut events = Vec::new();
    let robots = &world.robots;
    for i in 0..robots.len() {
        for j in i + 1..robots.len() {
            let d = robots[i].pose.distance(&robots[j].pose);
            if d < robots[i].radius + robots[j].radius {
                events.push(SimEvent {
                    step: world.step,
                    kind: EventKind::RobotRobot {
                        a: robots[i].name.clone(),
                        b: robots[j].name.clone(),
                        distance: d,
                    },
                });
            }
        }
    }
    let occ = &world.occupancy;
    let m = occ.meta;
    for r in robots {
        let (c0, r0) = m.world_to_cell_unchecked(r.pose.x - r.radius, r.pose.y - r.radius);
        let (c1, r1) = m.world_to_cell_unchecked(r.pose.x + r.radius, r.pose.y + r.radius);
        'cells: for row in r0.max(0)..=r1.min(m.height as i64 - 1) {
            for col in c0.max(0)..=c1.min(m.width as i64 - 1) {
                let (col, row) = (col as usize, row as usize);
                if occ.get(col, row) == Occupancy::Occupied && disc_hits_cell(occ, r.pose.x, r.pose.y, r.radius, col, row) {
                    events.push(SimEvent {
                        step: world.step,
                        kind: EventKind::RobotWall { robot: r.name.clone(), col, row },
                    });
                    break 'cells;
                }
            }
        }
    }
    events
}

/// Recent positions of one robot, oldest first.
#[derive(Debug, Clone, Copy)]
pub struct Track<'a> {
    pub positions: &'a [(f64, f64)],
    /// Robots that have arrived or are deliberately dwelling do not count.
    pub active: bool,
}

/// True when at least one robot is active and every active robot stayed
/// within `epsilon` of where it was `window` steps ago over that whole
/// window. Tracks shorter than the window never signal.
pub fn detect_deadlock(tracks: &[Track], window: usize, epsilon: f64) -> bool {
    assert!(window >= 2, "deadlock window must be at least 2 steps");
    let mut any = false;
    for t in tracks.iter().filter(|t| t.active) {
        any = true;
        if t.positions.len() < window {
            return false;
        }
        let recent = &t.positions[t.positions.len() - window..];
        let (x0, y0) = recent[0];
        if recent.iter().any(|&(x, y)| (x - x0).hypot(y - y0) >= epsilon) {
            return false;
        }
    }
    any
}
