use std::collections::VecDeque;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::bus::Domain;
use crate::grid::{GridMeta, Pose2};
use crate::map_io::{
    load_lane_mask, load_occupancy_map, load_prohibition_mask, load_regions, write_costmap_snapshot, Region,
    Scenario,
};
use crate::messages::Message;
use crate::server::{ServerConfig, TrafficServer};

use super::{check_collisions, detect_deadlock, step_world, RobotAgent, RobotState, SimError, SimEvent, Track, WorldState};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunOptions {
    pub snapshot_dir: Option<PathBuf>,
    /// Steps between snapshots.
    pub snapshot_every: u64,
    pub log_path: Option<PathBuf>,
    pub max_steps: Option<u64>,
    pub seed: Option<u64>,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            snapshot_dir: None,
            snapshot_every: 10,
            log_path: None,
            max_steps: None,
            seed: None,
        }
    }
}

/// One line of the trajectory log: the pose at the start of the step, the
/// command issued and the regions held.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: u64,
    pub robot: String,
    pub x: f64,
    pub y: f64,
    pub yaw: f64,
    pub v: f64,
    pub w: f64,
    /// Comma-separated region ids.
    pub regions: String,
}

impl StepRecord {
    pub fn held(&self) -> impl Iterator<Item = &str> {
        self.regions.split(',').filter(|s| !s.is_empty())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Success,
    Collision,
    MutualExclusion,
    Deadlock,
    Timeout,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobotReport {
    pub name: String,
    pub arrival_step: Option<u64>,
    pub path_length: f64,
    pub straight_line: f64,
    /// Smallest gap between this robot's disc and any other robot's disc.
    pub min_clearance: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub scenario: String,
    pub seed: u64,
    pub steps: u64,
    pub outcome: Outcome,
    pub robots: Vec<RobotReport>,
    pub collision_events: u64,
    pub mutual_exclusion_violations: u64,
    pub deadlock: bool,
    /// Kept out of the serialized report so reports compare byte for byte.
    #[serde(skip)]
    pub wall_clock_s: f64,
}

impl RunReport {
    pub fn success(&self) -> bool {
        self.outcome == Outcome::Success
    }

    pub fn to_text(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub report: RunReport,
    pub trace: Vec<StepRecord>,
    pub events: Vec<SimEvent>,
    pub regions: Vec<Region>,
}

fn config(msg: impl Into<String>) -> SimError {
    SimError::Config(msg.into())
}

fn io(path: &Path, source: std::io::Error) -> SimError {
    SimError::Io { path: path.to_path_buf(), source }
}

/// Renders trajectory records as one JSON object per line.
pub fn render_log(trace: &[StepRecord]) -> String {
    let mut s = String::new();
    for r in trace {
        let _ = writeln!(s, "{}", serde_json::to_string(r).expect("record serializes"));
    }
    s
}

/// Loads every file a scenario references and checks that the pieces fit
/// together: mask geometry matches the static map, regions parse and robot
/// start and goal poses lie on the map.
pub fn validate_scenario(scenario: &Scenario) -> Result<(), SimError> {
    let occupancy = load_occupancy_map(&scenario.static_map.image, &scenario.static_map.meta)?;
    check_inputs(scenario, &occupancy.meta)?;
    let meta = occupancy.meta;
    if let Some(m) = &scenario.prohibition {
        if !load_prohibition_mask(&m.image, &m.meta)?.meta.same_geometry(&meta) {
            return Err(config("prohibition mask geometry differs from the static map"));
        }
    }
    if let Some(m) = &scenario.lane {
        if !load_lane_mask(&m.image, &m.meta)?.meta.same_geometry(&meta) {
            return Err(config("lane mask geometry differs from the static map"));
        }
    }
    if let Some(p) = &scenario.regions {
        load_regions(p)?;
    }
    Ok(())
}

fn check_inputs(scenario: &Scenario, meta: &GridMeta) -> Result<(), SimError> {
    for r in &scenario.robots {
        let mut poses = vec![("start", r.start), ("goal", r.goal)];
        poses.extend(r.waypoints.iter().map(|w| ("waypoint", Pose2::new(w.pose[0], w.pose[1], w.pose[2]))));
        for (what, p) in poses {
            if meta.world_to_cell(p.x, p.y).is_none() {
                return Err(config(format!("robot {:?}: {what} is outside the map", r.name)));
            }
        }
    }
    Ok(())
}

pub fn run_scenario(scenario: &Scenario, opts: &RunOptions) -> Result<RunOutput, SimError> {
    let started = Instant::now();
    let occupancy = Arc::new(load_occupancy_map(&scenario.static_map.image, &scenario.static_map.meta)?);
    let meta = occupancy.meta;
    check_inputs(scenario, &meta)?;

    let domain: Domain<Message> = Domain::with_latency(scenario.server.domain_id, scenario.sim.latency);
    let server_cfg = ServerConfig {
        domain_id: scenario.server.domain_id,
        prohibition_mask: scenario.prohibition.clone(),
        lane_mask: scenario.lane.clone(),
        regions: scenario.regions.clone(),
        aggregation_period: scenario.server.aggregation_period,
        stale_steps: scenario.server.stale_steps,
        priorities: scenario.robots.iter().map(|r| (r.name.clone(), r.priority)).collect(),
    };
    let mut server = TrafficServer::start(&domain, server_cfg)?;
    let masks = server.masks();
    if masks.prohibition.as_ref().is_some_and(|m| !m.meta.same_geometry(&meta))
        || masks.lane.as_ref().is_some_and(|m| !m.meta.same_geometry(&meta))
    {
        return Err(config("mask geometry differs from the static map"));
    }
    let regions = server.regions().to_vec();

    let mut agents = scenario
        .robots
        .iter()
        .map(|spec| RobotAgent::new(spec, scenario, &occupancy, &regions, &domain))
        .collect::<Result<Vec<_>, _>>()?;
    let robots = scenario
        .robots
        .iter()
        .map(|r| RobotState {
            name: r.name.clone(),
            pose: r.start,
            v: 0.0,
            w: 0.0,
            radius: r.radius,
            priority: r.priority,
            goal: r.goal,
        })
        .collect();
    let mut world = WorldState::new(robots, Arc::clone(&occupancy));

    if let Some(dir) = &opts.snapshot_dir {
        std::fs::create_dir_all(dir).map_err(|e| io(dir, e))?;
    }

    let n = agents.len();
    let max_steps = opts.max_steps.unwrap_or(scenario.sim.max_steps);
    let window = scenario.deadlock.window;
    let mut history: Vec<VecDeque<(f64, f64)>> = vec![VecDeque::with_capacity(window + 1); n];
    let mut path_length = vec![0.0; n];
    let mut clearance: Vec<Option<f64>> = vec![None; n];
    let mut trace = Vec::new();
    let mut violations = 0u64;
    let mut deadlock = false;

    #[allow(clippy::needless_range_loop)]
    let update_clearance = |world: &WorldState, clearance: &mut [Option<f64>]| {
        for i in 0..n {
            for j in 0..n {
                if i == j {
                    continue;
                }
                let (a, b) = (&world.robots[i], &world.robots[j]);
                let gap = a.pose.distance(&b.pose) - a.radius - b.radius;
                clearance[i] = Some(clearance[i].map_or(gap, |c: f64| c.min(gap)));
            }
        }
    };
    update_clearance(&world, &mut clearance);

    while world.step < max_steps {
        let step = world.step;
        domain.advance_to(step);
        let mut commands = Vec::with_capacity(n);
        let mut resting = Vec::with_capacity(n);
        for (agent, state) in agents.iter_mut().zip(&world.robots) {
            let out = agent.control(&domain, state, step, scenario, &regions)?;
            trace.push(StepRecord {
                step,
                robot: state.name.clone(),
                x: state.pose.x,
                y: state.pose.y,
                yaw: state.pose.yaw,
                v: out.v,
                w: out.w,
                regions: out.held.join(","),
            });
            commands.push((out.v, out.w));
            resting.push(out.resting);
        }
        if let Some(dir) = &opts.snapshot_dir {
            if opts.snapshot_every > 0 && step.is_multiple_of(opts.snapshot_every) {
                for agent in &agents {
                    let path = dir.join(format!("step{step:06}_{}.pgm", agent.name()));
                    write_costmap_snapshot(agent.master(), &path)?;
                }
            }
        }
        server.step(&domain, step)?;

        let before: Vec<_> = world.robots.iter().map(|r| r.pose).collect();
        world = step_world(world, &commands, scenario.sim.dt);
        let events = check_collisions(&world);
        world.events.extend(events);

        for region in &regions {
            let holder = server.table().holder(&region.id);
            for r in &world.robots {
                if region.contains(r.pose.x, r.pose.y) && holder != Some(r.name.as_str()) {
                    violations += 1;
                }
            }
        }
        for (i, r) in world.robots.iter().enumerate() {
            path_length[i] += before[i].distance(&r.pose);
            let h = &mut history[i];
            if h.len() == window {
                h.pop_front();
            }
            h.push_back((r.pose.x, r.pose.y));
        }
        update_clearance(&world, &mut clearance);

        if agents.iter().all(|a| a.arrived_at().is_some()) {
            break;
        }
        let slices: Vec<Vec<(f64, f64)>> = history.iter().map(|h| h.iter().copied().collect()).collect();
        let tracks: Vec<Track> = slices
            .iter()
            .zip(&resting)
            .map(|(p, &rest)| Track { positions: p, active: !rest })
            .collect();
        if detect_deadlock(&tracks, window, scenario.deadlock.epsilon) {
            deadlock = true;
            break;
        }
    }

    let collisions = world.events.len() as u64;
    let all_arrived = agents.iter().all(|a| a.arrived_at().is_some());
    let outcome = if collisions > 0 {
        Outcome::Collision
    } else if violations > 0 {
        Outcome::MutualExclusion
    } else if deadlock {
        Outcome::Deadlock
    } else if !all_arrived {
        Outcome::Timeout
    } else {
        Outcome::Success
    };
    let report = RunReport {
        scenario: scenario.name.clone(),
        seed: opts.seed.unwrap_or(scenario.sim.seed),
        steps: world.step,
        outcome,
        robots: scenario
            .robots
            .iter()
            .enumerate()
            .map(|(i, r)| RobotReport {
                name: r.name.clone(),
                arrival_step: agents[i].arrived_at(),
                path_length: path_length[i],
                straight_line: r.start.distance(&r.goal),
                min_clearance: clearance[i],
            })
            .collect(),
        collision_events: collisions,
        mutual_exclusion_violations: violations,
        deadlock,
        wall_clock_s: started.elapsed().as_secs_f64(),
    };
    if let Some(path) = &opts.log_path {
        std::fs::write(path, render_log(&trace)).map_err(|e| io(path, e))?;
    }
    Ok(RunOutput {
        report,
        trace,
        events: world.events,
        regions,
    })
}
