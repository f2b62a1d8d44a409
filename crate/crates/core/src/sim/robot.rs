use std::sync::Arc;

use crate::bus::{Domain, Publisher, Subscription};
use crate::costmap::{CostGrid, LayeredCostmap, INSCRIBED};
use crate::grid::{wrap_angle, Pose2};
use crate::map_io::{OccupancyGrid, Region, RobotSpec, Scenario};
use crate::messages::{
    FleetSnapshot, Message, PoseStamped, LANE_MASK_TOPIC, MULTI_ROBOT_TOPIC, POSE_BASE,
    PROHIBITION_MASK_TOPIC, TICKET_RESPONSE_TOPIC, TICKET_TOPIC,
};
use crate::planning::{dwa_step, dynamic_window, footprint_admissible, plan_global, CommandKind, Path};
use crate::region_protocol::{RegionClient, Ticket};

use super::{RobotState, SimError};

/// Global path currently being followed.
#[derive(Debug, Clone)]
struct ActivePlan {
    path: Path,
    /// Cut short where the real master blocks the way.
    partial: bool,
    made_at: u64,
    held: Vec<String>,
    target: usize,
    progress: usize,
}

/// What a robot did during one control step.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlOutput {
    pub v: f64,
    pub w: f64,
    pub held: Vec<String>,
    /// Arrived at the final goal or dwelling at a waypoint.
    pub resting: bool,
}

/// One robot's control stack: layered cost map, region client, planners
/// and bus endpoints.
pub struct RobotAgent {
    spec: RobotSpec,
    costmap: LayeredCostmap,
    client: Option<RegionClient>,
    publisher: Publisher,
    pose_topic: String,
    prohibition_sub: Option<Subscription<Message>>,
    lane_sub: Option<Subscription<Message>>,
    fleet_sub: Option<Subscription<Message>>,
    ticket_sub: Option<Subscription<Message>>,
    fleet: Option<Arc<FleetSnapshot>>,
    plan: Option<ActivePlan>,
    /// Index into the waypoints; `waypoints.len()` means the final goal.
    target: usize,
    dwell_until: Option<u64>,
    arrived_at: Option<u64>,
    replan_every: u64,
}

impl RobotAgent {
    pub fn new(
        spec: &RobotSpec,
        scenario: &Scenario,
        occupancy: &OccupancyGrid,
        regions: &[Region],
        domain: &Domain<Message>,
    ) -> Result<Self, SimError> {
        let stack = scenario.layer_stack(spec);
        let t = spec.layers;
        let sub = |on: bool, topic: &str| on.then(|| domain.subscribe(topic)).transpose();
        Ok(Self {
            costmap: LayeredCostmap::new(stack, &spec.name, occupancy),
            client: t.region.then(|| RegionClient::new(&spec.name, regions, &scenario.region)),
            publisher: domain.create_publisher(&spec.name),
            pose_topic: format!("/{}/{POSE_BASE}", spec.name),
            prohibition_sub: sub(t.prohibition, PROHIBITION_MASK_TOPIC)?,
            lane_sub: sub(t.lane, LANE_MASK_TOPIC)?,
            fleet_sub: sub(t.fleet, MULTI_ROBOT_TOPIC)?,
            ticket_sub: sub(t.region, TICKET_RESPONSE_TOPIC)?,
            fleet: None,
            plan: None,
            target: 0,
            dwell_until: None,
            arrived_at: None,
            replan_every: scenario.planner.replan_every.max(1),
            spec: spec.clone(),
        })
    }

    pub fn name(&self) -> &str {
        &self.spec.name
    }

    pub fn arrived_at(&self) -> Option<u64> {
        self.arrived_at
    }

    pub fn master(&self) -> &CostGrid {
        self.costmap.master()
    }

    pub fn costmap(&self) -> &LayeredCostmap {
        &self.costmap
    }

    fn target_pose(&self) -> Pose2 {
        match self.spec.waypoints.get(self.target) {
            Some(w) => Pose2::new(w.pose[0], w.pose[1], w.pose[2]),
            None => self.spec.goal,
        }
    }

    fn drain_inputs(&mut self) -> Result<Vec<Ticket>, SimError> {
        if let Some(sub) = &self.prohibition_sub {
            for s in sub.take_all() {
                if let Message::ProhibitionMask(m) = s.payload {
                    self.costmap.set_prohibition_mask(&m)?;
                }
            }
        }
        if let Some(sub) = &self.lane_sub {
            for s in sub.take_all() {
                if let Message::LaneMask(m) = s.payload {
                    self.costmap.set_lane_mask(&m)?;
                }
            }
        }
        if let Some(sub) = &self.fleet_sub {
            for s in sub.take_all() {
                if let Message::Fleet(f) = s.payload {
                    self.fleet = Some(f);
                }
            }
        }
        let mut tickets = Vec::new();
        if let Some(sub) = &self.ticket_sub {
            for s in sub.take_all() {
                if let Message::Ticket(t) = s.payload {
                    if t.robot_id == self.spec.name {
                        tickets.push(t);
                    }
                }
            }
        }
        Ok(tickets)
    }

    fn held(&self) -> Vec<String> {
        self.client
            .as_ref()
            .map(|c| c.held().into_iter().map(str::to_owned).collect())
            .unwrap_or_default()
    }

    /// Plans on the master grid; when that fails, plans without other
    /// robots and reservations and keeps the prefix the robot can
    /// actually drive.
    fn make_plan(&self, pose: &Pose2, goal: &Pose2, step: u64, held: Vec<String>) -> Option<ActivePlan> {
        let master = self.costmap.master();
        let done = |path: Path, partial: bool| ActivePlan {
            path,
            partial,
            made_at: step,
            held: held.clone(),
            target: self.target,
            progress: 0,
        };
        if let Ok(path) = plan_global(master, pose, goal) {
            return Some(done(path, false));
        }
        let relaxed = self.costmap.relaxed_master().ok()?;
        let full = plan_global(&relaxed, pose, goal).ok()?;
        let r = self.spec.radius;
        let ok = |&(x, y): &(f64, f64)| footprint_admissible(master, x, y, r);
        let first_ok = full.waypoints.iter().position(ok).unwrap_or(full.len());
        let end = full.waypoints[first_ok..]
            .iter()
            .position(|p| !ok(p))
            .map_or(full.len(), |k| first_ok + k);
        let mut path = full;
        path.waypoints.truncate(end.max(1));
        path.cells.truncate(end.max(1));
        Some(done(path, true))
    }

    fn replan_due(&self, step: u64, held: &[String]) -> bool {
        let Some(plan) = &self.plan else { return true };
        let master = self.costmap.master();
        plan.target != self.target
            || step - plan.made_at >= self.replan_every
            || plan.held != held
            || plan.path.cells[plan.progress..]
                .iter()
                .any(|&(c, r)| master.get(c, r) >= INSCRIBED)
    }

    /// One control step: refresh layers, run the region client, replan if
    /// due and pick a velocity command. Publishes the current pose and any
    /// tickets.
    pub fn control(
        &mut self,
        domain: &Domain<Message>,
        state: &RobotState,
        step: u64,
        scenario: &Scenario,
        regions: &[Region],
    ) -> Result<ControlOutput, SimError> {
        let dt = scenario.sim.dt;
        let now = step as f64 * dt;
        let responses = self.drain_inputs()?;
        let pose = state.pose;
        let mut out = ControlOutput { v: 0.0, w: 0.0, held: self.held(), resting: self.arrived_at.is_some() };

        if self.costmap.ready() {
            let fleet = self
                .fleet
                .as_ref()
                .map(|f| f.fresh_poses(step, scenario.costmap.fleet_stale_steps))
                .unwrap_or_default();
            let holdings = self.client.as_ref().map(|c| c.holdings()).unwrap_or_default();
            self.costmap.update(pose.yaw, &fleet, regions, &holdings)?;

            if let Some(client) = &mut self.client {
                for t in client.step(&pose, now, &responses) {
                    domain.publish(&self.publisher, TICKET_TOPIC, Message::Ticket(t))?;
                }
            }
            out.held = self.held();

            if self.arrived_at.is_none() {
                let (v, w, resting) = self.drive(state, step, scenario, &out.held);
                out.v = v.clamp(-self.spec.limits.v_max, self.spec.limits.v_max);
                out.w = w.clamp(-self.spec.limits.w_max, self.spec.limits.w_max);
                out.resting = resting;
            }
        }

        let msg = Message::Pose(PoseStamped { pose, stamp: step });
        domain.publish(&self.publisher, &self.pose_topic, msg)?;
        Ok(out)
    }

    fn drive(&mut self, state: &RobotState, step: u64, scenario: &Scenario, held: &[String]) -> (f64, f64, bool) {
        if let Some(until) = self.dwell_until {
            if step < until {
                return (0.0, 0.0, true);
            }
            self.dwell_until = None;
            self.target += 1;
        }
        let pose = state.pose;
        let target = self.target_pose();
        if self.replan_due(step, held) {
            self.plan = self.make_plan(&pose, &target, step, held.to_vec());
        }
        let Some(plan) = &mut self.plan else {
            return (0.0, 0.0, false);
        };
        let cfg = &scenario.planner.dwa;

        // Advance progress to the nearest waypoint ahead of the robot.
        let wp = &plan.path.waypoints;
        let horizon = (plan.progress + 40).min(wp.len());
        let dist = |p: &(f64, f64)| (p.0 - pose.x).hypot(p.1 - pose.y);
        plan.progress = (plan.progress..horizon)
            .min_by(|&a, &b| dist(&wp[a]).total_cmp(&dist(&wp[b])))
            .unwrap_or(plan.progress);

        // Local target: a point `lookahead` meters further along the path.
        let mut along = 0.0;
        let mut k = plan.progress;
        while k + 1 < wp.len() && along < scenario.planner.lookahead {
            along += dist_between(wp[k], wp[k + 1]);
            k += 1;
        }
        let at_end = k + 1 >= wp.len();
        let local_goal = if at_end && !plan.partial {
            target
        } else {
            let (x, y) = wp[k];
            let prev = wp[k.saturating_sub(1)];
            let yaw = if k > 0 { (y - prev.1).atan2(x - prev.0) } else { pose.yaw };
            Pose2::new(x, y, yaw)
        };
        if at_end && plan.partial && pose.distance(&local_goal) <= cfg.xy_tolerance {
            return (0.0, 0.0, false);
        }

        // Turn toward the local target first when facing well away from it;
        // sampled arcs rarely recover from a large heading error in tight spaces.
        let bearing = (local_goal.y - pose.y).atan2(local_goal.x - pose.x);
        let err = wrap_angle(bearing - pose.yaw);
        if pose.distance(&local_goal) > cfg.xy_tolerance && err.abs() > scenario.planner.align_threshold {
            let win = dynamic_window(state.v, state.w, &self.spec.limits, scenario.sim.dt);
            let w = err.signum() * (1.5 * err.abs()).min(self.spec.limits.w_max);
            return (win.v_min, w.clamp(win.w_min, win.w_max), false);
        }

        let local_path = &wp[plan.progress..(k + 1).min(wp.len())];
        let cmd = dwa_step(state, &self.spec.limits, self.costmap.master(), local_path, &local_goal, cfg, scenario.sim.dt);
        if cmd.kind == CommandKind::Arrived && at_end && !plan.partial {
            match self.spec.waypoints.get(self.target) {
                Some(w) => {
                    self.dwell_until = Some(step + (w.dwell / scenario.sim.dt).round() as u64);
                    return (0.0, 0.0, true);
                }
                None => {
                    self.arrived_at = Some(step);
                    return (0.0, 0.0, true);
                }
            }
        }
        (cmd.v, cmd.w, false)
    }
}

fn dist_between(a: (f64, f64), b: (f64, f64)) -> f64 {
    (a.0 - b.0).hypot(a.1 - b.1)
}
