use serde::{Deserialize, Serialize};

use crate::costmap::{CostGrid, INSCRIBED, MAX_NON_OBSTACLE};
use crate::grid::{wrap_angle, Pose2};
use crate::sim::RobotState;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MotionLimits {
    pub v_max: f64,
    pub w_max: f64,
    /// Linear acceleration bound, m/s^2.
    pub a_v: f64,
    /// Angular acceleration bound, rad/s^2.
    pub a_w: f64,
}

impl Default for MotionLimits {
    fn default() -> Self {
        Self {
            v_max: 0.5,
            w_max: 1.0,
            a_v: 0.5,
            a_w: 1.5,
        }
    }
}

/// Velocities reachable within one control period.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VelocityWindow {
    pub v_min: f64,
    pub v_max: f64,
    pub w_min: f64,
    pub w_max: f64,
}

pub fn dynamic_window(v: f64, w: f64, limits: &MotionLimits, dt: f64) -> VelocityWindow {
    let v_min = (v - limits.a_v * dt).max(0.0);
    let v_max = (v + limits.a_v * dt).min(limits.v_max);
    let w_min = (w - limits.a_w * dt).max(-limits.w_max);
    let w_max = (w + limits.a_w * dt).min(limits.w_max);
    VelocityWindow {
        v_min: v_min.min(v_max),
        v_max,
        w_min: w_min.min(w_max),
        w_max,
    }
}

/// Exact constant-velocity arc over `dt`.
pub fn integrate(pose: &Pose2, v: f64, w: f64, dt: f64) -> Pose2 {
    if w.abs() < 1e-9 {
        return Pose2::new(
            pose.x + v * dt * pose.yaw.cos(),
            pose.y + v * dt * pose.yaw.sin(),
            pose.yaw,
        );
    }
    let yaw = pose.yaw + w * dt;
    let r = v / w;
    Pose2::new(
        pose.x + r * (yaw.sin() - pose.yaw.sin()),
        pose.y - r * (yaw.cos() - pose.yaw.cos()),
        wrap_angle(yaw),
    )
}

/// Poses after each of `round(horizon / dt)` steps; the start pose is not included.
pub fn rollout(pose: &Pose2, v: f64, w: f64, horizon: f64, dt: f64) -> Vec<Pose2> {
    let n = (horizon / dt).round().max(1.0) as usize;
    let mut out = Vec::with_capacity(n);
    let mut p = *pose;
    for _ in 0..n {
        p = integrate(&p, v, w, dt);
        out.push(p);
    }
    out
}

/// Whether a disc of `radius` at (x, y) stays on the map and clear of every
/// cell of cost at least the inscribed cost.
pub fn footprint_admissible(master: &CostGrid, x: f64, y: f64, radius: f64) -> bool {
    let m = master.meta;
    let res = m.resolution;
    let c0 = ((x - radius - m.origin_x) / res).floor() as i64;
    let c1 = ((x + radius - m.origin_x) / res).floor() as i64;
    let r0 = ((y - radius - m.origin_y) / res).floor() as i64;
    let r1 = ((y + radius - m.origin_y) / res).floor() as i64;
    let r2 = radius * radius;
    for r in r0..=r1 {
        let ylo = m.origin_y + r as f64 * res;
        let dy = (ylo - y).max(0.0).max(y - ylo - res);
        for c in c0..=c1 {
            let xlo = m.origin_x + c as f64 * res;
            let dx = (xlo - x).max(0.0).max(x - xlo - res);
            if dx * dx + dy * dy >= r2 {
                continue;
            }
            if !m.in_bounds(c, r) || master.cells[m.index(c as usize, r as usize)] >= INSCRIBED {
                return false;
            }
        }
    }
    true
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScoreWeights {
    pub obstacle: f64,
    pub goal: f64,
    pub path: f64,
    pub velocity: f64,
}

impl Default for ScoreWeights {
    fn default() -> Self {
        Self {
            obstacle: 2.0,
            goal: 1.0,
            path: 1.0,
            velocity: 0.5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryScore {
    pub obstacle: f64,
    pub goal: f64,
    pub path: f64,
    pub velocity: f64,
    pub total: f64,
}

/// Fixed inputs shared by every trajectory of one control step.
#[derive(Debug, Clone, Copy)]
pub struct ScoreContext<'a> {
    pub master: &'a CostGrid,
    pub path: &'a [(f64, f64)],
    pub start: Pose2,
    pub goal: Pose2,
    pub radius: f64,
    pub v_max: f64,
    pub weights: ScoreWeights,
}

/// Scores a rollout sampled at linear velocity `v`; `None` when any pose's
/// footprint is inadmissible. Lower is better.
pub fn score_trajectory(traj: &[Pose2], v: f64, ctx: &ScoreContext) -> Option<TrajectoryScore> {
    let end = traj.last()?;
    let mut worst = 0u8;
    let mut path_sum = 0.0;
    for p in traj {
        if !footprint_admissible(ctx.master, p.x, p.y, ctx.radius) {
            return None;
        }
        worst = worst.max(ctx.master.at_world(p.x, p.y).unwrap_or(u8::MAX));
        path_sum += ctx
            .path
            .iter()
            .map(|&(x, y)| (x - p.x).hypot(y - p.y))
            .fold(f64::INFINITY, f64::min);
    }
    let obstacle = f64::from(worst) / f64::from(MAX_NON_OBSTACLE);
    let goal = end.distance(&ctx.goal) / ctx.start.distance(&ctx.goal).max(1e-6);
    let path = if ctx.path.is_empty() { 0.0 } else { path_sum / traj.len() as f64 };
    let velocity = (ctx.v_max - v) / ctx.v_max;
    let w = &ctx.weights;
    Some(TrajectoryScore {
        obstacle,
        goal,
        path,
        velocity,
        total: w.obstacle * obstacle + w.goal * goal + w.path * path + w.velocity * velocity,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DwaConfig {
    pub horizon: f64,
    pub sim_dt: f64,
    pub v_samples: usize,
    pub w_samples: usize,
    pub weights: ScoreWeights,
    pub xy_tolerance: f64,
    pub yaw_tolerance: f64,
    /// Recovery rotation rate, rad/s.
    pub w_scan: f64,
}

impl Default for DwaConfig {
    fn default() -> Self {
        Self {
            horizon: 1.5,
            sim_dt: 0.1,
            v_samples: 11,
            w_samples: 21,
            weights: ScoreWeights::default(),
            xy_tolerance: 0.15,
            yaw_tolerance: 0.2,
            w_scan: 0.3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CommandKind {
    Arrived,
    /// In-place rotation toward the goal heading.
    Align,
    Trajectory(TrajectoryScore),
    /// No admissible sample; rotating in place to scan.
    Recovery,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Command {
    pub v: f64,
    pub w: f64,
    pub kind: CommandKind,
}

const TIE_EPS: f64 = 1e-12;

fn samples(lo: f64, hi: f64, n: usize) -> impl Iterator<Item = f64> {
    let n = n.max(1);
    (0..n).map(move |i| if n == 1 { lo } else { lo + (hi - lo) * i as f64 / (n - 1) as f64 })
}

/// One local-planner decision for a control period of `dt` seconds.
pub fn dwa_step(
    state: &RobotState,
    limits: &MotionLimits,
    master: &CostGrid,
    path: &[(f64, f64)],
    goal: &Pose2,
    cfg: &DwaConfig,
    dt: f64,
) -> Command {
    let pose = state.pose;
    let window = dynamic_window(state.v, state.w, limits, dt);
    if pose.distance(goal) <= cfg.xy_tolerance {
        let err = wrap_angle(goal.yaw - pose.yaw);
        if err.abs() <= cfg.yaw_tolerance {
            return Command { v: 0.0, w: 0.0, kind: CommandKind::Arrived };
        }
        let w = err.signum() * (1.5 * err.abs()).clamp(cfg.yaw_tolerance, limits.w_max);
        return Command {
            v: 0.0,
            w: w.clamp(window.w_min, window.w_max),
            kind: CommandKind::Align,
        };
    }

    let ctx = ScoreContext {
        master,
        path,
        start: pose,
        goal: *goal,
        radius: state.radius,
        v_max: limits.v_max,
        weights: cfg.weights,
    };
    // Equal totals (typically in-place rotations, which all leave the
    // position unchanged) go to the rollout ending closest to facing the goal.
    let mut best: Option<(f64, f64, TrajectoryScore, f64)> = None;
    for v in samples(window.v_min, window.v_max, cfg.v_samples) {
        for w in samples(window.w_min, window.w_max, cfg.w_samples) {
            let traj = rollout(&pose, v, w, cfg.horizon, cfg.sim_dt);
            let Some(s) = score_trajectory(&traj, v, &ctx) else { continue };
            let end = traj[traj.len() - 1];
            let heading = wrap_angle((goal.y - end.y).atan2(goal.x - end.x) - end.yaw).abs();
            let better = best.is_none_or(|(_, _, b, h)| {
                s.total < b.total - TIE_EPS || (s.total <= b.total + TIE_EPS && heading < h)
            });
            if better {
                best = Some((v, w, s, heading));
            }
        }
    }
    match best {
        Some((v, w, s, _)) => Command { v, w, kind: CommandKind::Trajectory(s) },
        None => {
            // turn toward the side the path leaves on, counter-clockwise if dead ahead
            let (tx, ty) = path.last().copied().unwrap_or((goal.x, goal.y));
            let side = wrap_angle((ty - pose.y).atan2(tx - pose.x) - pose.yaw);
            let sign = if side < 0.0 { -1.0 } else { 1.0 };
            Command {
                v: 0.0,
                w: sign * cfg.w_scan.min(limits.w_max),
                kind: CommandKind::Recovery,
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::costmap::LETHAL;
    use crate::grid::GridMeta;
    use proptest::prelude::*;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn limits() -> MotionLimits {
        MotionLimits {
            v_max: 0.5,
            w_max: 1.0,
            a_v: 0.5,
            a_w: 1.0,
        }
    }

    #[test]
    fn window_examples() {
        let w = dynamic_window(0.0, 0.0, &limits(), 0.1);
        assert_eq!((w.v_min, w.w_min), (0.0, -0.1));
        assert!((w.v_max - 0.05).abs() < 1e-12 && (w.w_max - 0.1).abs() < 1e-12);
        let w = dynamic_window(0.48, 0.95, &limits(), 0.1);
        assert!((w.v_min - 0.43).abs() < 1e-12);
        assert_eq!((w.v_max, w.w_max), (0.5, 1.0));
    }

    #[test]
    fn quarter_circle() {
        let end = *rollout(&Pose2::new(0.0, 0.0, 0.0), FRAC_PI_2, FRAC_PI_2, 1.0, 0.1).last().unwrap();
        assert!((end.x - 1.0).abs() < 1e-9 && (end.y - 1.0).abs() < 1e-9);
        assert!((end.yaw - FRAC_PI_2).abs() < 1e-9);
        let straight = rollout(&Pose2::new(1.0, 2.0, PI), 0.5, 0.0, 1.5, 0.1);
        assert_eq!(straight.len(), 15);
        assert!((straight[14].x - 0.25).abs() < 1e-9);
    }

    proptest! {
        #[test]
        fn window_within_limits(v in 0.0..0.5f64, w in -1.0..1.0f64, dt in 0.01..1.0f64) {
            let l = limits();
            let win = dynamic_window(v, w, &l, dt);
            prop_assert!(0.0 <= win.v_min && win.v_min <= win.v_max && win.v_max <= l.v_max);
            prop_assert!(-l.w_max <= win.w_min && win.w_min <= win.w_max && win.w_max <= l.w_max);
            prop_assert!(win.v_min <= v + 1e-12 && v <= win.v_max + 1e-12);
        }

        /// The arc length travelled equals |v| * t and the heading changes by w * t.
        #[test]
        fn arc_consistency(v in 0.0..1.0f64, w in -2.0..2.0f64, yaw in -3.0..3.0f64) {
            let p0 = Pose2::new(0.0, 0.0, yaw);
            let fine = rollout(&p0, v, w, 1.0, 0.001);
            let mut len = 0.0;
            let mut prev = p0;
            for p in &fine {
                len += prev.distance(p);
                prev = *p;
            }
            prop_assert!((len - v).abs() < 1e-3);
            let coarse = *rollout(&p0, v, w, 1.0, 0.5).last().unwrap();
            prop_assert!(coarse.distance(fine.last().unwrap()) < 1e-9);
            prop_assert!(wrap_angle(coarse.yaw - yaw - w).abs() < 1e-9);
        }
    }

    #[test]
    fn footprint_examples() {
        let mut g = CostGrid::new(GridMeta::new(0.1, 0.0, 0.0, 20, 20));
        g.set(10, 10, INSCRIBED);
        assert!(!footprint_admissible(&g, 1.05, 1.05, 0.2));
        // disc edge just short of the cell face at x = 1.0
        assert!(footprint_admissible(&g, 0.79, 1.05, 0.2));
        assert!(!footprint_admissible(&g, 0.81, 1.05, 0.2));
        // leaving the map is inadmissible
        assert!(!footprint_admissible(&g, 0.1, 1.0, 0.2));
        g.set(10, 10, 252);
        assert!(footprint_admissible(&g, 1.05, 1.05, 0.2));
    }

    fn robot(pose: Pose2) -> RobotState {
        RobotState {
            name: "r".into(),
            pose,
            v: 0.0,
            w: 0.0,
            radius: 0.2,
            priority: 0,
            goal: pose,
        }
    }

    #[test]
    fn arrived_and_align() {
        let g = CostGrid::new(GridMeta::new(0.1, 0.0, 0.0, 30, 30));
        let cfg = DwaConfig::default();
        let s = robot(Pose2::new(1.5, 1.5, 0.0));
        let c = dwa_step(&s, &limits(), &g, &[], &Pose2::new(1.6, 1.5, 0.1), &cfg, 0.1);
        assert_eq!(c.kind, CommandKind::Arrived);
        let c = dwa_step(&s, &limits(), &g, &[], &Pose2::new(1.6, 1.5, 1.0), &cfg, 0.1);
        assert_eq!(c.kind, CommandKind::Align);
        assert!(c.w > 0.0 && c.v == 0.0);
    }

    #[test]
    fn boxed_in_robot_recovers() {
        let mut g = CostGrid::filled(GridMeta::new(0.1, 0.0, 0.0, 30, 30), LETHAL);
        g.set(15, 15, 0);
        let s = robot(Pose2::new(1.55, 1.55, 0.0));
        let c = dwa_step(&s, &limits(), &g, &[], &Pose2::new(2.5, 2.5, 0.0), &DwaConfig::default(), 0.1);
        assert_eq!(c.kind, CommandKind::Recovery);
        assert_eq!((c.v, c.w), (0.0, 0.3));
        let c = dwa_step(&s, &limits(), &g, &[(1.6, 1.0)], &Pose2::new(2.5, 2.5, 0.0), &DwaConfig::default(), 0.1);
        assert_eq!((c.v, c.w), (0.0, -0.3));
    }

    /// The chosen command is the minimum over an independent enumeration of the window.
    #[test]
    fn picks_enumerated_minimum() {
        let mut g = CostGrid::new(GridMeta::new(0.1, 0.0, 0.0, 40, 40));
        for r in 0..40 {
            g.set(25, r, LETHAL);
            g.set(24, r, 200);
        }
        let mut s = robot(Pose2::new(1.0, 2.0, 0.3));
        s.v = 0.3;
        s.w = -0.2;
        let goal = Pose2::new(2.2, 3.0, 0.0);
        let path = [(1.0, 2.0), (1.5, 2.5), (2.0, 3.0)];
        let cfg = DwaConfig::default();
        let l = limits();
        let c = dwa_step(&s, &l, &g, &path, &goal, &cfg, 0.1);
        let CommandKind::Trajectory(score) = c.kind else { panic!("{c:?}") };

        let mut best = f64::INFINITY;
        for i in 0..11 {
            for j in 0..21 {
                let v = 0.25 + 0.1 * i as f64 / 10.0;
                let w = -0.3 + 0.2 * j as f64 / 20.0;
                let mut p = s.pose;
                let mut ok = true;
                let mut worst = 0u8;
                let mut pd = 0.0;
                for _ in 0..15 {
                    p = integrate(&p, v, w, 0.1);
                    ok &= footprint_admissible(&g, p.x, p.y, 0.2);
                    worst = worst.max(g.at_world(p.x, p.y).unwrap());
                    pd += path.iter().map(|q| (q.0 - p.x).hypot(q.1 - p.y)).fold(f64::INFINITY, f64::min);
                }
                if !ok {
                    continue;
                }
                let total = 2.0 * worst as f64 / 252.0
                    + p.distance(&goal) / s.pose.distance(&goal)
                    + pd / 15.0
                    + 0.5 * (0.5 - v) / 0.5;
                best = best.min(total);
            }
        }
        assert!((score.total - best).abs() < 1e-9, "{} vs {best}", score.total);
    }
}
